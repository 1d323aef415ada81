"""The form sector at the base point.

Basis elements of the exterior algebra on ``n`` generators are sorted
tuples ``J`` of indices in ``1..n``.  Generators ``1..q`` span the
"top" block and ``q+1..n`` the "bottom" block.  Signs follow the fixed
generator order ``1 < 2 < ... < n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

from .coeff_algebra import CoeffElem, EndoSymbol, ExactScalar, coeff_adjoint, coeff_mul

__all__ = [
    "FormFrame",
    "FormElem",
    "FormOperator",
    "all_bases",
    "d_top",
    "d_bot",
    "form_shift",
    "wedge",
    "contract",
    "wedge_op",
    "contract_op",
    "omega_d",
    "project_degree",
    "project_det",
    "degree_projector",
    "det_projector",
    "curvature_operator",
    "two_form_operator",
    "symbol_action",
    "BLOCK_SHIFTS",
]


@dataclass(frozen=True)
class FormFrame:
    """Complex dimension ``n`` and rank ``q`` of the top block."""

    n: int
    q: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 0 <= self.q <= self.n:
            raise ValueError(f"q must lie in [0, n], got q={self.q}, n={self.n}")

    @property
    def det(self) -> tuple:
        """The basis element {1, ..., q} spanning the determinant line."""
        return tuple(range(1, self.q + 1))

    def bases(self):
        return all_bases(self.n)


def all_bases(n: int) -> list:
    """All sorted subsets of 1..n ordered by size, then lexicographically."""
    return [J for k in range(n + 1) for J in combinations(range(1, n + 1), k)]


def d_top(frame: FormFrame, J: tuple) -> int:
    return sum(1 for j in J if j <= frame.q)


def d_bot(frame: FormFrame, J: tuple) -> int:
    return sum(1 for j in J if j > frame.q)


def form_shift(frame: FormFrame, J: tuple) -> int:
    """``q - d_top + d_bot``: the form part of the model operator is 4*pi times this."""
    return frame.q - d_top(frame, J) + d_bot(frame, J)


def _check_index(n: int, l: int):
    if not 1 <= l <= n:
        raise IndexError(f"generator index {l} out of range 1..{n}")


def _wedge_basis(l: int, J: tuple):
    """Return ``(sign, J')`` for w^l wedge J, or ``None`` when l is in J."""
    if l in J:
        return None
    below = sum(1 for j in J if j < l)
    return (-1) ** below, tuple(sorted(J + (l,)))


def _contract_basis(l: int, J: tuple):
    if l not in J:
        return None
    pos = J.index(l)
    return (-1) ** pos, J[:pos] + J[pos + 1 :]


class FormElem:
    """Element of the form sector: map from basis tuple to CoeffElem."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping | None = None):
        self.n = n
        self._terms = {}
        for J, c in (terms or {}).items():
            J = tuple(sorted(J))
            for j in J:
                _check_index(n, j)
            c = c if isinstance(c, CoeffElem) else CoeffElem.scalar(c)
            c = self._terms.get(J, CoeffElem.zero()) + c
            if c:
                self._terms[J] = c
            else:
                self._terms.pop(J, None)

    @classmethod
    def basis(cls, n: int, J: Iterable[int]) -> "FormElem":
        return cls(n, {tuple(J): CoeffElem.one()})

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def __getitem__(self, J):
        return self._terms.get(tuple(J), CoeffElem.zero())

    @property
    def is_zero(self):
        return not self._terms

    def __eq__(self, other):
        return isinstance(other, FormElem) and self.n == other.n and self._terms == other._terms

    def __add__(self, other):
        out = dict(self._terms)
        for J, c in other._terms.items():
            out[J] = out.get(J, CoeffElem.zero()) + c
        return FormElem(self.n, out)

    def __neg__(self):
        return FormElem(self.n, {J: -c for J, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        body = ", ".join(f"{J}: {c}" for J, c in self.items())
        return f"FormElem(n={self.n}, {{{body}}})"


def wedge(l: int, x: FormElem) -> FormElem:
    """``w^l ∧ x``."""
    _check_index(x.n, l)
    out = {}
    for J, c in x._terms.items():
        hit = _wedge_basis(l, J)
        if hit:
            sign, J2 = hit
            out[J2] = out.get(J2, CoeffElem.zero()) + c * sign
    return FormElem(x.n, out)


def contract(l: int, x: FormElem) -> FormElem:
    """Interior product with the dual vector of generator ``l``."""
    _check_index(x.n, l)
    out = {}
    for J, c in x._terms.items():
        hit = _contract_basis(l, J)
        if hit:
            sign, J2 = hit
            out[J2] = out.get(J2, CoeffElem.zero()) + c * sign
    return FormElem(x.n, out)


def project_degree(k: int, x: FormElem) -> FormElem:
    return FormElem(x.n, {J: c for J, c in x._terms.items() if len(J) == k})


def project_det(frame: FormFrame, x: FormElem) -> FormElem:
    det = frame.det
    return FormElem(x.n, {J: c for J, c in x._terms.items() if J == det})


class FormOperator:
    """Sparse matrix over basis pairs ``(J_out, J_in)`` with CoeffElem entries."""

    __slots__ = ("n", "_entries", "_by_in", "_hash")

    def __init__(self, n: int, entries: Mapping | None = None):
        self.n = n
        clean = {}
        for (Jo, Ji), c in (entries or {}).items():
            c = c if isinstance(c, CoeffElem) else CoeffElem.scalar(c)
            key = (tuple(Jo), tuple(Ji))
            if key in clean:
                c = clean[key] + c
            if c:
                clean[key] = c
            else:
                clean.pop(key, None)
        self._entries = clean
        self._by_in = None
        self._hash = None

    # --- constructors -------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "FormOperator":
        one = CoeffElem.one()
        return cls(n, {(J, J): one for J in all_bases(n)})

    @classmethod
    def scalar(cls, n: int, c: CoeffElem) -> "FormOperator":
        c = c if isinstance(c, CoeffElem) else CoeffElem.scalar(c)
        return cls(n, {(J, J): c for J in all_bases(n)})

    @classmethod
    def zero(cls, n: int) -> "FormOperator":
        return cls(n, {})

    # --- access -------------------------------------------------------
    def entries(self):
        """Entries in canonical (row, column) order."""
        order = {J: i for i, J in enumerate(all_bases(self.n))}
        return sorted(self._entries.items(), key=lambda kv: (order[kv[0][0]], order[kv[0][1]]))

    def raw_entries(self) -> dict:
        return self._entries

    def by_input(self) -> dict:
        """Map ``J_in -> [(J_out, coeff), ...]`` (cached)."""
        if self._by_in is None:
            idx: dict = {}
            for (Jo, Ji), c in self._entries.items():
                idx.setdefault(Ji, []).append((Jo, c))
            self._by_in = idx
        return self._by_in

    def __getitem__(self, key):
        Jo, Ji = key
        return self._entries.get((tuple(Jo), tuple(Ji)), CoeffElem.zero())

    @property
    def is_zero(self):
        return not self._entries

    # --- algebra ------------------------------------------------------
    def __matmul__(self, other: "FormOperator") -> "FormOperator":
        if self.n != other.n:
            raise ValueError("frame mismatch in FormOperator product")
        acc: dict = {}
        by_in = self.by_input()
        for (Jm, Ji), b in other._entries.items():
            for Jo, a in by_in.get(Jm, ()):
                key = (Jo, Ji)
                acc[key] = acc.get(key, CoeffElem.zero()) + coeff_mul(a, b)
        return FormOperator(self.n, acc)

    def __call__(self, x: FormElem) -> FormElem:
        out: dict = {}
        by_in = self.by_input()
        for Ji, c in x._terms.items():
            for Jo, a in by_in.get(Ji, ()):
                out[Jo] = out.get(Jo, CoeffElem.zero()) + coeff_mul(a, c)
        return FormElem(self.n, out)

    def __add__(self, other):
        if self.n != other.n:
            raise ValueError("frame mismatch in FormOperator sum")
        acc = dict(self._entries)
        for k, c in other._entries.items():
            acc[k] = acc.get(k, CoeffElem.zero()) + c
        return FormOperator(self.n, acc)

    def __neg__(self):
        return FormOperator(self.n, {k: -c for k, c in self._entries.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "FormOperator":
        """Left multiplication of every entry by a coefficient."""
        if isinstance(c, ExactScalar):
            return FormOperator(self.n, {k: v.scale(c) for k, v in self._entries.items()})
        c = c if isinstance(c, CoeffElem) else CoeffElem.scalar(c)
        return FormOperator(self.n, {k: coeff_mul(c, v) for k, v in self._entries.items()})

    def adjoint(self) -> "FormOperator":
        """Transpose with adjointed entries (the basis is orthonormal)."""
        return FormOperator(self.n, {(Ji, Jo): coeff_adjoint(c) for (Jo, Ji), c in self._entries.items()})

    def restrict(self, out_pred=None, in_pred=None) -> "FormOperator":
        return FormOperator(
            self.n,
            {
                (Jo, Ji): c
                for (Jo, Ji), c in self._entries.items()
                if (out_pred is None or out_pred(Jo)) and (in_pred is None or in_pred(Ji))
            },
        )

    def __eq__(self, other):
        return isinstance(other, FormOperator) and self.n == other.n and self._entries == other._entries

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self._entries.items())))
        return self._hash

    def pretty(self) -> str:
        if not self._entries:
            return "0"
        lines = []
        for (Jo, Ji), c in self.entries():
            lines.append(f"{_fmt_basis(Jo)} <- {_fmt_basis(Ji)}: {c}")
        return "\n".join(lines)

    def __repr__(self):
        return f"FormOperator(n={self.n}, {len(self._entries)} entries)"


def _fmt_basis(J: tuple) -> str:
    return "{" + ",".join(map(str, J)) + "}"


def _basis_operator(n: int, fn) -> FormOperator:
    one = CoeffElem.one()
    entries = {}
    for J in all_bases(n):
        hit = fn(J)
        if hit:
            sign, J2 = hit
            entries[(J2, J)] = one * sign
    return FormOperator(n, entries)


def wedge_op(n: int, l: int) -> FormOperator:
    _check_index(n, l)
    return _basis_operator(n, lambda J: _wedge_basis(l, J))


def contract_op(n: int, l: int) -> FormOperator:
    _check_index(n, l)
    return _basis_operator(n, lambda J: _contract_basis(l, J))


def omega_d(frame: FormFrame) -> FormOperator:
    """Form-sector curvature operator, assembled from wedge and contraction.

    ``-2 pi sum_{l<=q} i_l (w^l ∧ .) - 2 pi sum_{l>q} w^l ∧ i_l``.
    """
    n = frame.n
    total = FormOperator.zero(n)
    for l in range(1, n + 1):
        if l <= frame.q:
            total = total + contract_op(n, l) @ wedge_op(n, l)
        else:
            total = total + wedge_op(n, l) @ contract_op(n, l)
    return total.scale(ExactScalar(-2, 0, 1))


def degree_projector(n: int, k: int) -> FormOperator:
    one = CoeffElem.one()
    return FormOperator(n, {(J, J): one for J in all_bases(n) if len(J) == k})


def det_projector(frame: FormFrame) -> FormOperator:
    return FormOperator(frame.n, {(frame.det, frame.det): CoeffElem.one()})


# (top, bottom) degree change of w^l ∧ w^m for each block of index pairs.
BLOCK_SHIFTS = {"top": (2, 0), "mixed": (1, 1), "perp": (0, 2)}


def _pair_block(frame: FormFrame, l: int, m: int) -> str:
    if m <= frame.q:
        return "top"
    if l > frame.q:
        return "perp"
    return "mixed"


def two_form_operator(frame: FormFrame, name: str, blocks=("top", "mixed", "perp")) -> FormOperator:
    """``sum_{l<m} [name[l,m]] w^l ∧ w^m`` over the requested blocks.

    Each component is an EndoSymbol ``name[l,m]`` tagged with its block's
    degree shift; its adjoint partner is ``name*[l,m]``.
    """
    n = frame.n
    total = FormOperator.zero(n)
    for l, m in combinations(range(1, n + 1), 2):
        block = _pair_block(frame, l, m)
        if block not in blocks:
            continue
        sym = EndoSymbol(f"{name}[{l},{m}]", BLOCK_SHIFTS[block], f"{name}*[{l},{m}]")
        total = total + (wedge_op(n, l) @ wedge_op(n, m)).scale(CoeffElem.word(sym))
    return total


def curvature_operator(frame: FormFrame, block: str = "full", name: str = "R") -> FormOperator:
    """The curvature two-form ``R`` or one of its blocks ``top``, ``mixed``, ``perp``."""
    blocks = ("top", "mixed", "perp") if block == "full" else (block,)
    for b in blocks:
        if b not in BLOCK_SHIFTS:
            raise ValueError(f"unknown block {b!r}")
    return two_form_operator(frame, name, blocks)


def symbol_action(F: FormOperator, sym: EndoSymbol) -> FormOperator:
    """The part of ``F`` whose coefficient words involve ``sym``."""
    entries = {}
    for key, c in F.raw_entries().items():
        kept = CoeffElem._raw({k: v for k, v in c.raw_items() if sym in k[2]})
        if kept:
            entries[key] = kept
    return FormOperator(F.n, entries)
