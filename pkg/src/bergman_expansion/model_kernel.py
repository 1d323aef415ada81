"""Gaussian kernel calculus on R^{2n}.

A kernel is a finite sum

    c * z^a zbar^b z'^c zbar'^d * F[J_out, J_in] * P(Z, Z')

with ``P(Z, Z') = exp(-pi/2 (|z|^2 + |z'|^2 - 2 z.zbar'))`` the reproducing
kernel of the model operator's kernel.  Operators act on the first slot.

The ladder operators are ``b_i = -2 d/dz_i + pi zbar_i`` and
``b_i^+ = 2 d/dzbar_i + pi z_i``.  On ``f P`` they reduce to::

    b_i (f P)   = -2 (df/dz_i) P + 2 pi (zbar_i - zbar'_i) f P
    b_i^+ (f P) =  2 (df/dzbar_i) P

Monomials are tuples of ``4n`` exponents, in blocks
``(z_1..z_n, zbar_1..zbar_n, z'_1..z'_n, zbar'_1..zbar'_n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .coeff_algebra import CoeffElem, ExactScalar, _accumulate, _merge_syms
from .fock_forms import FormFrame, FormOperator, all_bases, form_shift

__all__ = [
    "GaussKernel",
    "LadderNormalForm",
    "OpGen",
    "B",
    "Bplus",
    "MulZ",
    "MulZbar",
    "MulPrimed",
    "FormOp",
    "ScalarCoeff",
    "ProjL",
    "ProjN",
    "L0Inv",
    "LOp",
    "L0Op",
    "apply",
    "apply_word",
    "to_normal_form",
    "from_normal_form",
    "l0_inverse",
    "project_N",
    "project_L",
    "apply_L",
    "apply_L0",
    "eval_first_zero",
    "diagonal",
    "integrate_against_P",
    "kernel_adjoint",
    "pair_integral",
    "l2_pairing",
    "gen_adjoint",
    "word_adjoint",
    "make_mono",
]

_ONE = Fraction(1)


# ---------------------------------------------------------------------------
# Monomials
# ---------------------------------------------------------------------------

def make_mono(n: int, z=(), zbar=(), zp=(), zbp=()) -> tuple:
    """Exponent tuple from lists of 1-based variable indices (repeats allowed)."""
    e = [0] * (4 * n)
    for block, idxs in enumerate((z, zbar, zp, zbp)):
        for i in idxs:
            if not 1 <= i <= n:
                raise IndexError(f"variable index {i} out of range 1..{n}")
            e[block * n + i - 1] += 1
    return tuple(e)


def _bump(mono: tuple, pos: int, d: int) -> tuple:
    m = list(mono)
    m[pos] += d
    return tuple(m)


def _mono_str(mono: tuple) -> str:
    n = len(mono) // 4
    names = ("z", "zb", "zp", "zbp")
    parts = []
    for pos, e in enumerate(mono):
        if e:
            var = f"{names[pos // n]}{pos % n + 1}"
            parts.append(var if e == 1 else f"{var}^{e}")
    return "*".join(parts) or "1"


# Spatial actions on a single monomial times P.  Results are tuples of
# (monomial, pi power, rational factor).

@lru_cache(maxsize=None)
def _sp_b(i: int, mono: tuple) -> tuple:
    n = len(mono) // 4
    out = []
    e = mono[i]
    if e:
        out.append((_bump(mono, i, -1), 0, Fraction(-2 * e)))
    out.append((_bump(mono, n + i, 1), 1, Fraction(2)))
    out.append((_bump(mono, 3 * n + i, 1), 1, Fraction(-2)))
    return tuple(out)


@lru_cache(maxsize=None)
def _sp_bplus(i: int, mono: tuple) -> tuple:
    n = len(mono) // 4
    e = mono[n + i]
    if not e:
        return ()
    return ((_bump(mono, n + i, -1), 0, Fraction(2 * e)),)


def _poly_apply(poly: dict, fn) -> dict:
    """Apply a spatial action to ``{(mono, pi): r}``."""
    out: dict = {}
    for (mono, pi), r in poly.items():
        for m2, dpi, f in fn(mono):
            key = (m2, pi + dpi)
            v = out.get(key, 0) + r * f
            if v:
                out[key] = v
            else:
                out.pop(key, None)
    return out


@lru_cache(maxsize=None)
def _nf_basic(n: int, a: tuple, c: tuple) -> tuple:
    """Normal form of ``z^a zbar^c P`` as ``(alpha, beta, zbar'-exps, pi, r)`` terms.

    Uses ``zbar_l * b^alpha(g P) = (1/2pi) b^{alpha+e_l}(g P)
    + b^alpha(zbar'_l g P) + (1/pi) b^alpha(dg/dz_l P)``.
    """
    zero = (0,) * n
    cur = {(zero, a, zero, 0): _ONE}
    for l in range(n):
        for _ in range(c[l]):
            nxt: dict = {}
            for (al, be, ep, pi), r in cur.items():
                _acc_r(nxt, (_bump(al, l, 1), be, ep, pi - 1), r / 2)
                _acc_r(nxt, (al, be, _bump(ep, l, 1), pi), r)
                if be[l]:
                    _acc_r(nxt, (al, _bump(be, l, -1), ep, pi - 1), r * be[l])
            cur = nxt
    return tuple((al, be, ep, pi, r) for (al, be, ep, pi), r in sorted(cur.items()))


def _acc_r(d: dict, key, r):
    v = d.get(key, 0) + r
    if v:
        d[key] = v
    else:
        d.pop(key, None)


@lru_cache(maxsize=None)
def _expand_b(alpha: tuple, beta: tuple) -> tuple:
    """``b^alpha (z^beta P)`` as ``(mono, pi, r)`` terms (primed part zero)."""
    n = len(alpha)
    poly = {(tuple(beta) + (0,) * (3 * n), 0): _ONE}
    for i in range(n):
        for _ in range(alpha[i]):
            poly = _poly_apply(poly, lambda m, i=i: _sp_b(i, m))
    return tuple((m, pi, r) for (m, pi), r in sorted(poly.items()))


def _split(mono: tuple):
    n = len(mono) // 4
    return mono[:n], mono[n : 2 * n], mono[2 * n : 3 * n], mono[3 * n :]


@lru_cache(maxsize=None)
def _spectral_map(mono: tuple, mode: str, shift: int, power: int) -> tuple:
    """Spectral operations on ``mono * P`` done through the normal form.

    ``mode``: ``"l0inv"`` divides level-k parts by (4 pi (k + shift))^power and
    drops zero levels; ``"projL"`` keeps level 0; ``"L"`` multiplies by
    4 pi (k + shift).
    """
    n = len(mono) // 4
    a, c, pz, pzb = _split(mono)
    acc: dict = {}
    for al, be, ep, pi, r in _nf_basic(n, a, c):
        level = sum(al) + shift
        if mode == "l0inv":
            if level == 0:
                continue
            r = r / Fraction(4 * level) ** power
            pi -= power
        elif mode == "projL":
            if sum(al):
                continue
        elif mode == "L":
            if level == 0:
                continue
            r = r * 4 * level
            pi += 1
        else:  # pragma: no cover - internal misuse
            raise ValueError(mode)
        primed = pz + tuple(x + y for x, y in zip(pzb, ep))
        for m2, pi2, r2 in _expand_b(al, be):
            full = m2[: 2 * n] + tuple(x + y for x, y in zip(m2[2 * n :], primed))
            _acc_r(acc, (full, pi + pi2), r * r2)
    return tuple((m, p, r) for (m, p), r in sorted(acc.items()))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _ckey_mul(ka, kb):
    return (ka[0] + kb[0], _merge_syms(ka[1], kb[1]), ka[2] + kb[2])


class GaussKernel:
    """Immutable kernel ``sum c * monomial * F[J_out, J_in] * P``.

    Internally a flat map ``(mono, J_out, J_in, coeff_key) -> (re, im)``;
    the public view groups terms into CoeffElem coefficients.
    """

    __slots__ = ("frame", "_t")

    def __init__(self, frame: FormFrame, terms: Iterable = ()):
        """Build from ``(coeff, mono, J_out, J_in)`` tuples."""
        self.frame = frame
        acc: dict = {}
        n = frame.n
        for coeff, mono, Jo, Ji in terms:
            mono = tuple(mono)
            if len(mono) != 4 * n:
                raise ValueError(f"monomial length {len(mono)} does not match n={n}")
            coeff = coeff if isinstance(coeff, CoeffElem) else CoeffElem.scalar(coeff)
            for ck, (re, im) in coeff.raw_items():
                _accumulate(acc, (mono, tuple(Jo), tuple(Ji), ck), re, im)
        self._t = acc

    @classmethod
    def _raw(cls, frame: FormFrame, t: dict) -> "GaussKernel":
        obj = cls.__new__(cls)
        obj.frame = frame
        obj._t = t
        return obj

    # --- constructors -------------------------------------------------
    @classmethod
    def projection(cls, frame: FormFrame, forms="identity", mono: tuple | None = None) -> "GaussKernel":
        """``mono * P`` times a form operator.

        ``forms`` is ``"identity"``, ``"det"`` (the determinant line
        projector), ``"scalar"`` (the degree-0 line) or a FormOperator.
        """
        n = frame.n
        mono = mono or (0,) * (4 * n)
        if forms == "identity":
            F = FormOperator.identity(n)
        elif forms == "det":
            F = FormOperator(n, {(frame.det, frame.det): 1})
        elif forms == "scalar":
            F = FormOperator(n, {((), ()): 1})
        elif isinstance(forms, FormOperator):
            F = forms
        else:
            raise ValueError(f"unknown form part {forms!r}")
        return cls(frame, ((c, mono, Jo, Ji) for (Jo, Ji), c in F.raw_entries().items()))

    @classmethod
    def zero(cls, frame: FormFrame) -> "GaussKernel":
        return cls._raw(frame, {})

    # --- inspection ---------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self._t

    def terms(self):
        """Yield ``(CoeffElem, mono, J_out, J_in)`` in canonical order."""
        grouped: dict = {}
        for (mono, Jo, Ji, ck), v in self._t.items():
            grouped.setdefault((mono, Jo, Ji), {})[ck] = v
        order = {J: i for i, J in enumerate(all_bases(self.frame.n))}
        for key in sorted(grouped, key=lambda k: (k[0], order[k[1]], order[k[2]])):
            yield CoeffElem._raw(grouped[key]), key[0], key[1], key[2]

    def coefficient(self, mono: tuple, Jo=(), Ji=()) -> CoeffElem:
        mono, Jo, Ji = tuple(mono), tuple(Jo), tuple(Ji)
        return CoeffElem._raw({ck: v for (m, o, i, ck), v in self._t.items() if (m, o, i) == (mono, Jo, Ji)})

    def monomials(self) -> set:
        return {k[0] for k in self._t}

    def has_unprimed(self) -> bool:
        n2 = 2 * self.frame.n
        return any(any(k[0][:n2]) for k in self._t)

    # --- arithmetic ---------------------------------------------------
    def _check(self, other):
        if not isinstance(other, GaussKernel):
            raise TypeError(f"expected GaussKernel, got {type(other).__name__}")
        if other.frame != self.frame:
            raise ValueError(f"frame mismatch: {self.frame} vs {other.frame}")

    def __add__(self, other):
        self._check(other)
        acc = dict(self._t)
        for k, (re, im) in other._t.items():
            _accumulate(acc, k, re, im)
        return GaussKernel._raw(self.frame, acc)

    def __neg__(self):
        return GaussKernel._raw(self.frame, {k: (-re, -im) for k, (re, im) in self._t.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "GaussKernel":
        """Left multiplication by a scalar or coefficient."""
        if isinstance(c, (int, Fraction)):
            c = ExactScalar.of(c)
        if isinstance(c, ExactScalar):
            if c.is_zero:
                return GaussKernel.zero(self.frame)
            sr, si, sp = c.re, c.im, c.pi_power
            return GaussKernel._raw(
                self.frame,
                {
                    (m, o, i, (ck[0] + sp, ck[1], ck[2])): (re * sr - im * si, re * si + im * sr)
                    for (m, o, i, ck), (re, im) in self._t.items()
                },
            )
        return apply(ScalarCoeff(c), self)

    def __eq__(self, other):
        return isinstance(other, GaussKernel) and self.frame == other.frame and self._t == other._t

    def __hash__(self):
        return hash((self.frame, frozenset(self._t.items())))

    def pretty(self) -> str:
        if not self._t:
            return "0"
        lines = []
        for c, mono, Jo, Ji in self.terms():
            lines.append(f"({c}) * {_mono_str(mono)} * [{Jo} <- {Ji}] * P")
        return "\n".join(lines)

    def __repr__(self):
        return f"GaussKernel({self.frame}, {len(self._t)} terms)"


def _map_spatial(K: GaussKernel, fn) -> GaussKernel:
    """Apply a spatial action ``mono -> ((mono', dpi, r), ...)`` termwise."""
    acc: dict = {}
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        for m2, dpi, r in fn(mono, Jo):
            _accumulate(acc, (m2, Jo, Ji, (ck[0] + dpi, ck[1], ck[2])), re * r, im * r)
    return GaussKernel._raw(K.frame, acc)


def _left_coeff(K: GaussKernel, c: CoeffElem) -> GaussKernel:
    """Multiply entries on the left by ``c``."""
    acc: dict = {}
    citems = list(c.raw_items())
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        for kc, (rc, ic) in citems:
            _accumulate(acc, (mono, Jo, Ji, _ckey_mul(kc, ck)), rc * re - ic * im, rc * im + ic * re)
    return GaussKernel._raw(K.frame, acc)


def _form_left(K: GaussKernel, F: FormOperator) -> GaussKernel:
    if F.n != K.frame.n:
        raise ValueError(f"form operator on n={F.n} applied to kernel with n={K.frame.n}")
    by_in = F.by_input()
    acc: dict = {}
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        for Jo2, a in by_in.get(Jo, ()):
            for ka, (ra, ia) in a.raw_items():
                _accumulate(acc, (mono, Jo2, Ji, _ckey_mul(ka, ck)), ra * re - ia * im, ra * im + ia * re)
    return GaussKernel._raw(K.frame, acc)


# ---------------------------------------------------------------------------
# Operator generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpGen:
    """One operator acting on the first slot of kernels.

    ``kind`` is one of ``B, BP, Z, ZBAR, PRIMED, FORM, SCALAR, PROJ_L,
    PROJ_N, L0INV, L, L0``; ``index`` is a 1-based variable index or the
    power of ``L0INV``; ``payload`` carries the form operator, coefficient
    or primed monomial.
    """

    kind: str
    index: int = 0
    payload: object = None

    def __str__(self):
        if self.kind in ("B", "BP", "Z", "ZBAR"):
            return f"{self.kind}{self.index}"
        if self.kind == "L0INV":
            return f"L0INV^{self.index}"
        if self.kind == "PRIMED":
            hol, anti = self.payload
            return "PRIMED(" + ",".join([f"zp{i}" for i in hol] + [f"zbp{i}" for i in anti]) + ")"
        if self.kind == "SCALAR":
            return f"({self.payload})"
        if self.kind == "FORM":
            return "FORM"
        return self.kind


def B(i: int) -> OpGen:
    return OpGen("B", i)


def Bplus(i: int) -> OpGen:
    return OpGen("BP", i)


def MulZ(i: int) -> OpGen:
    return OpGen("Z", i)


def MulZbar(i: int) -> OpGen:
    return OpGen("ZBAR", i)


def MulPrimed(holo: Sequence[int] = (), anti: Sequence[int] = ()) -> OpGen:
    """Multiplication by ``prod z'_i * prod zbar'_j`` (second-slot variables)."""
    return OpGen("PRIMED", 0, (tuple(sorted(holo)), tuple(sorted(anti))))


def FormOp(F: FormOperator) -> OpGen:
    return OpGen("FORM", 0, F)


def ScalarCoeff(c) -> OpGen:
    if not isinstance(c, CoeffElem):
        c = CoeffElem.scalar(c) if not isinstance(c, ExactScalar) else CoeffElem.scalar(c)
    return OpGen("SCALAR", 0, c)


ProjL = OpGen("PROJ_L")
ProjN = OpGen("PROJ_N")
LOp = OpGen("L")
L0Op = OpGen("L0")


def L0Inv(power: int = 1) -> OpGen:
    """``L0^{-power} P^{N-perp}``."""
    if power < 1:
        raise ValueError("L0Inv power must be positive")
    return OpGen("L0INV", power)


def gen_adjoint(g: OpGen) -> OpGen:
    """Formal adjoint of a generator."""
    k = g.kind
    if k == "B":
        return OpGen("BP", g.index)
    if k == "BP":
        return OpGen("B", g.index)
    if k == "Z":
        return OpGen("ZBAR", g.index)
    if k == "ZBAR":
        return OpGen("Z", g.index)
    if k == "FORM":
        return OpGen("FORM", 0, g.payload.adjoint())
    if k == "SCALAR":
        return OpGen("SCALAR", 0, g.payload.adjoint())
    if k in ("PROJ_L", "PROJ_N", "L0INV", "L", "L0"):
        return g
    raise ValueError(f"generator {g} has no first-slot adjoint")


def word_adjoint(word: Sequence[OpGen]) -> tuple:
    return tuple(gen_adjoint(g) for g in reversed(word))


def _check_var(frame: FormFrame, i: int):
    if not 1 <= i <= frame.n:
        raise IndexError(f"variable index {i} out of range 1..{frame.n}")


def apply(gen: OpGen, K: GaussKernel) -> GaussKernel:
    """Apply one generator to the first slot of ``K``."""
    frame = K.frame
    n = frame.n
    k = gen.kind
    if k == "B":
        _check_var(frame, gen.index)
        i = gen.index - 1
        return _map_spatial(K, lambda m, Jo: _sp_b(i, m))
    if k == "BP":
        _check_var(frame, gen.index)
        i = gen.index - 1
        return _map_spatial(K, lambda m, Jo: _sp_bplus(i, m))
    if k in ("Z", "ZBAR"):
        _check_var(frame, gen.index)
        pos = gen.index - 1 + (n if k == "ZBAR" else 0)
        return _map_spatial(K, lambda m, Jo: ((_bump(m, pos, 1), 0, _ONE),))
    if k == "PRIMED":
        hol, anti = gen.payload
        for i in hol + anti:
            _check_var(frame, i)
        add = make_mono(n, zp=hol, zbp=anti)
        return _map_spatial(K, lambda m, Jo: ((tuple(x + y for x, y in zip(m, add)), 0, _ONE),))
    if k == "FORM":
        return _form_left(K, gen.payload)
    if k == "SCALAR":
        return _left_coeff(K, gen.payload)
    if k == "PROJ_L":
        return project_L(K)
    if k == "PROJ_N":
        return project_N(K)
    if k == "L0INV":
        return l0_inverse(K, gen.index)
    if k == "L":
        return apply_L(K)
    if k == "L0":
        return apply_L0(K)
    raise ValueError(f"unknown generator kind {k!r}")


def apply_word(word: Sequence[OpGen], K: GaussKernel) -> GaussKernel:
    """Apply ``word[0] word[1] ... word[-1]`` to ``K`` (rightmost acts first)."""
    for g in reversed(tuple(word)):
        K = apply(g, K)
    return K


# ---------------------------------------------------------------------------
# Spectral normal form
# ---------------------------------------------------------------------------

class LadderNormalForm:
    """``sum c * b^alpha (z^beta * primed * P) * F[J_out, J_in]`` with b's outermost.

    Flat map ``(alpha, beta, primed, J_out, J_in, coeff_key) -> (re, im)``;
    ``primed`` is the 2n-exponent tuple of ``(z', zbar')``.
    """

    __slots__ = ("frame", "_t")

    def __init__(self, frame: FormFrame, t: dict):
        self.frame = frame
        self._t = t

    def terms(self):
        grouped: dict = {}
        for (al, be, pr, Jo, Ji, ck), v in self._t.items():
            grouped.setdefault((al, be, pr, Jo, Ji), {})[ck] = v
        for key in sorted(grouped):
            yield (CoeffElem._raw(grouped[key]),) + key

    def coefficient(self, alpha, beta, primed=None, Jo=(), Ji=()) -> CoeffElem:
        n = self.frame.n
        primed = tuple(primed) if primed is not None else (0,) * (2 * n)
        key = (tuple(alpha), tuple(beta), primed, tuple(Jo), tuple(Ji))
        return CoeffElem._raw({k[5]: v for k, v in self._t.items() if k[:5] == key})

    def L_eigenvalue(self, alpha) -> ExactScalar:
        """Eigenvalue of ``L`` on a level-alpha term: ``4 pi |alpha|``."""
        return ExactScalar(4 * sum(alpha), 0, 1)

    def L0_eigenvalue(self, alpha, Jo) -> ExactScalar:
        return ExactScalar(4 * (sum(alpha) + form_shift(self.frame, Jo)), 0, 1)

    def __eq__(self, other):
        return isinstance(other, LadderNormalForm) and self.frame == other.frame and self._t == other._t

    def __len__(self):
        return len(self._t)


def to_normal_form(K: GaussKernel) -> LadderNormalForm:
    n = K.frame.n
    acc: dict = {}
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        a, c, pz, pzb = _split(mono)
        for al, be, ep, pi, r in _nf_basic(n, a, c):
            primed = pz + tuple(x + y for x, y in zip(pzb, ep))
            _accumulate(acc, (al, be, primed, Jo, Ji, (ck[0] + pi, ck[1], ck[2])), re * r, im * r)
    return LadderNormalForm(K.frame, acc)


def from_normal_form(nf: LadderNormalForm) -> GaussKernel:
    n = nf.frame.n
    acc: dict = {}
    for (al, be, primed, Jo, Ji, ck), (re, im) in nf._t.items():
        for m2, pi, r in _expand_b(al, be):
            full = m2[: 2 * n] + tuple(x + y for x, y in zip(m2[2 * n :], primed))
            _accumulate(acc, (full, Jo, Ji, (ck[0] + pi, ck[1], ck[2])), re * r, im * r)
    return GaussKernel._raw(nf.frame, acc)


def l0_inverse(K: GaussKernel, power: int = 1) -> GaussKernel:
    """``L0^{-power} P^{N-perp} K``: divide level/form eigenvalues, drop zero ones."""
    frame = K.frame
    return _map_spatial(K, lambda m, Jo: _spectral_map(m, "l0inv", form_shift(frame, Jo), power))


def project_N(K: GaussKernel) -> GaussKernel:
    """Keep the level-0 part with output form on the determinant line."""
    det = K.frame.det
    kept = GaussKernel._raw(K.frame, {k: v for k, v in K._t.items() if k[1] == det})
    return project_L(kept)


def project_L(K: GaussKernel) -> GaussKernel:
    """Projection on the kernel of ``L`` (level 0), forms untouched."""
    return _map_spatial(K, lambda m, Jo: _spectral_map(m, "projL", 0, 0))


def apply_L(K: GaussKernel) -> GaussKernel:
    """Built-in ``L`` acting through the spectral decomposition."""
    return _map_spatial(K, lambda m, Jo: _spectral_map(m, "L", 0, 0))


def apply_L0(K: GaussKernel) -> GaussKernel:
    frame = K.frame
    return _map_spatial(K, lambda m, Jo: _spectral_map(m, "L", form_shift(frame, Jo), 0))


# ---------------------------------------------------------------------------
# Evaluation, integration, adjoints
# ---------------------------------------------------------------------------

def eval_first_zero(K: GaussKernel) -> GaussKernel:
    """Set ``z = zbar = 0``; the result only involves primed variables."""
    n2 = 2 * K.frame.n
    return GaussKernel._raw(K.frame, {k: v for k, v in K._t.items() if not any(k[0][:n2])})


def diagonal(K: GaussKernel) -> FormOperator:
    """Value at ``(0, 0)`` as a form matrix."""
    acc: dict = {}
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        if not any(mono):
            _accumulate(acc.setdefault((Jo, Ji), {}), ck, re, im)
    return FormOperator(K.frame.n, {k: CoeffElem._raw(v) for k, v in acc.items() if v})


@lru_cache(maxsize=None)
def _moment(a: tuple, b: tuple):
    """``int w^a wbar^b exp(-pi |w|^2)``: ``delta_ab a!/pi^|a|`` as (r, pi)."""
    if a != b:
        return None
    return Fraction(math.prod(math.factorial(x) for x in a)), -sum(a)


def integrate_against_P(K: GaussKernel) -> FormOperator:
    """``int K(0, W) P(W, 0) dW`` entrywise; ``K`` must be evaluated at first slot 0."""
    n = K.frame.n
    if K.has_unprimed():
        raise ValueError("integrate_against_P needs a kernel without unprimed variables; call eval_first_zero first")
    acc: dict = {}
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        mom = _moment(mono[2 * n : 3 * n], mono[3 * n :])
        if mom is None:
            continue
        r, dpi = mom
        _accumulate(acc.setdefault((Jo, Ji), {}), (ck[0] + dpi, ck[1], ck[2]), re * r, im * r)
    return FormOperator(n, {k: CoeffElem._raw(v) for k, v in acc.items() if v})


def kernel_adjoint(K: GaussKernel) -> GaussKernel:
    """``K*(Z, Z') = conj(K(Z', Z))^T``: z -> zbar', zbar -> z', forms transposed."""
    acc: dict = {}
    for (mono, Jo, Ji, ck), (re, im) in K._t.items():
        z, zb, zp, zbp = _split(mono)
        m2 = zbp + zp + zb + z
        word = tuple(s.adjoint() for s in reversed(ck[2]))
        _accumulate(acc, (m2, Ji, Jo, (ck[0], ck[1], word)), re, -im)
    return GaussKernel._raw(K.frame, acc)


def pair_integral(A: GaussKernel, Bk: GaussKernel) -> FormOperator:
    """``sum_b int A(0,W)[a,b] conj(Bk(0,W)[c,b]) exp(-pi|W|^2) dW`` as a matrix in (a, c).

    With ``A = (X P^N)(0, .)`` and ``Bk = (Y* P^N)(0, .)`` this is the value of
    ``X P^N Y`` at ``(0, 0)``.
    """
    if A.frame != Bk.frame:
        raise ValueError("frame mismatch in pair_integral")
    if A.has_unprimed() or Bk.has_unprimed():
        raise ValueError("pair_integral needs kernels evaluated at first slot 0")
    n = A.frame.n
    right: dict = {}
    for (mono, Jc, Jb, ck), (re, im) in Bk._t.items():
        word = tuple(s.adjoint() for s in reversed(ck[2]))
        # conj swaps z' and zbar' exponents
        right.setdefault(Jb, []).append((mono[3 * n :], mono[2 * n : 3 * n], Jc, (ck[0], ck[1], word), re, -im))
    acc: dict = {}
    for (mono, Ja, Jb, ck), (re, im) in A._t.items():
        hol, anti = mono[2 * n : 3 * n], mono[3 * n :]
        for h2, a2, Jc, ck2, re2, im2 in right.get(Jb, ()):
            mom = _moment(tuple(x + y for x, y in zip(hol, h2)), tuple(x + y for x, y in zip(anti, a2)))
            if mom is None:
                continue
            r, dpi = mom
            key = (ck[0] + ck2[0] + dpi, _merge_syms(ck[1], ck2[1]), ck[2] + ck2[2])
            _accumulate(acc.setdefault((Ja, Jc), {}), key, (re * re2 - im * im2) * r, (re * im2 + im * re2) * r)
    return FormOperator(n, {k: CoeffElem._raw(v) for k, v in acc.items() if v})


def l2_pairing(K1: GaussKernel, K2: GaussKernel) -> FormOperator:
    """``int K1(W, 0)^dagger K2(W, 0) dW`` via integrate_against_P.

    ``conj K1(W, 0)`` is ``K1*(0, W)``; ``K2(W, 0)`` is re-expressed in the
    second-slot variables and multiplied in before integrating.
    """
    n = K1.frame.n
    left = eval_first_zero(kernel_adjoint(K1))
    total = None
    for c, mono, Jo, Ji in eval_second_zero(K2).terms():
        z, zb, _, _ = _split(mono)
        hol = [i + 1 for i in range(n) for _ in range(z[i])]
        anti = [i + 1 for i in range(n) for _ in range(zb[i])]
        # right factor: form entry (Jo, Ji) with coefficient c, multiplied on the right
        piece = _right_multiply(apply(MulPrimed(hol, anti), left), Jo, Ji, c)
        total = piece if total is None else total + piece
    if total is None:
        return FormOperator.zero(n)
    return integrate_against_P(total)


def eval_second_zero(K: GaussKernel) -> GaussKernel:
    """Set ``z' = zbar' = 0``."""
    n2 = 2 * K.frame.n
    return GaussKernel._raw(K.frame, {k: v for k, v in K._t.items() if not any(k[0][n2:])})


def _right_multiply(K: GaussKernel, Jo: tuple, Ji: tuple, c: CoeffElem) -> GaussKernel:
    acc: dict = {}
    citems = list(c.raw_items())
    for (mono, Ja, Jb, ck), (re, im) in K._t.items():
        if Jb != Jo:
            continue
        for kc, (rc, ic) in citems:
            _accumulate(acc, (mono, Ja, Ji, _ckey_mul(ck, kc)), re * rc - im * ic, re * ic + im * rc)
    return GaussKernel._raw(K.frame, acc)
