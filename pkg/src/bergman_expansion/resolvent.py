"""Resolvent expansion: terms, lambda series, residues and the coefficient matrix.

A resolvent term is a word

    L^{eta_1}(lam) O_{r_1} L^{eta_2}(lam) ... O_{r_k} L^{eta_{k+1}}(lam)

with ``L^N(lam) = P^N / lam`` and
``L^{Nperp}(lam) = -sum_{m>=0} lam^m L0^{-(m+1)} P^{Nperp}``.  Its contour
integral is the coefficient of ``lam^{-1}``.  The coefficient matrix
``F_{2r}(0,0)`` sums these residues over all compositions of ``2r`` and all
``eta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator, Sequence

from .coeff_algebra import CoeffElem, EndoSymbol, ExactScalar, ScalarSymbol
from .fock_forms import (
    FormFrame,
    FormOperator,
    contract_op,
    curvature_operator,
    degree_projector,
    det_projector,
    two_form_operator,
    wedge_op,
)
from .model_kernel import (
    B,
    Bplus,
    FormOp,
    GaussKernel,
    MulPrimed,
    MulZ,
    MulZbar,
    OpGen,
    ScalarCoeff,
    apply,
    apply_word,
    eval_first_zero,
    l0_inverse,
    pair_integral,
    project_N,
    word_adjoint,
)

__all__ = [
    "N",
    "NPERP",
    "OpExpr",
    "OperatorRegistry",
    "MissingOperatorError",
    "InsufficientOrderError",
    "ResolventTerm",
    "LaurentSeries",
    "compositions",
    "enumerate_terms",
    "can_contribute",
    "residue_words",
    "residue",
    "word_value",
    "assemble_Fr",
    "term_III0_prefactor",
    "leading_half_kernel",
    "curvature_registry",
    "generic_registry",
    "register_generic",
    "o1_prime",
    "o1_prime_pieces",
    "o1_double_prime",
    "o3_plus2",
]

N = "N"
NPERP = "Nperp"


class MissingOperatorError(KeyError):
    """A surviving term needs an operator order that is not registered."""


class InsufficientOrderError(ValueError):
    """A lambda series was truncated below the order a residue needs."""


# ---------------------------------------------------------------------------
# Operator expressions and the registry
# ---------------------------------------------------------------------------

class OpExpr:
    """Sum of generator words; coefficients enter as ScalarCoeff generators."""

    __slots__ = ("words",)

    def __init__(self, words: Iterable[Sequence[OpGen]] = ()):
        self.words = tuple(tuple(w) for w in words)

    @classmethod
    def term(cls, coeff, word: Sequence[OpGen]) -> "OpExpr":
        coeff = coeff if isinstance(coeff, CoeffElem) else CoeffElem.scalar(coeff)
        if coeff.is_zero:
            return cls()
        if coeff == CoeffElem.one():
            return cls([tuple(word)])
        return cls([(ScalarCoeff(coeff),) + tuple(word)])

    def __add__(self, other: "OpExpr") -> "OpExpr":
        return OpExpr(self.words + other.words)

    def __mul__(self, other: "OpExpr") -> "OpExpr":
        """Composition ``self ∘ other``."""
        return OpExpr(a + b for a in self.words for b in other.words)

    def adjoint(self) -> "OpExpr":
        return OpExpr(word_adjoint(w) for w in self.words)

    def apply(self, K: GaussKernel) -> GaussKernel:
        total = GaussKernel.zero(K.frame)
        for w in self.words:
            total = total + apply_word(w, K)
        return total

    @property
    def is_zero(self) -> bool:
        return not self.words

    def __len__(self):
        return len(self.words)

    def __repr__(self):
        return f"OpExpr({len(self.words)} words)"


class OperatorRegistry:
    """Graded pieces ``O_r^g`` of the model-operator expansion, ``g in {-2, 0, 2}``."""

    def __init__(self, frame: FormFrame):
        self.frame = frame
        self._ops: dict = {}
        self._orders: set = set()
        self._full_cache: dict = {}

    def register(self, order: int, grade: int, expr: OpExpr, with_adjoint: bool = False) -> "OperatorRegistry":
        """Register ``O_order^grade``; with ``with_adjoint`` also register its adjoint at ``-grade``."""
        if grade not in (-2, 0, 2):
            raise ValueError(f"grade must be -2, 0 or 2, got {grade}")
        if order < 1:
            raise ValueError(f"order must be positive, got {order}")
        self._orders.add(order)
        self._full_cache.pop(order, None)
        self._full_cache.pop(-order, None)
        if not expr.is_zero:
            self._ops[(order, grade)] = self._ops.get((order, grade), OpExpr()) + expr
        if with_adjoint and grade != 0:
            self.register(order, -grade, expr.adjoint())
        return self

    def register_zero(self, order: int) -> "OperatorRegistry":
        """Declare ``O_order = 0``."""
        self._orders.add(order)
        return self

    def has(self, order: int) -> bool:
        return order in self._orders

    def orders(self):
        return sorted(self._orders)

    def grades(self, order: int) -> tuple:
        return tuple(g for g in (-2, 0, 2) if (order, g) in self._ops)

    def get(self, order: int, grade: int) -> OpExpr:
        return self._ops.get((order, grade), OpExpr())

    def width(self, order: int) -> int:
        """Half the largest degree change of ``O_order``.

        Unregistered orders use the structural defaults: first order keeps
        the degree, higher orders change it by at most 2.
        """
        if order in self._orders:
            gs = self.grades(order)
            return max((abs(g) for g in gs), default=0) // 2
        return 0 if order == 1 else 1

    def full(self, order: int) -> OpExpr:
        if order not in self._orders:
            raise MissingOperatorError(f"O_{order} is not registered")
        if order not in self._full_cache:
            total = OpExpr()
            for g in (-2, 0, 2):
                total = total + self.get(order, g)
            self._full_cache[order] = total
        return self._full_cache[order]

    def full_adjoint(self, order: int) -> OpExpr:
        """Adjoint of :meth:`full`, cached (stored under the negated order)."""
        if -order not in self._full_cache:
            self._full_cache[-order] = self.full(order).adjoint()
        return self._full_cache[-order]


def curvature_registry(frame: FormFrame, grade0: OpExpr | None = None) -> OperatorRegistry:
    """Registry with ``O_2^{+2} = R``, ``O_2^{-2} = R*`` and optional ``O_2^0``."""
    reg = OperatorRegistry(frame)
    R = curvature_operator(frame, "full")
    reg.register(2, 2, OpExpr([(FormOp(R),)]), with_adjoint=True)
    if grade0 is not None:
        reg.register(2, 0, grade0)
    return reg


def _generic_grade0(frame: FormFrame, name: str) -> FormOperator:
    """``sum_{l,m} [name[l,m]] w^m ∧ i_l`` with generic symbols."""
    n, q = frame.n, frame.q
    total = FormOperator.zero(n)
    for l in range(1, n + 1):
        for m in range(1, n + 1):
            shift = ((m <= q) - (l <= q), (m > q) - (l > q))
            sym = EndoSymbol(f"{name}[{l},{m}]", shift, f"{name}*[{l},{m}]")
            total = total + (wedge_op(n, m) @ contract_op(n, l)).scale(CoeffElem.word(sym))
    return total


def generic_registry(frame: FormFrame, max_order: int, spatial: bool = False) -> OperatorRegistry:
    """Abstract graded operators at every order ``1..max_order``.

    ``O_1`` keeps the form degree; higher orders carry generic ``+2``, ``0``
    and ``-2`` parts (the ``-2`` part is the adjoint of the ``+2`` part).
    With ``spatial`` each piece also gets ladder factors, so the spectral
    machinery is exercised and not only the form sector.
    """
    reg = OperatorRegistry(frame)
    for r in range(1, max_order + 1):
        register_generic(reg, r, spatial)
    return reg


def register_generic(reg: OperatorRegistry, r: int, spatial: bool = False) -> OperatorRegistry:
    """Add generic graded pieces at order ``r`` (see :func:`generic_registry`)."""
    frame = reg.frame
    tails = [(), (MulZ(1),), (B(1),)] if spatial else [()]
    G0 = _generic_grade0(frame, f"g{r}o")
    reg.register(r, 0, OpExpr((FormOp(G0),) + t for t in tails))
    if r >= 2:
        Gp = two_form_operator(frame, f"g{r}p")
        reg.register(r, 2, OpExpr((FormOp(Gp),) + t for t in tails), with_adjoint=True)
    return reg


# Built-in first- and third-order operators -----------------------------------

def _t(kind: str, *idx) -> CoeffElem:
    return CoeffElem.symbol(ScalarSymbol(kind, idx))


def o1_prime(frame: FormFrame) -> OpExpr:
    """First-order operator from the derivative of the line-bundle curvature.

    Symbols: ``dRL_z(b, a, i)`` and ``dRL_zb(b, a, i)`` stand for the
    derivative along ``z_b`` (resp. ``zbar_b``) of ``R^L(d/dz_a, d/dzbar_i)``;
    ``dRLe_z(a)``, ``dRLe_zb(a)`` stand for the traced terms with one real
    frame slot.  Antisymmetry of ``R^L`` rewrites ``R^L(d/dzbar_a, d/dz_i)``
    as ``-R^L(d/dz_i, d/dzbar_a)``.
    """
    n = frame.n
    third = Fraction(1, 3)
    expr = OpExpr()
    rng = range(1, n + 1)
    for a in rng:
        for b in rng:
            for i in rng:
                # -(2/3) phi(d/dz_i) b+_i with phi(d/dz_i) = -T_z(b,i,a) zbar_a z_b - T_zb(b,i,a) zbar_a zbar_b
                expr += OpExpr.term(_t("dRL_z", b, i, a) * (2 * third), (MulZbar(a), MulZ(b), Bplus(i)))
                expr += OpExpr.term(_t("dRL_zb", b, i, a) * (2 * third), (MulZbar(a), MulZbar(b), Bplus(i)))
                # +(2/3) phi(d/dzbar_i) b_i
                expr += OpExpr.term(_t("dRL_z", b, a, i) * (2 * third), (MulZ(a), MulZ(b), B(i)))
                expr += OpExpr.term(_t("dRL_zb", b, a, i) * (2 * third), (MulZ(a), MulZbar(b), B(i)))
    for a in rng:
        expr += OpExpr.term(_t("dRLe_z", a) * (-third), (MulZ(a),))
        expr += OpExpr.term(_t("dRLe_zb", a) * (-third), (MulZbar(a),))
    return expr


def o1_prime_pieces(frame: FormFrame) -> dict:
    """Normal-ordered pieces ``A1..A5`` summing to :func:`o1_prime`.

    ``A5`` collects the combination ``zbar_r - b_r/(2 pi) - zbar'_r`` which
    annihilates ``P``; the others are written with ``b`` outermost.
    """
    n = frame.n
    rng = range(1, n + 1)
    c = lambda x, p=0: CoeffElem.scalar(ExactScalar.of(Fraction(x), p))
    A = {k: OpExpr() for k in ("A1", "A2", "A3", "A4", "A5")}

    def residual(r):
        return [
            (c(1), (MulZbar(r),)),
            (c(Fraction(-1, 2), -1), (B(r),)),
            (c(-1), (MulPrimed(anti=(r,)),)),
        ]

    for a in rng:
        for b in rng:
            for i in rng:
                A["A1"] += OpExpr.term(_t("dRL_z", b, i, a) * Fraction(2, 3), (MulZbar(a), MulZ(b), Bplus(i)))
                A["A1"] += OpExpr.term(_t("dRL_zb", b, i, a) * Fraction(2, 3), (MulZbar(a), MulZbar(b), Bplus(i)))
    for jp in rng:
        coeff = _t("dRLe_z", jp) * Fraction(-1, 3)
        for a in rng:
            coeff = coeff + _t("dRL_z", jp, a, a) * Fraction(4, 3) + _t("dRL_z", a, jp, a) * Fraction(4, 3)
        A["A2"] += OpExpr.term(coeff, (MulZ(jp),))
    for r in rng:
        coeff = _t("dRLe_zb", r) * Fraction(-1, 3)
        for l in rng:
            coeff = coeff + _t("dRL_zb", r, l, l) * Fraction(4, 3)
        A["A2"] += OpExpr.term(coeff, (MulPrimed(anti=(r,)),))
    for a in rng:
        coeff = _t("dRLe_zb", a) * c(Fraction(-1, 6), -1)
        for r in rng:
            coeff = coeff + (_t("dRL_zb", r, r, a) + _t("dRL_zb", a, r, r)) * c(Fraction(2, 3), -1)
        A["A3"] += OpExpr.term(coeff, (B(a),))
    for r in rng:
        for a in rng:
            for l in rng:
                A["A3"] += OpExpr.term(_t("dRL_zb", r, a, l) * Fraction(2, 3), (B(l), MulZ(a), MulPrimed(anti=(r,))))
                A["A4"] += OpExpr.term(_t("dRL_zb", r, a, l) * c(Fraction(1, 3), -1), (B(l), B(r), MulZ(a)))
                for cf, w in residual(r):
                    A["A5"] += OpExpr.term(_t("dRL_zb", r, a, l) * Fraction(2, 3) * cf, (B(l), MulZ(a)) + w)
                    if a == l:
                        A["A5"] += OpExpr.term(_t("dRL_zb", r, a, l) * Fraction(4, 3) * cf, w)
        for cf, w in residual(r):
            A["A5"] += OpExpr.term(_t("dRLe_zb", r) * Fraction(-1, 3) * cf, w)
    for b in rng:
        for a in rng:
            for i in rng:
                A["A3"] += OpExpr.term(_t("dRL_z", b, a, i) * Fraction(2, 3), (B(i), MulZ(a), MulZ(b)))
    return A


def o1_double_prime(frame: FormFrame) -> OpExpr:
    """First-order form-sector operator from the derivative of the splitting.

    ``-4 pi i sum_s [z_s Phi_s + zbar_s Phibar_s]`` where ``Phi_s`` has
    components ``dJ{s}[l,m] w^m ∧ i_l`` over index pairs in different blocks.
    """
    n, q = frame.n, frame.q
    expr = OpExpr()
    pref = CoeffElem.scalar(ExactScalar(0, -4, 1))
    for s in range(1, n + 1):
        for name, mul in ((f"dJ{s}", MulZ(s)), (f"dJb{s}", MulZbar(s))):
            F = FormOperator.zero(n)
            for l in range(1, n + 1):
                for m in range(1, n + 1):
                    if (l <= q) == (m <= q):
                        continue
                    shift = ((m <= q) - (l <= q), (m > q) - (l > q))
                    sym = EndoSymbol(f"{name}[{l},{m}]", shift, f"{name}*[{l},{m}]")
                    F = F + (wedge_op(n, m) @ contract_op(n, l)).scale(CoeffElem.word(sym))
            expr += OpExpr.term(pref, (mul, FormOp(F)))
    return expr


def o3_plus2(frame: FormFrame) -> OpExpr:
    """``z_j dR/dz_j(0) + zbar_j dR/dzbar_j(0)`` with two-form symbols ``dRz{j}``, ``dRzb{j}``."""
    expr = OpExpr()
    for j in range(1, frame.n + 1):
        expr += OpExpr([(MulZ(j), FormOp(two_form_operator(frame, f"dRz{j}")))])
        expr += OpExpr([(MulZbar(j), FormOp(two_form_operator(frame, f"dRzb{j}")))])
    return expr


# ---------------------------------------------------------------------------
# Terms and pruning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolventTerm:
    r_vec: tuple
    eta: tuple

    def __post_init__(self):
        object.__setattr__(self, "r_vec", tuple(int(x) for x in self.r_vec))
        object.__setattr__(self, "eta", tuple(self.eta))
        if any(x < 1 for x in self.r_vec):
            raise ValueError(f"composition parts must be >= 1: {self.r_vec}")
        if len(self.eta) != len(self.r_vec) + 1:
            raise ValueError("eta must have one more entry than r_vec")
        if any(e not in (N, NPERP) for e in self.eta):
            raise ValueError(f"eta entries must be {N!r} or {NPERP!r}: {self.eta}")

    @property
    def r(self) -> Fraction:
        return Fraction(sum(self.r_vec), 2)

    @property
    def pole_order(self) -> int:
        return sum(1 for e in self.eta if e == N)

    def __str__(self):
        return f"r_vec={self.r_vec} eta={''.join('N' if e == N else '_' for e in self.eta)}"


def compositions(total: int) -> Iterator[tuple]:
    """Compositions of ``total`` into positive parts, lexicographic order."""
    if total == 0:
        yield ()
        return
    for first in range(1, total + 1):
        for rest in compositions(total - first):
            yield (first,) + rest


def enumerate_terms(r: int) -> Iterator[ResolventTerm]:
    """All terms with ``sum r_i = 2r``, compositions then eta lexicographically."""
    for rv in compositions(2 * r):
        for eta in product((N, NPERP), repeat=len(rv) + 1):
            yield ResolventTerm(rv, eta)


def can_contribute(term: ResolventTerm, j: int, q: int, registry: OperatorRegistry | None = None) -> bool:
    """False when degree counting proves ``I_2j T I_2j`` vanishes.

    For each ``P^N`` factor at position ``i0`` the form degree there is ``q``;
    the operators on its right must bridge ``2j -> q`` and those on its left
    ``q -> 2j``, each operator moving the degree by at most twice its width.
    """
    positions = [i for i, e in enumerate(term.eta) if e == N]
    if not positions:
        return False
    if registry is not None:
        widths = [registry.width(r) for r in term.r_vec]
    else:
        widths = [0 if r == 1 else 1 for r in term.r_vec]
    gap = abs(2 * j - q)
    for i0 in positions:
        left = sum(widths[:i0])
        right = sum(widths[i0:])
        if gap > 2 * right or gap > 2 * left:
            return False
    return True


# ---------------------------------------------------------------------------
# Lambda series
# ---------------------------------------------------------------------------

class LaurentSeries:
    """Truncated Laurent series in ``lam`` with operator-word coefficients.

    Coefficients map a word (tuple of tokens ``("O", r)``, ``("PN",)``,
    ``("L0INV", p)``) to an integer.  ``order`` is the largest exponent whose
    coefficient is known; ``None`` means the series is exact.
    """

    __slots__ = ("coeffs", "order")

    def __init__(self, coeffs: dict, order: int | None):
        self.coeffs = {e: {w: c for w, c in d.items() if c} for e, d in coeffs.items()}
        self.coeffs = {e: d for e, d in self.coeffs.items() if d}
        self.order = order

    @classmethod
    def pole(cls) -> "LaurentSeries":
        return cls({-1: {(("PN",),): 1}}, None)

    @classmethod
    def regular(cls, truncation: int) -> "LaurentSeries":
        """``-sum_{m=0}^{t} lam^m L0^{-(m+1)} P^{Nperp}``, known through ``lam^t``."""
        return cls({m: {(("L0INV", m + 1),): -1} for m in range(truncation + 1)}, truncation)

    @classmethod
    def operator(cls, r: int) -> "LaurentSeries":
        return cls({0: {(("O", r),): 1}}, None)

    @property
    def low(self) -> int:
        return min(self.coeffs, default=0)

    def __mul__(self, other: "LaurentSeries") -> "LaurentSeries":
        la, lb = self.low, other.low
        bounds = []
        if self.order is not None:
            bounds.append(self.order + lb)
        if other.order is not None:
            bounds.append(other.order + la)
        order = min(bounds) if bounds else None
        out: dict = {}
        for ea, da in self.coeffs.items():
            for eb, db in other.coeffs.items():
                e = ea + eb
                if order is not None and e > order:
                    continue
                bucket = out.setdefault(e, {})
                for wa, ca in da.items():
                    for wb, cb in db.items():
                        w = wa + wb
                        bucket[w] = bucket.get(w, 0) + ca * cb
        return LaurentSeries(out, order)

    def coefficient(self, exponent: int) -> dict:
        if self.order is not None and exponent > self.order:
            raise InsufficientOrderError(
                f"coefficient of lam^{exponent} requested but the series is only known through lam^{self.order}"
            )
        return dict(self.coeffs.get(exponent, {}))


def residue_words(term: ResolventTerm, truncation: int | None = None) -> dict:
    """Words and integer weights of the ``lam^{-1}`` coefficient of ``term``.

    ``truncation`` is the order kept in each regular factor; the default is
    the minimum ``pole_order - 1``; less raises InsufficientOrderError.
    """
    m = term.pole_order
    if truncation is None:
        truncation = max(m - 1, 0)
    series = LaurentSeries({0: {(): 1}}, None)
    factors = []
    for idx, e in enumerate(term.eta):
        factors.append(LaurentSeries.pole() if e == N else LaurentSeries.regular(truncation))
        if idx < len(term.r_vec):
            factors.append(LaurentSeries.operator(term.r_vec[idx]))
    for f in factors:
        series = series * f
    return series.coefficient(-1)


def _apply_token(tok: tuple, K: GaussKernel, reg: OperatorRegistry, adjoint: bool = False) -> GaussKernel:
    kind = tok[0]
    if kind == "PN":
        return project_N(K)
    if kind == "L0INV":
        return l0_inverse(K, tok[1])
    if kind == "O":
        expr = reg.full_adjoint(tok[1]) if adjoint else reg.full(tok[1])
        return expr.apply(K)
    raise ValueError(f"unknown token {tok!r}")


def residue(term: ResolventTerm, reg: OperatorRegistry, applied_to: GaussKernel, truncation: int | None = None) -> GaussKernel:
    """The residue operator of ``term`` applied to a kernel."""
    total = GaussKernel.zero(applied_to.frame)
    for word, c in sorted(residue_words(term, truncation).items()):
        K = applied_to
        for tok in reversed(word):
            K = _apply_token(tok, K, reg)
        total = total + K.scale(c)
    return total


class _WordEvaluator:
    """Value at ``(0,0)`` of ``I_2j * word * I_2j`` with shared-prefix caching."""

    def __init__(self, reg: OperatorRegistry, frame: FormFrame, j: int):
        self.reg = reg
        self.frame = frame
        self.I = degree_projector(frame.n, 2 * j)
        self.base = GaussKernel.projection(frame, "det")
        self._left: dict = {(): self.base}
        self._right: dict = {(): self.base}
        self._adjoints: dict = {}

    def left(self, X: tuple) -> GaussKernel:
        """Kernel of ``X P^N``."""
        if X not in self._left:
            self._left[X] = _apply_token(X[0], self.left(X[1:]), self.reg)
        return self._left[X]

    def right(self, Y: tuple) -> GaussKernel:
        """Kernel of ``Y* P^N``."""
        if Y not in self._right:
            self._right[Y] = _apply_token(Y[-1], self.right(Y[:-1]), self.reg, adjoint=True)
        return self._right[Y]

    def value(self, word: tuple) -> FormOperator:
        k = word.index(("PN",))
        A = eval_first_zero(apply(FormOp(self.I), self.left(word[:k])))
        Bk = eval_first_zero(apply(FormOp(self.I), self.right(word[k + 1 :])))
        return pair_integral(A, Bk)


def word_value(word: tuple, reg: OperatorRegistry, frame: FormFrame, j: int) -> FormOperator:
    """``(I_2j word I_2j)(0,0)`` for a residue word containing ``P^N``."""
    return _WordEvaluator(reg, frame, j).value(tuple(word))


def assemble_Fr(
    r: int,
    j: int,
    reg: OperatorRegistry,
    frame: FormFrame | None = None,
    prune: bool = True,
    terms: Iterable[ResolventTerm] | None = None,
) -> FormOperator:
    """``I_2j F_2r(0,0) I_2j`` as an exact matrix over the degree-2j block."""
    frame = frame or reg.frame
    if not 0 <= 2 * j <= frame.n:
        raise ValueError(f"degree 2j={2 * j} outside 0..{frame.n}")
    weights: dict = {}
    for term in terms if terms is not None else enumerate_terms(r):
        if prune and not can_contribute(term, j, frame.q, reg):
            continue
        for ri in term.r_vec:
            if not reg.has(ri):
                raise MissingOperatorError(f"O_{ri} needed by term {term} is not registered")
        for w, c in residue_words(term).items():
            weights[w] = weights.get(w, 0) + c
    ev = _WordEvaluator(reg, frame, j)
    total = FormOperator.zero(frame.n)
    for w in sorted(weights):
        c = weights[w]
        if c:
            total = total + ev.value(w).scale(ExactScalar.of(c))
    return total


def leading_half_kernel(reg: OperatorRegistry, j: int) -> GaussKernel:
    """``I_2j (L0^{-1} O_2)^m P^N`` with ``m = |j - q/2|``: the half of the leading term."""
    frame = reg.frame
    m2 = abs(2 * j - frame.q)
    if m2 % 2:
        raise ValueError("2j - q must be even")
    K = GaussKernel.projection(frame, "det")
    O2 = reg.full(2)
    for _ in range(m2 // 2):
        K = l0_inverse(O2.apply(K), 1)
    return apply(FormOp(degree_projector(frame.n, 2 * j)), K)


def term_III0_prefactor(j: int, q: int) -> CoeffElem:
    """Scalar prefactor of ``R^m S R*^m`` in the double-P^N resolvent term.

    Runs the term with ``m = j - q/2`` raising steps on each side and the
    two ``P^N`` factors around a degree-preserving symbol ``S``, on the
    smallest frame that holds the degree ``2j`` forms.
    """
    if q % 2 or 2 * j < q:
        raise ValueError("need q even and j >= q/2")
    m = j - q // 2
    if m == 0:
        return CoeffElem.zero()
    frame = FormFrame(q + 2 * m, q)
    S = EndoSymbol("S", (0, 0), "S")
    reg = curvature_registry(frame, grade0=OpExpr([(ScalarCoeff(CoeffElem.word(S)),)]))
    eta = tuple(N if i in (m, m + 1) else NPERP for i in range(2 * m + 2))
    term = ResolventTerm((2,) * (2 * m + 1), eta)
    value = assemble_Fr(m, j, reg, frame, prune=False, terms=[term])
    n = frame.n
    R = curvature_operator(frame, "perp")
    I = degree_projector(n, 2 * j)
    target = I
    for _ in range(m):
        target = target @ R
    target = target @ det_projector(frame).scale(CoeffElem.word(S))
    for _ in range(m):
        target = target @ R.adjoint()
    target = target @ I
    return _scalar_ratio(value, target)


def _scalar_ratio(value: FormOperator, target: FormOperator) -> CoeffElem:
    """The scalar ``s`` with ``value = s * target``; raises if none exists."""
    if value.is_zero:
        return CoeffElem.zero()
    (key, tc), = target.entries()[:1]
    (pi, syms, word), (re, im) = next(iter(tc.raw_items()))
    vc = value[key]
    found = None
    for (p2, s2, w2), (r2, i2) in vc.raw_items():
        if s2 == syms and w2 == word:
            found = ExactScalar(r2, i2, p2) / ExactScalar(re, im, pi)
            break
    if found is None or target.scale(found) != value:
        raise ValueError("value is not a scalar multiple of the target structure")
    return CoeffElem.scalar(found)
