"""Exact coefficients.

A coefficient is a finite sum of terms

    (a + b i) * pi**k * s_1 s_2 ... * E_1 E_2 ...

with ``a, b`` rational, ``k`` an integer, ``s_*`` commuting
:class:`ScalarSymbol` placeholders and ``E_*`` a free word of
noncommuting :class:`EndoSymbol` placeholders.  Nothing is ever rounded:
``pi`` is a formal transcendental carried as an exponent.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

__all__ = [
    "AdjointError",
    "ExactScalar",
    "ScalarSymbol",
    "EndoSymbol",
    "CoeffElem",
    "coeff_mul",
    "coeff_adjoint",
]


class AdjointError(ValueError):
    """Raised when an EndoSymbol without an adjoint partner is adjointed."""


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class ExactScalar:
    """Gaussian rational times a power of pi: ``(re + im*i) * pi**pi_power``."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)
    pi_power: int = 0

    def __post_init__(self):
        re, im = _frac(self.re), _frac(self.im)
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)
        if re == 0 and im == 0:
            object.__setattr__(self, "pi_power", 0)
        else:
            object.__setattr__(self, "pi_power", int(self.pi_power))

    @classmethod
    def of(cls, value, pi_power: int = 0) -> "ExactScalar":
        """Build from an int, Fraction, string like ``"3/4"`` or complex of ints."""
        if isinstance(value, ExactScalar):
            return cls(value.re, value.im, value.pi_power + pi_power)
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag), pi_power)
        return cls(Fraction(value), Fraction(0), pi_power)

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def conjugate(self) -> "ExactScalar":
        return ExactScalar(self.re, -self.im, self.pi_power)

    def __neg__(self):
        return ExactScalar(-self.re, -self.im, self.pi_power)

    def __mul__(self, other):
        if not isinstance(other, ExactScalar):
            other = ExactScalar.of(other)
        return ExactScalar(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
            self.pi_power + other.pi_power,
        )

    __rmul__ = __mul__

    def inverse(self) -> "ExactScalar":
        norm = self.re * self.re + self.im * self.im
        if norm == 0:
            raise ZeroDivisionError("inverse of zero ExactScalar")
        return ExactScalar(self.re / norm, -self.im / norm, -self.pi_power)

    def __truediv__(self, other):
        if not isinstance(other, ExactScalar):
            other = ExactScalar.of(other)
        return self * other.inverse()

    def __pow__(self, k: int):
        out = ExactScalar(1)
        base = self if k >= 0 else self.inverse()
        for _ in range(abs(k)):
            out = out * base
        return out

    def __add__(self, other):
        if not isinstance(other, ExactScalar):
            other = ExactScalar.of(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.pi_power != other.pi_power:
            raise ValueError("cannot add ExactScalars with different pi powers; use CoeffElem")
        return ExactScalar(self.re + other.re, self.im + other.im, self.pi_power)

    def __sub__(self, other):
        return self + (-ExactScalar.of(other) if not isinstance(other, ExactScalar) else -other)

    def to_complex(self) -> complex:
        """Numeric value with pi substituted (for oracles only)."""
        import math

        return complex(float(self.re), float(self.im)) * math.pi**self.pi_power

    def __str__(self):
        return _format_scalar(self.re, self.im, self.pi_power)


def _format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _format_scalar(re: Fraction, im: Fraction, pi_power: int) -> str:
    if re == 0 and im == 0:
        return "0"
    if im == 0:
        num = _format_rational(re)
    elif re == 0:
        num = "i" if im == 1 else "-i" if im == -1 else f"{_format_rational(im)}i"
    else:
        num = f"({_format_rational(re)}{'+' if im > 0 else '-'}{_format_rational(abs(im))}i)"
    if pi_power == 0:
        return num
    return f"{num}*pi^{pi_power}"


@dataclass(frozen=True, order=True)
class ScalarSymbol:
    """Commuting real placeholder, e.g. a curvature-derivative component."""

    name: str
    indices: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __str__(self):
        if not self.indices:
            return self.name
        return f"{self.name}({','.join(map(str, self.indices))})"


@dataclass(frozen=True)
class EndoSymbol:
    """Noncommuting endomorphism placeholder with a form-degree tag.

    ``degree_shift`` is the (top, bottom) change in form degree carried by
    the form component this symbol multiplies.  ``adjoint_name`` names the
    adjoint partner; the partner carries the negated shift.  A self-adjoint
    symbol names itself.
    """

    name: str
    degree_shift: tuple = (0, 0)
    adjoint_name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "degree_shift", tuple(int(d) for d in self.degree_shift))
        if self.adjoint_name == self.name and self.degree_shift != (0, 0):
            raise ValueError(f"self-adjoint EndoSymbol {self.name!r} must have zero degree shift")

    def adjoint(self) -> "EndoSymbol":
        if self.adjoint_name is None:
            raise AdjointError(f"EndoSymbol {self.name!r} has no registered adjoint partner")
        a, b = self.degree_shift
        return EndoSymbol(self.adjoint_name, (-a, -b), self.name)

    @classmethod
    def pair(cls, name: str, degree_shift=(0, 0), adjoint_name: str | None = None):
        """Return ``(sym, sym*)``; the default adjoint name appends ``*``."""
        adjoint_name = adjoint_name or f"{name}*"
        sym = cls(name, degree_shift, adjoint_name)
        return sym, sym.adjoint()

    @property
    def sort_key(self):
        return (self.name, self.degree_shift, self.adjoint_name or "")

    def __str__(self):
        return self.name


# A term key is (pi_power, sorted scalar symbols, endo word); values are
# Gaussian rationals stored as a pair (re, im).
_ONE = Fraction(1)
_ZERO = Fraction(0)


def _term_sort_key(key):
    pi, syms, word = key
    return (len(word), tuple(s.sort_key for s in word), syms, pi)


def _merge_syms(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(a + b))


class CoeffElem:
    """Immutable canonical sum of coefficient terms.

    Build with :meth:`scalar`, :meth:`symbol`, :meth:`word`, or arithmetic.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | None = None):
        clean = {}
        if terms:
            for key, (re, im) in terms.items():
                if re != 0 or im != 0:
                    clean[key] = (re, im)
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "CoeffElem":
        """Wrap a dict already free of zero values (no copy)."""
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    # --- constructors -------------------------------------------------
    @classmethod
    def zero(cls) -> "CoeffElem":
        return cls._raw({})

    @classmethod
    def one(cls) -> "CoeffElem":
        return cls.scalar(1)

    @classmethod
    def scalar(cls, value, pi_power: int = 0) -> "CoeffElem":
        s = ExactScalar.of(value, pi_power)
        if s.is_zero:
            return cls.zero()
        return cls._raw({(s.pi_power, (), ()): (s.re, s.im)})

    @classmethod
    def symbol(cls, sym: ScalarSymbol) -> "CoeffElem":
        return cls._raw({(0, (sym,), ()): (_ONE, _ZERO)})

    @classmethod
    def word(cls, *syms: EndoSymbol) -> "CoeffElem":
        return cls._raw({(0, (), tuple(syms)): (_ONE, _ZERO)})

    @classmethod
    def from_terms(cls, items: Iterable) -> "CoeffElem":
        """Sum of ``(ExactScalar, scalar symbols, endo word)`` triples."""
        acc: dict = {}
        for s, syms, word in items:
            s = ExactScalar.of(s)
            if s.is_zero:
                continue
            _accumulate(acc, (s.pi_power, tuple(sorted(syms)), tuple(word)), s.re, s.im)
        return cls._raw(acc)

    # --- inspection ---------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def terms(self) -> Iterator[tuple[ExactScalar, tuple, tuple]]:
        """Yield ``(scalar, scalar_symbols, word)`` in canonical order."""
        for key in sorted(self._terms, key=_term_sort_key):
            (re, im) = self._terms[key]
            pi, syms, word = key
            yield ExactScalar(re, im, pi), syms, word

    def raw_items(self):
        return self._terms.items()

    def words(self) -> set:
        return {key[2] for key in self._terms}

    def as_scalar(self) -> ExactScalar:
        """Return the single scalar if this element has no symbols, else raise."""
        if not self._terms:
            return ExactScalar()
        if len(self._terms) != 1:
            raise ValueError(f"not a single scalar: {self}")
        (pi, syms, word), (re, im) = next(iter(self._terms.items()))
        if syms or word:
            raise ValueError(f"not a pure scalar: {self}")
        return ExactScalar(re, im, pi)

    # --- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        acc = dict(self._terms)
        for key, (re, im) in other._terms.items():
            _accumulate(acc, key, re, im)
        return CoeffElem._raw(acc)

    __radd__ = __add__

    def __neg__(self):
        return CoeffElem._raw({k: (-re, -im) for k, (re, im) in self._terms.items()})

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        if isinstance(other, ExactScalar):
            return self.scale(other)
        if isinstance(other, (int, Fraction)):
            return self.scale(ExactScalar.of(other))
        return coeff_mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, (ExactScalar, int, Fraction)):
            return self.__mul__(other)
        return coeff_mul(_lift(other), self)

    def scale(self, s: ExactScalar) -> "CoeffElem":
        if s.is_zero:
            return CoeffElem.zero()
        sr, si, sp = s.re, s.im, s.pi_power
        out = {}
        for (pi, syms, word), (re, im) in self._terms.items():
            out[(pi + sp, syms, word)] = (re * sr - im * si, re * si + im * sr)
        return CoeffElem._raw(out)

    def adjoint(self) -> "CoeffElem":
        return coeff_adjoint(self)

    # --- equality -----------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction, ExactScalar)):
            other = _lift(other)
        if not isinstance(other, CoeffElem):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for s, syms, word in self.terms():
            factors = [str(x) for x in syms]
            if word:
                factors.append("[" + ",".join(map(str, word)) + "]")
            head = str(s)
            if factors and head == "1":
                parts.append("*".join(factors))
            elif factors and head == "-1":
                parts.append("-" + "*".join(factors))
            else:
                parts.append("*".join([head] + factors))
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"CoeffElem({self})"


def _accumulate(acc: dict, key, re, im):
    old = acc.get(key)
    if old is not None:
        re, im = old[0] + re, old[1] + im
    if re == 0 and im == 0:
        acc.pop(key, None)
    else:
        acc[key] = (re, im)


def _lift(x) -> CoeffElem:
    if isinstance(x, CoeffElem):
        return x
    if isinstance(x, ExactScalar):
        return CoeffElem.scalar(x)
    if isinstance(x, (int, Fraction)):
        return CoeffElem.scalar(x)
    if isinstance(x, ScalarSymbol):
        return CoeffElem.symbol(x)
    if isinstance(x, EndoSymbol):
        return CoeffElem.word(x)
    raise TypeError(f"cannot interpret {x!r} as a coefficient")


def coeff_mul(a: CoeffElem, b: CoeffElem) -> CoeffElem:
    """Product: scalars multiply, symbol multisets merge, words concatenate."""
    a, b = _lift(a), _lift(b)
    acc: dict = {}
    for (pa, sa, wa), (ra, ia) in a._terms.items():
        for (pb, sb, wb), (rb, ib) in b._terms.items():
            _accumulate(acc, (pa + pb, _merge_syms(sa, sb), wa + wb), ra * rb - ia * ib, ra * ib + ia * rb)
    return CoeffElem._raw(acc)


def coeff_adjoint(a: CoeffElem) -> CoeffElem:
    """Conjugate scalars, reverse words and swap each symbol for its adjoint."""
    a = _lift(a)
    acc: dict = {}
    for (pi, syms, word), (re, im) in a._terms.items():
        adj_word = tuple(s.adjoint() for s in reversed(word))
        _accumulate(acc, (pi, syms, adj_word), re, -im)
    return CoeffElem._raw(acc)
