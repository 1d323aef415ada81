"""Closed-form constants and the leading-coefficient target matrix."""

from __future__ import annotations

import math
from fractions import Fraction

from .coeff_algebra import ExactScalar
from .fock_forms import FormFrame, FormOperator, curvature_operator, degree_projector, det_projector

__all__ = ["b_const", "c_const", "leading_formula", "harmonic"]


def b_const(k: int, j: int, l: int) -> ExactScalar:
    """``1 / ((2k+l)(2(k+1)+l)...(2j+l))``, with the value 1 when ``j = 0``."""
    if min(k, j, l) < 0:
        raise ValueError("b_const needs non-negative indices")
    if j == 0:
        return ExactScalar(1)
    if k > j:
        raise ValueError(f"b_const needs k <= j, got k={k}, j={j}")
    prod = math.prod(2 * s + l for s in range(k, j + 1))
    if prod == 0:
        raise ValueError(f"b_const({k},{j},{l}) has a zero factor")
    return ExactScalar(Fraction(1, prod))


def c_const(m: int, k: int) -> ExactScalar:
    """``(4 pi)^{-m} / (2^k k!) / prod_{s=k+1}^{m} (2s+1)``."""
    if k > m or k < 0:
        raise ValueError(f"c_const needs 0 <= k <= m, got m={m}, k={k}")
    denom = 4**m * 2**k * math.factorial(k) * math.prod(2 * s + 1 for s in range(k + 1, m + 1))
    return ExactScalar(Fraction(1, denom), 0, -m)


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, l) for l in range(1, m + 1)), Fraction(0))


def leading_formula(n: int, q: int, j: int) -> FormOperator:
    """Closed form of the first non-vanishing coefficient on degree-2j forms.

    For ``2j >= q`` with ``m = j - q/2``::

        (4 pi)^{-(2j-q)} B_0^{1,m}^2  I_2j (R^perp)^m I_det (R^perp*)^m I_2j

    and for ``2j < q`` with ``m = q/2 - j`` the top block appears with the
    adjoint first: ``(R^top*)^m I_det (R^top)^m``.  Odd ``2j - q`` gives zero.
    """
    frame = FormFrame(n, q)
    if not 0 <= 2 * j <= n:
        return FormOperator.zero(n)
    if (2 * j - q) % 2:
        return FormOperator.zero(n)
    m = abs(2 * j - q) // 2
    I = degree_projector(n, 2 * j)
    if 2 * j >= q:
        up = curvature_operator(frame, "perp")
        down = up.adjoint()
    else:
        down = curvature_operator(frame, "top")
        up = down.adjoint()
    M = I
    for _ in range(m):
        M = M @ up
    M = M @ det_projector(frame)
    for _ in range(m):
        M = M @ down
    M = M @ I
    pref = ExactScalar(1, 0, -2 * m) * ExactScalar(Fraction(1, 4 ** (2 * m))) * b_const(1, m, 0) ** 2
    return M.scale(pref)
