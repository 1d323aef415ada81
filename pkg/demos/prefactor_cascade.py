"""How the 1/((4 pi)^m 2^m m!) prefactor builds up.

Each factor L0^{-1} R-perp lifts the determinant line by two form degrees, and
L0^{-1} divides by the eigenvalue it lands on. Printing the half kernel after
each step shows the scalar accumulating.
"""

from bergman_expansion.fock_forms import FormFrame
from bergman_expansion.formulas import c_const, harmonic
from bergman_expansion.model_kernel import eval_first_zero
from bergman_expansion.resolvent import curvature_registry, leading_half_kernel, term_III0_prefactor

for m in (1, 2, 3):
    frame = FormFrame(2 * m, 0)
    half = leading_half_kernel(curvature_registry(frame), m)
    print(f"m={m}: C_m(m) = {c_const(m, m)}")
    print("   half kernel at the origin:", eval_first_zero(half).pretty()[:200])

for m in (1, 2):
    print(f"harmonic sum H_{m} = {harmonic(m)}, III0 prefactor = {term_III0_prefactor(m, 0)}")
