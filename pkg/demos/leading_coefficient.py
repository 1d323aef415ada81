"""Leading coefficient of the expansion, computed two ways.

The resolvent engine enumerates every perturbation term, prunes the ones the
degree filtration kills, takes residues and evaluates them at (0, 0). The
closed form is a short product of curvature blocks and B-constants. Both are
exact, so they must agree symbol for symbol.
"""

from bergman_expansion.fock_forms import FormFrame
from bergman_expansion.formulas import leading_formula
from bergman_expansion.resolvent import assemble_Fr, can_contribute, curvature_registry, enumerate_terms

for n, q, j in [(2, 0, 1), (4, 2, 2), (4, 4, 1)]:
    frame = FormFrame(n, q)
    reg = curvature_registry(frame)
    r = abs(2 * j - q)
    terms = list(enumerate_terms(r))
    alive = sum(can_contribute(t, j, q, reg) for t in terms)
    engine = assemble_Fr(r, j, reg)
    closed = leading_formula(n, q, j)
    print(f"n={n} q={q} j={j} r={r}: {alive} of {len(terms)} terms survive pruning")
    print(engine.pretty())
    print("matches closed form:", engine == closed)
    print()

# one order lower the block vanishes identically
frame = FormFrame(2, 0)
print("below the leading order:", assemble_Fr(1, 1, curvature_registry(frame)).pretty())
