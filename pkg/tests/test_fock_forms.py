import pytest

from bergman_expansion.coeff_algebra import CoeffElem, ExactScalar
from bergman_expansion.fock_forms import (
    FormElem,
    FormFrame,
    FormOperator,
    all_bases,
    contract,
    contract_op,
    curvature_operator,
    d_bot,
    d_top,
    degree_projector,
    det_projector,
    form_shift,
    omega_d,
    project_degree,
    project_det,
    symbol_action,
    wedge,
    wedge_op,
)


def basis(n, *J):
    return FormElem.basis(n, J)


def test_frame_validation():
    with pytest.raises(ValueError):
        FormFrame(2, 3)
    with pytest.raises(ValueError):
        FormFrame(0, 0)
    assert FormFrame(4, 2).det == (1, 2)


def test_wedge_examples():
    assert wedge(1, basis(3)) == basis(3, 1)
    assert wedge(1, basis(3, 1)).is_zero
    assert wedge(2, basis(3, 1, 3)) == FormElem(3, {(1, 2, 3): -1})


def test_contract_examples():
    assert contract(1, basis(2, 1)) == basis(2)
    assert contract(2, basis(2, 1, 2)) == FormElem(2, {(1,): -1})
    assert contract(3, basis(3, 1, 2)).is_zero


def test_index_out_of_range():
    with pytest.raises(IndexError):
        wedge(4, basis(3))
    with pytest.raises(IndexError):
        contract(0, basis(3))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_anticommutation(n):
    for J in all_bases(n):
        x = FormElem.basis(n, J)
        for l in range(1, n + 1):
            assert contract(l, wedge(l, x)) + wedge(l, contract(l, x)) == x
            for m in range(1, n + 1):
                assert wedge(l, wedge(m, x)) == -wedge(m, wedge(l, x))
                assert contract(l, contract(m, x)) == -contract(m, contract(l, x))
                if l != m:
                    assert contract(l, wedge(m, x)) == -wedge(m, contract(l, x))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_wedge_adjoint_is_contract(n):
    for l in range(1, n + 1):
        assert wedge_op(n, l).adjoint() == contract_op(n, l)
        W = wedge_op(n, l)
        C = contract_op(n, l)
        for I in all_bases(n):
            for J in all_bases(n):
                assert W[(I, J)] == C[(J, I)]


def test_operator_matches_elementwise_action():
    n = 3
    for J in all_bases(n):
        x = FormElem.basis(n, J)
        assert wedge_op(n, 2)(x) == wedge(2, x)
        assert contract_op(n, 3)(x) == contract(3, x)


@pytest.mark.parametrize(
    "n,q,J,value",
    [(2, 2, (1, 2), 0), (2, 1, (), -2), (2, 0, (1,), -2)],
)
def test_omega_examples(n, q, J, value):
    w = omega_d(FormFrame(n, q))
    assert w[(J, J)] == CoeffElem.scalar(ExactScalar(value, 0, 1) if value else 0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_omega_diagonal_and_kernel(n):
    for q in range(n + 1):
        frame = FormFrame(n, q)
        w = omega_d(frame)
        for (Jo, Ji), c in w.entries():
            assert Jo == Ji
        for J in all_bases(n):
            missing = sum(1 for l in range(1, q + 1) if l not in J)
            high = sum(1 for l in J if l > q)
            assert w[(J, J)] == CoeffElem.scalar(ExactScalar(-2 * (missing + high), 0, 1) if missing + high else 0)
            # the L0 form shift is nonnegative and vanishes only on the determinant line
            assert form_shift(frame, J) == missing + high >= 0
            assert (form_shift(frame, J) == 0) == (J == frame.det)
            assert d_top(frame, J) + d_bot(frame, J) == len(J)


def test_projections():
    assert project_degree(0, basis(3)) == basis(3)
    assert project_degree(2, basis(3, 1)).is_zero
    f2 = FormFrame(3, 2)
    assert project_det(f2, basis(3, 1, 2)) == basis(3, 1, 2)
    assert project_det(f2, basis(3, 1, 3)).is_zero
    f0 = FormFrame(3, 0)
    for J in all_bases(3):
        x = FormElem.basis(3, J)
        assert project_det(f0, x) == project_degree(0, x)
    assert det_projector(f0) == degree_projector(3, 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_projectors_idempotent(n):
    for k in range(n + 1):
        I = degree_projector(n, k)
        assert I @ I == I
    total = FormOperator.zero(n)
    for k in range(n + 1):
        total = total + degree_projector(n, k)
    assert total == FormOperator.identity(n)


@pytest.mark.parametrize("n,q", [(2, 0), (3, 1), (4, 2), (4, 4)])
def test_symbol_degree_consistency(n, q):
    frame = FormFrame(n, q)
    R = curvature_operator(frame)
    syms = {s for _, c in R.entries() for w in c.words() for s in w}
    syms |= {s.adjoint() for s in syms}
    Rfull = R + R.adjoint()
    for sym in syms:
        S = symbol_action(Rfull, sym)
        assert not S.is_zero
        a, b = sym.degree_shift
        for k in range(n + 1):
            if 0 <= k + a + b <= n:
                assert degree_projector(n, k + a + b) @ S == S @ degree_projector(n, k)
        for (Jo, Ji), _ in S.entries():
            assert d_top(frame, Jo) - d_top(frame, Ji) == a
            assert d_bot(frame, Jo) - d_bot(frame, Ji) == b


def test_curvature_blocks_partition():
    frame = FormFrame(4, 2)
    full = curvature_operator(frame)
    parts = sum((curvature_operator(frame, b) for b in ("top", "mixed", "perp")), FormOperator.zero(4))
    assert full == parts
    with pytest.raises(ValueError):
        curvature_operator(frame, "diagonal")
