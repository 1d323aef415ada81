import itertools
import math
import random
from fractions import Fraction

import pytest
import sympy as sp

from bergman_expansion.coeff_algebra import CoeffElem, EndoSymbol, ExactScalar
from bergman_expansion.corpus import _word_sum, default_corpus_path, load_corpus
from bergman_expansion.fock_forms import FormFrame, FormOperator, all_bases, curvature_operator, omega_d
from bergman_expansion.model_kernel import (
    B,
    Bplus,
    FormOp,
    GaussKernel,
    L0Op,
    LOp,
    MulPrimed,
    MulZ,
    MulZbar,
    ProjN,
    apply,
    apply_L,
    apply_L0,
    apply_word,
    diagonal,
    eval_first_zero,
    from_normal_form,
    integrate_against_P,
    kernel_adjoint,
    l0_inverse,
    l2_pairing,
    make_mono,
    project_N,
    to_normal_form,
)

F22 = FormFrame(2, 0)


def P(frame=F22, forms="scalar"):
    return GaussKernel.projection(frame, forms)


def mono(n, **kw):
    return make_mono(n, **kw)


def kernel(frame, *terms, forms=((), ())):
    """``sum coeff * mono * P`` on one form entry; terms are ``(coeff, pi_power, mono)``."""
    Jo, Ji = forms
    return GaussKernel(frame, [(CoeffElem.scalar(c, p), m, Jo, Ji) for c, p, m in terms])


def random_kernel(rng, frame, max_terms=3, max_degree=3, symbols=False):
    n = frame.n
    bases = all_bases(n)
    terms = []
    for _ in range(rng.randint(1, max_terms)):
        m = [0] * (4 * n)
        for _ in range(rng.randint(0, max_degree)):
            m[rng.randrange(4 * n)] += 1
        c = CoeffElem.scalar(ExactScalar(Fraction(rng.randint(-4, 4), rng.randint(1, 3)), rng.randint(-1, 1), rng.randint(-2, 2)))
        if symbols:
            s = EndoSymbol(f"S{rng.randint(1, 2)}", (0, 0), f"S{rng.randint(1, 2)}*")
            c = c * CoeffElem.word(s)
        terms.append((c, tuple(m), rng.choice(bases), rng.choice(bases)))
    return GaussKernel(frame, terms)


# --- apply / apply_word examples ----------------------------------------

@pytest.mark.parametrize("l", [1, 2])
def test_b_on_P(l):
    expect = kernel(F22, (2, 1, mono(2, zbar=[l])), (-2, 1, mono(2, zbp=[l])))
    assert apply(B(l), P()) == expect
    assert apply(Bplus(l), P()).is_zero


def test_word_b_z():
    for l, j in itertools.product((1, 2), repeat=2):
        lhs = apply_word([B(l), MulZ(j)], P())
        rhs = apply_word([MulZ(j), B(l)], P()) - P().scale(2 * (l == j))
        assert lhs == rhs


def test_eval_zero_examples():
    n = 4
    f = FormFrame(n, 2)
    P0 = P(f)
    for l, a, b, g in itertools.product(range(1, n + 1), repeat=4):
        assert eval_first_zero(apply_word([B(l), MulZ(a), MulZ(b), MulZ(g)], P0)).is_zero
        val = eval_first_zero(apply_word([B(l), B(g), MulZ(a), MulZ(b)], P0))
        expect = 4 * ((l == a) * (g == b) + (l == b) * (g == a))
        assert val == eval_first_zero(P0).scale(expect)
    for l, jp in itertools.product(range(1, n + 1), repeat=2):
        assert eval_first_zero(apply_word([B(l), MulZ(jp)], P0)) == eval_first_zero(P0).scale(-2 * (l == jp))
    assert diagonal(P0) == FormOperator(n, {((), ()): 1})


def test_empty_word_is_identity():
    K = random_kernel(random.Random(1), F22)
    assert apply_word([], K) == K


def test_frame_index_checked():
    with pytest.raises(IndexError):
        apply(B(3), P())


# --- normal form ---------------------------------------------------------

def test_normal_form_examples():
    n = 2
    nf = to_normal_form(apply(MulZbar(1), P()))
    assert nf.coefficient((1, 0), (0, 0)) == CoeffElem.scalar(Fraction(1, 2), -1)
    assert nf.coefficient((0, 0), (0, 0), (0, 0, 1, 0)) == CoeffElem.one()
    assert len(nf) == 2
    for l, a in itertools.product((1, 2), repeat=2):
        nf = to_normal_form(apply_word([MulZ(l), MulZbar(a)], P()))
        ea = tuple(int(i == a - 1) for i in range(n))
        el = tuple(int(i == l - 1) for i in range(n))
        assert nf.coefficient(ea, el) == CoeffElem.scalar(Fraction(1, 2), -1)
        assert nf.coefficient((0, 0), (0, 0)) == CoeffElem.scalar(int(a == l), -1)
        zbp = tuple(int(i == a - 1) for i in range(n))
        assert nf.coefficient((0, 0), el, (0, 0) + zbp) == CoeffElem.one()
    K = kernel(F22, (1, 0, mono(2, z=[1, 1, 2])))
    nf = to_normal_form(K)
    assert len(nf) == 1 and nf.coefficient((0, 0), (2, 1)) == CoeffElem.one()


def test_round_trip_random():
    rng = random.Random(20261016)
    for _ in range(300):
        frame = FormFrame(rng.randint(1, 3), 0)
        K = random_kernel(rng, frame, max_degree=4, symbols=True)
        assert from_normal_form(to_normal_form(K)) == K


# --- spectral operators --------------------------------------------------

def test_l0_inverse_examples():
    frame = FormFrame(2, 0)
    PN = GaussKernel.projection(frame, "det")
    Rperp = curvature_operator(frame, "perp")
    K = apply(FormOp(Rperp), PN)
    # degree-2 bottom form: form shift 2, eigenvalue 8 pi
    assert l0_inverse(K, 1) == K.scale(ExactScalar(Fraction(1, 8), 0, -1))
    assert l0_inverse(PN, 1).is_zero
    for l in (1, 2):
        Kb = apply_word([B(l), MulZ(2)], PN)
        # level-1 component on the determinant line: eigenvalue 4 pi
        assert l0_inverse(Kb, 1) == Kb.scale(ExactScalar(Fraction(1, 4), 0, -1))
    assert l0_inverse(l0_inverse(K, 1), 1) == l0_inverse(K, 2)


def test_project_N_examples():
    for n, q in [(1, 0), (2, 1), (3, 2), (3, 3)]:
        frame = FormFrame(n, q)
        assert apply(ProjN, P(frame, "identity")) == GaussKernel.projection(frame, "det")
        assert project_N(apply_word([B(1), MulZ(1)], P(frame, "det"))).is_zero
        # z_1 b_1 = b_1 z_1 + 2 leaves twice P^N in the kernel of L0
        assert project_N(apply_word([MulZ(1), B(1)], P(frame, "det"))) == GaussKernel.projection(frame, "det").scale(2)
        Kz = apply_word([MulZ(1), MulZ(n)], P(frame, "det"))
        assert project_N(Kz) == Kz
        assert project_N(apply(B(1), Kz)).is_zero


def eigen_kernel(frame, alpha, beta, forms="scalar"):
    word = [B(i + 1) for i, a in enumerate(alpha) for _ in range(a)]
    word += [MulZ(i + 1) for i, b in enumerate(beta) for _ in range(b)]
    return apply_word(word, P(frame, forms))


def multi_indices(n, max_total):
    return [a for a in itertools.product(range(max_total + 1), repeat=n) if sum(a) <= max_total]


@pytest.mark.parametrize("n", [1, 2])
def test_L_eigenvalues(n):
    frame = FormFrame(n, 0)
    L_word = [[B(l), Bplus(l)] for l in range(1, n + 1)]
    for alpha in multi_indices(n, 3):
        for beta in multi_indices(n, 3 - sum(alpha)):
            K = eigen_kernel(frame, alpha, beta)
            expect = K.scale(ExactScalar(4 * sum(alpha), 0, 1))
            via_word = GaussKernel.zero(frame)
            for w in L_word:
                via_word = via_word + apply_word(w, K)
            assert via_word == expect
            assert apply(LOp, K) == expect


def test_L_equals_sum_b_bplus_random():
    rng = random.Random(7)
    for _ in range(200):
        frame = FormFrame(rng.randint(1, 3), 0)
        K = random_kernel(rng, frame)
        total = GaussKernel.zero(frame)
        for l in range(1, frame.n + 1):
            total = total + apply_word([B(l), Bplus(l)], K)
        assert total == apply_L(K)


def test_L0_is_L_minus_two_omega():
    rng = random.Random(8)
    for _ in range(100):
        frame = FormFrame(3, rng.randint(0, 3))
        K = random_kernel(rng, frame)
        expect = apply_L(K) - apply(FormOp(omega_d(frame)), K).scale(2)
        assert apply(L0Op, K) == expect == apply_L0(K)


@pytest.mark.parametrize("n", [1, 2])
def test_orthogonality(n):
    frame = FormFrame(n, 0)
    idx = multi_indices(n, 3)
    fns = {(a, b): eigen_kernel(frame, a, b) for a in idx for b in idx}
    keys = sorted(fns)
    for i, k1 in enumerate(keys):
        for k2 in keys[i:]:
            val = l2_pairing(fns[k1], fns[k2])
            if k1 != k2:
                assert val.is_zero, (k1, k2)
            else:
                a, b = k1
                fac = math.prod(math.factorial(x) for x in a + b)
                expect = ExactScalar(fac * 4 ** sum(a), 0, sum(a) - sum(b))
                assert val == FormOperator(n, {((), ()): CoeffElem.scalar(expect)})


@pytest.mark.parametrize("n,q", [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 1), (4, 2)])
def test_PN_kernel(n, q):
    frame = FormFrame(n, q)
    PN = GaussKernel.projection(frame, "det")
    assert apply(ProjN, P(frame, "identity")) == PN
    # P^N is the L0 kernel: L0 annihilates it and L0^{-1} drops it
    assert apply(L0Op, PN).is_zero
    # L0^{-1} sees the complement only: L0 L0^{-1} is the identity off P^N
    K = P(frame, "identity")
    assert apply(L0Op, l0_inverse(K)) == K - PN


# --- CCR -----------------------------------------------------------------

def test_ccr_randomized():
    rng = random.Random(2020)
    n = 2
    frame = FormFrame(n, 1)
    count = 0
    for _ in range(1000):
        K = random_kernel(rng, frame, symbols=True)
        count += 1
        for i, j in itertools.product(range(1, n + 1), repeat=2):
            d = int(i == j)
            bb = apply_word([B(i), B(j)], K) - apply_word([B(j), B(i)], K)
            pp = apply_word([Bplus(i), Bplus(j)], K) - apply_word([Bplus(j), Bplus(i)], K)
            bp = apply_word([B(i), Bplus(j)], K) - apply_word([Bplus(j), B(i)], K)
            assert bb.is_zero and pp.is_zero
            assert bp == K.scale(ExactScalar(-4 * d, 0, 1))
            # [g, b_j] = 2 dg/dz_j and [g, b+_j] = -2 dg/dzbar_j for g = z_i, zbar_i
            zb = apply_word([MulZ(i), B(j)], K) - apply_word([B(j), MulZ(i)], K)
            zbb = apply_word([MulZbar(i), B(j)], K) - apply_word([B(j), MulZbar(i)], K)
            zp = apply_word([MulZ(i), Bplus(j)], K) - apply_word([Bplus(j), MulZ(i)], K)
            zbp = apply_word([MulZbar(i), Bplus(j)], K) - apply_word([Bplus(j), MulZbar(i)], K)
            assert zb == K.scale(2 * d) and zbb.is_zero
            assert zp.is_zero and zbp == K.scale(-2 * d)
    assert count >= 1000


# --- evaluation and integration -----------------------------------------

def test_moments_exact():
    n = 2
    for a in multi_indices(n, 3):
        for b in multi_indices(n, 3):
            hol = [i + 1 for i in range(n) for _ in range(a[i])]
            anti = [i + 1 for i in range(n) for _ in range(b[i])]
            K = apply(MulPrimed(hol, anti), P())
            val = integrate_against_P(K)
            if a != b:
                assert val.is_zero
            else:
                fac = math.prod(math.factorial(x) for x in a)
                assert val == FormOperator(n, {((), ()): CoeffElem.scalar(fac, -sum(a))})


def test_integrate_examples():
    f = FormFrame(4, 2)
    for l, a, b, g in itertools.product(range(1, 5), repeat=4):
        K = eval_first_zero(apply_word([B(l), MulZbar(a), MulZbar(b), MulZbar(g)], P(f)))
        assert integrate_against_P(K).is_zero
    assert integrate_against_P(eval_first_zero(P(f))) == FormOperator(4, {((), ()): 1})
    with pytest.raises(ValueError):
        integrate_against_P(apply(MulZ(1), P(f)))


def test_quadrature_oracle():
    from scipy import integrate

    frame = FormFrame(1, 0)
    for a in range(5):
        for b in range(5 - a):
            K = apply(MulPrimed([1] * a, [1] * b), P(frame))
            val = integrate_against_P(K)[((), ())]
            exact = val.as_scalar().to_complex() if val else 0j

            def part(fn):
                f = lambda r, t: fn(r**(a + b) * complex(math.cos((a - b) * t), math.sin((a - b) * t))) * math.exp(-math.pi * r * r) * r
                v, err = integrate.dblquad(f, 0, 2 * math.pi, 0, 8, epsabs=1e-13, epsrel=1e-13)
                return v

            num = complex(part(lambda c: c.real), part(lambda c: c.imag))
            assert abs(num - exact) <= 1e-9, (a, b, num, exact)


# --- adjoints --------------------------------------------------------------

def test_kernel_adjoint_examples():
    for forms in ("scalar", "identity", "det"):
        K = P(FormFrame(3, 1), forms)
        assert kernel_adjoint(K) == K
    for l in (1, 2):
        expect = kernel(F22, (2, 1, mono(2, zp=[l])), (-2, 1, mono(2, z=[l])))
        assert kernel_adjoint(apply(B(l), P())) == expect


def test_kernel_adjoint_involution_random():
    rng = random.Random(99)
    for _ in range(300):
        frame = FormFrame(rng.randint(1, 3), 0)
        K = random_kernel(rng, frame, symbols=True)
        assert kernel_adjoint(kernel_adjoint(K)) == K
        K2 = random_kernel(rng, frame, symbols=True)
        assert kernel_adjoint(K + K2) == kernel_adjoint(K) + kernel_adjoint(K2)


def test_second_slot_b_via_adjoint():
    # (P b_l^*)(Z, Z') as a kernel equals adj(b_l P): b_l acting on the second slot
    for l in (1, 2):
        K = kernel_adjoint(apply(B(l), P()))
        # b_l on the second slot of P: 2 pi (z'_l - z_l) P, conjugated variables
        assert K == kernel(F22, (2, 1, mono(2, zp=[l])), (-2, 1, mono(2, z=[l])))
        assert kernel_adjoint(K) == apply(B(l), P())


# --- two evaluation routes: engine calculus vs an independent sympy calculus ----------

PI = sp.Symbol("pi", positive=True)


def _sym_vars(n):
    names = ("z", "zb", "zp", "zbp")
    return [[sp.Symbol(f"{nm}{i}") for i in range(1, n + 1)] for nm in names]


def _to_sympy(K):
    n = K.frame.n
    V = _sym_vars(n)
    flat = [v for block in V for v in block]
    out = {}
    for c, m, Jo, Ji in K.terms():
        val = 0
        for s, syms, word in c.terms():
            assert not syms and not word
            val += (sp.Rational(s.re.numerator, s.re.denominator) + sp.I * sp.Rational(s.im.numerator, s.im.denominator)) * PI**s.pi_power
        out[(Jo, Ji)] = out.get((Jo, Ji), 0) + val * sp.Mul(*[v**e for v, e in zip(flat, m)])
    return out


def _sym_apply(gen, f, V):
    """Act on ``f * P`` with the textbook formulas; returns the new prefactor."""
    z, zb, zp, zbp = V
    if gen.kind == "B":
        i = gen.index - 1
        # b = -2 d/dz + pi zbar with d/dz_i P = -(pi/2)(zbar_i - 2 zbar'_i) P
        return -2 * (sp.diff(f, z[i]) - PI / 2 * (zb[i] - 2 * zbp[i]) * f) + PI * zb[i] * f
    if gen.kind == "BP":
        i = gen.index - 1
        # b+ = 2 d/dzbar + pi z with d/dzbar_i P = -(pi/2) z_i P
        return 2 * (sp.diff(f, zb[i]) - PI / 2 * z[i] * f) + PI * z[i] * f
    if gen.kind == "Z":
        return z[gen.index - 1] * f
    if gen.kind == "ZBAR":
        return zb[gen.index - 1] * f
    if gen.kind == "PRIMED":
        hol, anti = gen.payload
        return f * sp.Mul(*[zp[i - 1] for i in hol]) * sp.Mul(*[zbp[i - 1] for i in anti])
    raise AssertionError(gen.kind)


SPATIAL_OPS = {"B", "BP", "Z", "ZBAR", "ZP", "ZBARP", "RES"}


def _corpus_words():
    entries, _ = load_corpus(default_corpus_path())
    rng = random.Random(5)
    out = []
    for e in entries:
        if e.base != "P0" or e.probe:
            continue
        for t in e.lhs + e.rhs:
            if not t.word or any(op not in SPATIAL_OPS for op, _ in t.word):
                continue
            for _ in range(2):
                inst = {name: rng.randint(*e.index_range) for name in e.indices}
                out.append((e.id, FormFrame(e.n, e.q), t.word, inst))
    return out


def test_two_evaluation_routes():
    words = _corpus_words()
    assert len(words) > 100
    for eid, frame, word, inst in words:
        V = _sym_vars(frame.n)
        zero = {v: 0 for v in V[0] + V[1]}
        for c, gens in _word_sum(frame, word, inst):
            K = apply_word(gens, P(frame))
            engine = _to_sympy(eval_first_zero(K)).get(((), ()), 0)
            f = sp.Integer(1)
            for g in reversed(gens):
                f = _sym_apply(g, f, V)
            oracle = sp.expand(f.subs(zero))
            assert sp.expand(engine - oracle) == 0, (eid, inst)
