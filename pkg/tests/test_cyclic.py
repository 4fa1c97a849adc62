"""Cyclic tensors, Chern characters, the rough character and its chain map."""

import itertools
import math

import numpy as np
import pytest

from coarselab import cochain, cyclic, opalg, spaces, ufchain
from coarselab.errors import DegreeError, MarginError, PreconditionError


@pytest.fixture(scope="module")
def w():
    return spaces.make_window("zd", 16, 8, dim=1)


def _perm_sign_oracle(p):
    sign = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def chi_dense_oracle(ops, fiber=1):
    """Brute-force character: dense blocks, explicit permutation sum."""
    w = ops[0].window
    n = len(ops) - 1
    dense = [A.mat.toarray() for A in ops]
    N = w.n_points
    f = fiber

    def blk(M, p, q):
        return M[p * f:(p + 1) * f, q * f:(q + 1) * f]

    out = {}
    for tup in itertools.product(range(N), repeat=n + 1):
        total = 0.0 + 0j
        for sigma in itertools.permutations(range(n + 1)):
            z = [tup[sigma[i]] for i in range(n + 1)]
            prod = blk(dense[0], z[n], z[0])
            for i in range(1, n + 1):
                prod = prod @ blk(dense[i], z[i - 1], z[i])
            total += _perm_sign_oracle(sigma) * np.trace(prod)
        if abs(total) > 1e-13:
            out[tup] = total / math.factorial(n + 1)
    return out


def test_lambda_examples(w):
    A = opalg.random_banded(w, 1, prop=1, decay=0.8)
    B = opalg.random_banded(w, 2, prop=1, decay=0.8)
    C = opalg.random_banded(w, 3, prop=1, decay=0.8)
    t1 = cyclic.CyclicTensor(1, [(2.0, (A, B))])
    lt = cyclic.lambda_op(t1)
    assert lt.terms[0][0] == -2.0
    assert lt.terms[0][1] == (B, A)
    ll = cyclic.lambda_op(lt)
    assert ll.terms[0][0] == 2.0 and ll.terms[0][1] == (A, B)
    t0 = cyclic.CyclicTensor(0, [(1.0, (A,))])
    assert cyclic.lambda_op(t0).terms[0][1] == (A,)
    t2 = cyclic.CyclicTensor(2, [(1.0, (A, B, C))])
    r3 = cyclic.lambda_op(cyclic.lambda_op(cyclic.lambda_op(t2)))
    assert r3.terms[0][0] == 1.0 and r3.terms[0][1] == (A, B, C)


def test_hochschild_degree1(w):
    A = opalg.random_banded(w, 4, prop=1, decay=0.8)
    B = opalg.random_banded(w, 5, prop=1, decay=0.8)
    bt = cyclic.hochschild_b(cyclic.CyclicTensor(1, [(1.0, (A, B))]))
    # b(A (x) B) = AB - BA
    total = sum((wgt * ops[0].mat for wgt, ops in bt.terms),
                start=0 * A.mat)
    assert abs((total - (A.mat @ B.mat - B.mat @ A.mat))).max() < 1e-12


def test_hochschild_unit_annihilates(w):
    A = opalg.random_banded(w, 6, prop=1, decay=0.8)
    one = opalg.identity(w)
    bt = cyclic.hochschild_b(cyclic.CyclicTensor(1, [(1.0, (A, one))]))
    total = sum((wgt * ops[0].mat for wgt, ops in bt.terms), start=0 * A.mat)
    assert abs(total.toarray()).max() < 1e-14


def test_hochschild_degree2_formula(w):
    A = opalg.random_banded(w, 7, prop=1, decay=0.8)
    B = opalg.random_banded(w, 8, prop=1, decay=0.8)
    C = opalg.random_banded(w, 9, prop=1, decay=0.8)
    bt = cyclic.hochschild_b(cyclic.CyclicTensor(2, [(1.0, (A, B, C))]))
    expect = [(1, (A.mat @ B.mat, C.mat)), (-1, (A.mat, B.mat @ C.mat)),
              (1, (C.mat @ A.mat, B.mat))]
    assert len(bt.terms) == 3
    for (wgt, ops), (ew, ems) in zip(bt.terms, expect):
        assert wgt == ew
        for op, em in zip(ops, ems):
            assert abs((op.mat - em)).max() < 1e-12


def test_hochschild_degree0_errors(w):
    t = cyclic.CyclicTensor(0, [(1.0, (opalg.identity(w),))])
    with pytest.raises(DegreeError):
        cyclic.hochschild_b(t)


def test_chern0_weights(w):
    e = opalg.diag_indicator(w, lambda lb: lb[0] % 2 == 0)
    t0 = cyclic.chern0(e, 0)
    assert t0.degree == 0 and t0.tau_power == 0
    assert t0.terms[0][0] == 1.0
    t1 = cyclic.chern0(e, 1)
    assert t1.degree == 2 and t1.tau_power == 1
    assert t1.terms[0][0] == 2.0  # (2n)!/n! at n=1; times (2 pi i)^1
    assert len(t1.terms[0][1]) == 3
    assert t1.numeric_prefactor() == pytest.approx(2j * math.pi)


def test_chern0_zero_idempotent_pairs_to_zero(w):
    Z = opalg.BandedOperator(w, np.zeros((w.n_points, w.n_points)))
    t = cyclic.chern0(Z, 0)
    phi = cochain.Indicator(predicate=lambda lb: True)
    assert cyclic.character_pairing(phi, t).raw == 0


def test_chern0_rejects_non_idempotent(w):
    A = opalg.shift(w, 0, 1).scale(0.5)
    with pytest.raises(PreconditionError):
        cyclic.chern0(A, 0)


def test_chern1_weights(w):
    u = opalg.winding_unitary(w, 1)
    t = cyclic.chern1(u, 0)
    assert t.degree == 1 and t.tau_power == 1 and t.terms[0][0] == 1.0
    t1 = cyclic.chern1(u, 1)
    assert t1.degree == 3 and t1.tau_power == 2
    assert t1.terms[0][0] == 3.0  # (2n+1)!/(n+1)! = 3!/2! at n=1
    assert len(t1.terms[0][1]) == 4


def test_chern1_rejects_bad_inverse(w):
    u = opalg.shift(w, 0, 1).scale(2.0)
    with pytest.raises(PreconditionError):
        cyclic.chern1(u, 0, u_inv=u.adjoint())


def test_chi_site_projection(w):
    p = w.index_of((3,))
    e = opalg.site_projection(w, p)
    chain = cyclic.chi(cyclic.CyclicTensor(0, [(1.0, (e,))]))
    assert dict(chain.terms()) == {(p,): 1 + 0j}


def test_chi_support_bound(w):
    S = opalg.shift(w, 0, 1)
    one = opalg.identity(w)
    t = cyclic.CyclicTensor(1, [(1.0, (S.adjoint() - one, S - one))])
    chain = cyclic.chi(t)
    assert len(chain) > 0
    for tup in dict(chain.terms()):
        assert abs(w.label(tup[0])[0] - w.label(tup[1])[0]) <= 1


def assert_chain_matches(chain, oracle, scale=1.0):
    got = {t: complex(v) for t, v in chain.terms()}
    for k in set(got) | set(oracle):
        assert got.get(k, 0j) == pytest.approx(scale * oracle.get(k, 0j),
                                               abs=1e-12)


def test_chi_against_dense_oracle_deg1(w):
    A = opalg.random_banded(w, 11, prop=2, decay=0.7)
    B = opalg.random_banded(w, 12, prop=2, decay=0.7)
    chain = cyclic.chi(cyclic.CyclicTensor(1, [(1.0, (A, B))]))
    assert_chain_matches(chain, chi_dense_oracle((A, B)))


def test_chi_against_dense_oracle_deg2():
    wq = spaces.make_window("zd", 5, 3, dim=1)
    ops = tuple(opalg.random_banded(wq, 20 + j, prop=1, decay=0.8, density=0.8)
                for j in range(3))
    chain = cyclic.chi(cyclic.CyclicTensor(2, [(1.5, ops)]))
    assert_chain_matches(chain, chi_dense_oracle(ops), scale=1.5)


def test_chi_against_dense_oracle_deg3():
    wq = spaces.make_window("zd", 6, 4, dim=1)
    ops = tuple(opalg.random_banded(wq, 30 + j, prop=1, decay=0.8, density=0.9)
                for j in range(4))
    chain = cyclic.chi(cyclic.CyclicTensor(3, [(1.0, ops)]))
    assert_chain_matches(chain, chi_dense_oracle(ops))


def test_chi_block_fiber2_against_dense_oracle():
    wq = spaces.make_window("zd", 3, 2, dim=1)
    ops = tuple(opalg.random_banded(wq, 40 + j, prop=1, decay=0.8,
                                    density=0.9, fiber=2) for j in range(2))
    chain = cyclic.chi(cyclic.CyclicTensor(1, [(1.0, ops)]))
    assert_chain_matches(chain, chi_dense_oracle(ops, fiber=2))


def test_chi_cyclic_invariance_exact_integer(w):
    for degree in (1, 2):
        for seed in range(10):
            ops = tuple(opalg.random_banded(w, (seed, j), prop=2,
                                            density=0.5, integer=True)
                        for j in range(degree + 1))
            t = cyclic.CyclicTensor(degree, [(1.0, ops)])
            assert cyclic.chi(t).support == cyclic.chi(cyclic.lambda_op(t)).support


def test_chi_margin_precondition():
    wt = spaces.make_window("zd", 16, 2, dim=1)
    ops = tuple(opalg.random_banded(wt, j, prop=2, density=0.5)
                for j in range(2))
    with pytest.raises(MarginError):
        cyclic.chi(cyclic.CyclicTensor(1, [(1.0, ops)]))


def test_chain_map_residual():
    wb = spaces.make_window("zd", 20, 12, dim=1)
    rng = np.random.default_rng(2)
    worst = 0.0
    for degree in (1, 2):
        for _ in range(20):
            ops = tuple(opalg.random_banded(wb, int(rng.integers(2 ** 31)),
                                            prop=2, decay=0.7, density=0.4)
                        for _ in range(degree + 1))
            t = cyclic.CyclicTensor(degree, [(1.0, ops)])
            worst = max(worst, cyclic.chain_map_check(t))
    assert worst < 1e-9


def test_chain_map_zero_factor(w):
    Z = opalg.BandedOperator(w, np.zeros((w.n_points, w.n_points)))
    A = opalg.random_banded(w, 3, prop=2, decay=0.7)
    t = cyclic.CyclicTensor(1, [(1.0, (A, Z))])
    assert cyclic.chain_map_check(t) == 0.0


def test_b_squared_zero_via_chi(w):
    # b^2 = 0 holds on cyclic-quotient representatives: check chi(b(b t)) = 0
    rng = np.random.default_rng(3)
    for _ in range(10):
        ops = tuple(opalg.random_banded(w, int(rng.integers(2 ** 31)),
                                        prop=1, decay=0.8)
                    for _ in range(4))
        t = cyclic.CyclicTensor(3, [(1.0, ops)])
        bbt = cyclic.hochschild_b(cyclic.hochschild_b(t))
        chain = cyclic.chi(bbt)
        resid = max((abs(v) for _, v in chain.terms()), default=0.0)
        assert resid < 1e-10


def test_idempotent_tensor_chain_map(w):
    e = opalg.diag_indicator(w, lambda lb: lb[0] % 2 == 0)
    t = cyclic.CyclicTensor(1, [(1.0, (e, e))])
    # b(e (x) e) = e^2 - e^2 = 0 and the boundary of chi(e (x) e) vanishes
    assert cyclic.chain_map_check(t) < 1e-14


def test_character_pairing_winding(w):
    J = cochain.Jump(0, 0)
    for k in (1, 2, 3):
        u = opalg.winding_unitary(w, k)
        res = cyclic.character_pairing(J, cyclic.chern1(u, 0))
        assert res.stripped == pytest.approx(-k, abs=1e-10)
        assert res.raw == pytest.approx(-k * 2j * math.pi, abs=1e-9)


def test_character_pairing_identity_unitary(w):
    res = cyclic.character_pairing(cochain.Jump(0, 0),
                                   cyclic.chern1(opalg.identity(w), 0))
    assert res.raw == 0


def test_degree0_local_trace_normalization(w):
    e = opalg.diag_indicator(w, lambda lb: lb[0] % 2 == 0)
    total = cyclic.local_trace_sum(e)
    P = opalg.safe_projector(w)
    compressed_trace = (P @ e @ P).mat.diagonal().sum()
    assert abs(total - compressed_trace) < 1e-10


def test_chi_norm_ratio_window_independent():
    # ||chi(t)||_{inf,n} / prod_i max(||A_i||_op, ||A_i||_{mu,n+1}) stays
    # below a window-independent cap
    caps = {}
    n = 1
    for W in (16, 24, 32):
        wl = spaces.make_window("zd", W, 8, dim=1)
        worst = 0.0
        for seed in range(12):
            ops = tuple(opalg.random_banded(wl, (W, seed, j), prop=2,
                                            decay=0.7, density=0.5)
                        for j in range(2))
            t = cyclic.CyclicTensor(1, [(1.0, ops)])
            num = ufchain.norm_inf_n(cyclic.chi(t), n)
            den = 1.0
            for A in ops:
                den *= max(opalg.op_norm(A), opalg.mu_norm(A, n + 1, Rmax=6))
            if den > 0:
                worst = max(worst, num / den)
        caps[W] = worst
    assert caps[32] <= 1.3 * caps[16] + 1e-9


def test_tensor_validation(w):
    A = opalg.random_banded(w, 1, prop=1, decay=0.8)
    with pytest.raises(DegreeError):
        cyclic.CyclicTensor(1, [(1.0, (A,))])
    with pytest.raises(DegreeError):
        cyclic.CyclicTensor(4, [(1.0, (A,) * 5)])
    other = spaces.make_window("zd", 8, 4, dim=1)
    B = opalg.identity(other)
    with pytest.raises(DegreeError):
        cyclic.CyclicTensor(1, [(1.0, (A, B))])
