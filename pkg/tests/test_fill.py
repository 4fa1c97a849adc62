"""The simplicial filler: boundary compatibility, roundtrip, the main estimate."""

import numpy as np
import pytest

from coarselab import fill, spaces, ufchain
from coarselab.errors import FillError, MarginError


@pytest.fixture(scope="module")
def wz():
    return spaces.make_window("zd", 16, 4, dim=1)


@pytest.fixture(scope="module")
def w2():
    return spaces.make_window("zd", 12, 4, dim=2)


def test_staircase_on_line(wz):
    i = wz.index_of
    chain = fill.fill_tuple(wz, (i((0,)), i((5,))))
    assert len(chain) == 5
    assert chain.sup_norm() == 1
    b = fill.simplicial_boundary(chain)
    assert b.support == {(i((5,)),): 1, (i((0,)),): -1}


def test_fill_degree0(wz):
    p = wz.index_of((3,))
    chain = fill.fill_tuple(wz, (p,))
    assert chain.support == {(p,): 1}


def test_fill_diagonal_pair_is_zero(wz):
    p = wz.index_of((2,))
    assert len(fill.fill_tuple(wz, (p, p))) == 0


def test_fill_degree2_on_line_is_zero(wz):
    i = wz.index_of
    assert len(fill.fill_tuple(wz, (i((0,)), i((3,)), i((-2,))))) == 0


def test_fill_triangle_boundary_exact(w2):
    j = w2.index_of
    tup = (j((0, 0)), j((3, 0)), j((0, 3)))
    F = fill.fill_tuple(w2, tup)
    lhs = fill.simplicial_boundary(F)
    rhs = fill.SimplicialChain(w2, 1)
    for k in range(3):
        rhs.accumulate(fill.fill_tuple(w2, tup[:k] + tup[k + 1:]), (-1) ** k)
    assert lhs == rhs
    assert all(v == int(v) for v in F.support.values())


def test_boundary_of_filling_random_exact(w2):
    rng = np.random.default_rng(8)
    for _ in range(120):
        pts = [tuple(int(x) for x in rng.integers(-4, 5, size=2))
               for _ in range(3)]
        tup = tuple(w2.index_of(p) for p in pts)
        lhs = fill.simplicial_boundary(fill.fill_tuple(w2, tup))
        rhs = fill.SimplicialChain(w2, 1)
        for k in range(3):
            rhs.accumulate(fill.fill_tuple(w2, tup[:k] + tup[k + 1:]),
                           (-1) ** k)
        assert lhs == rhs


def test_fill_chain_examples(wz):
    i = wz.index_of
    c = ufchain.UfChain(wz, 1, {(i((0,)), i((5,))): 1})
    filled = fill.fill_chain(c)
    assert filled.sup_norm() == 1
    assert len(fill.fill_chain(ufchain.UfChain(wz, 1))) == 0
    # closed triangle relation pushed to degree 1 fills to a cycle
    a, b, cc = i((0,)), i((3,)), i((6,))
    rel = ufchain.UfChain(wz, 1, [((a, b), 1), ((b, cc), 1), ((a, cc), -1)])
    assert len(fill.simplicial_boundary(fill.fill_chain(rel))) == 0


def test_fill_chain_map_random(w2):
    rng = np.random.default_rng(31)
    for q in (1, 2):
        for _ in range(40):
            c = ufchain.random_chain(w2, q, n_terms=4, max_len=3,
                                     seed=int(rng.integers(2 ** 31)),
                                     coeff="int", safe_radius=7)
            lhs = fill.simplicial_boundary(fill.fill_chain(c))
            rhs = fill.fill_chain(ufchain.boundary(c))
            assert lhs == rhs


def test_roundtrip_unit_edge(wz):
    i = wz.index_of
    s = fill.SimplicialChain(wz, 1, {(i((0,)), i((1,))): 1})
    assert fill.roundtrip_identity(s)


def test_roundtrip_kuhn_triangles(w2):
    j = w2.index_of
    low = fill.SimplicialChain(w2, 2, {(j((0, 0)), j((1, 0)), j((1, 1))): 1})
    high = fill.SimplicialChain(w2, 2, {(j((0, 0)), j((0, 1)), j((1, 1))): 1})
    assert fill.roundtrip_identity(low)
    assert fill.roundtrip_identity(high)


def test_roundtrip_random_unit_chains(w2):
    rng = np.random.default_rng(4)
    j = w2.index_of
    for _ in range(10):
        s = fill.SimplicialChain(w2, 2)
        for _ in range(10):
            a, b = int(rng.integers(-5, 5)), int(rng.integers(-5, 5))
            if rng.random() < 0.5:
                verts = (j((a, b)), j((a + 1, b)), j((a + 1, b + 1)))
            else:
                verts = (j((a, b)), j((a, b + 1)), j((a + 1, b + 1)))
            s.add_simplex(verts, int(rng.integers(-3, 4)))
        assert fill.roundtrip_identity(s)


def test_non_kuhn_simplex_rejected(w2):
    j = w2.index_of
    with pytest.raises(FillError):
        fill.SimplicialChain(w2, 2, {(j((0, 0)), j((1, 0)), j((0, 1))): 1})
    with pytest.raises(FillError):
        fill.SimplicialChain(w2, 1, {(j((0, 0)), j((2, 0))): 1})


def test_kuhn_membership(w2):
    j = w2.index_of
    assert fill.is_kuhn_simplex(w2, (j((0, 0)), j((1, 0)), j((1, 1))))
    # the anti-diagonal split is not part of the triangulation
    assert not fill.is_kuhn_simplex(w2, (j((0, 0)), j((1, 0)), j((0, 1))))
    assert fill.is_kuhn_simplex(w2, (j((0, 0)), j((1, 1))))
    assert not fill.is_kuhn_simplex(w2, (j((0, 0)), j((1, -1))))


def test_margin_violation_names_tuple(w2):
    # the staircase from (0,12) to (12,0) rounds the corner (12,12), outside
    # the l1 ball of radius 12
    j = w2.index_of
    with pytest.raises(MarginError) as exc:
        fill.fill_tuple(w2, (j((0, 12)), j((12, 0))))
    assert "(0, 12)" in str(exc.value)
    assert "(12, 12)" in str(exc.value)


def test_degree3_rejected(wz):
    i = wz.index_of
    with pytest.raises(FillError):
        fill.fill_tuple(wz, (i((0,)), i((1,)), i((2,)), i((3,))))


def test_degree2_dim3_rejected():
    w3 = spaces.make_window("zd", 4, 1, dim=3)
    i = w3.index_of
    with pytest.raises(FillError):
        fill.fill_tuple(w3, (i((0, 0, 0)), i((1, 0, 0)), i((0, 1, 0))))


def test_contractibility_profile_line(wz):
    prof = fill.contractibility_profile(wz, 1, samples=50, rmax=4, seed=0)
    assert prof.N == pytest.approx(1.0, abs=1e-9)
    assert prof.C == pytest.approx(1.0, abs=1e-9)
    assert all(prof.profile[R] == R for R in prof.profile)


def test_contractibility_profile_plane(w2):
    prof = fill.contractibility_profile(w2, 2, samples=50, rmax=4, seed=0)
    assert 0.9 <= prof.N <= 1.3
    # fitted envelope holds pointwise on the measured profile
    for R, s in prof.profile.items():
        assert s <= prof.C * R ** prof.N * (1 + 1e-9)


def test_fill_radius_geometric_bound(w2):
    rng = np.random.default_rng(12)
    for _ in range(40):
        pts = [tuple(int(x) for x in rng.integers(-3, 4, size=2))
               for _ in range(3)]
        tup = tuple(w2.index_of(p) for p in pts)
        ln = w2.tuple_length(tup)
        assert fill.fill_radius(w2, tup) <= max(2 * ln, 1)


def test_degenerate_tuple_no_radius(w2):
    p = w2.index_of((1, 1))
    assert fill.fill_radius(w2, (p, p)) == 0


def test_crucial_estimate_line_example():
    w = spaces.make_window("zd", 16, 4, dim=1)
    i = w.index_of
    c = ufchain.UfChain(w, 1, {(i((0,)), i((5,))): 1})
    rep = fill.verify_crucial_estimate(c)
    assert rep.passed
    assert rep.lhs == 1
    assert rep.rhs > rep.lhs
    # exponent rule with measured constants: n = M*q*(N+1) + 2
    assert rep.n == pytest.approx(rep.M * 1 * (rep.N + 1) + 2)


def test_crucial_estimate_zero_chain():
    w = spaces.make_window("zd", 16, 4, dim=1)
    rep = fill.verify_crucial_estimate(ufchain.UfChain(w, 1))
    assert rep.passed and rep.lhs == 0 and rep.rhs == 0


def test_crucial_estimate_plane_sweep(w2):
    growth = spaces.fit_growth(w2)
    prof = fill.contractibility_profile(w2, 1, samples=40, rmax=4, seed=1)
    rng = np.random.default_rng(77)
    for _ in range(40):
        c = ufchain.random_chain(w2, 1, n_terms=4, max_len=2,
                                 seed=int(rng.integers(2 ** 31)),
                                 safe_radius=5)
        rep = fill.verify_crucial_estimate(c, growth, prof)
        assert rep.passed


def test_coefficient_sum_bound(w2):
    prof = fill.contractibility_profile(w2, 1, samples=40, rmax=4, seed=2)
    rng = np.random.default_rng(13)
    for _ in range(25):
        c = ufchain.random_chain(w2, 1, n_terms=4, max_len=2,
                                 seed=int(rng.integers(2 ** 31)),
                                 safe_radius=5)
        lhs, rhs = fill.coefficient_sum_bound(c, prof)
        assert lhs <= rhs * (1 + 1e-9) + 1e-12


def test_fill_memoization_determinism(wz):
    i = wz.index_of
    tup = (i((0,)), i((7,)))
    a = fill.fill_tuple(wz, tup)
    b = fill.fill_tuple(wz, tup)
    assert a is b  # memoized per window
    assert fill.fill_tuple(wz, tup).support == a.support


def test_lattice_only():
    t = spaces.make_window("tree3", 4, 1)
    with pytest.raises(FillError):
        fill.fill_tuple(t, (0, 1))
