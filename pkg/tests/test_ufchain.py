"""Uniformly finite chains: boundary, decay norms, shell norms."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarselab import spaces, ufchain
from coarselab.errors import DegreeError, PointNotInWindowError


@pytest.fixture(scope="module")
def w():
    return spaces.make_window("zd", 16, 6, dim=1)


def chain_of(w, *terms, degree=None):
    entries = [(tuple(w.index_of((x,)) for x in tup), v) for tup, v in terms]
    q = len(entries[0][0]) - 1 if entries else degree
    return ufchain.UfChain(w, q, entries)


def test_boundary_edge(w):
    c = chain_of(w, ((0, 5), 1))
    b = ufchain.boundary(c)
    assert b.coefficient((w.index_of((5,)),)) == 1
    assert b.coefficient((w.index_of((0,)),)) == -1
    assert len(b) == 2


def test_boundary_triple(w):
    c = chain_of(w, ((0, 1, 2), 1))
    b = ufchain.boundary(c)
    i = w.index_of
    assert b.coefficient((i((1,)), i((2,)))) == 1
    assert b.coefficient((i((0,)), i((2,)))) == -1
    assert b.coefficient((i((0,)), i((1,)))) == 1


def test_boundary_squared_zero(w):
    c = chain_of(w, ((0, 1, 2), 1))
    assert len(ufchain.boundary(ufchain.boundary(c))) == 0


def test_boundary_squared_zero_random_exact(w):
    rng = np.random.default_rng(11)
    for q in (2, 3):
        for trial in range(50):
            c = ufchain.random_chain(w, q, n_terms=8, max_len=4,
                                     seed=int(rng.integers(2 ** 31)),
                                     coeff="int")
            assert len(ufchain.boundary(ufchain.boundary(c))) == 0


def test_boundary_degree_zero_errors(w):
    with pytest.raises(DegreeError):
        ufchain.boundary(ufchain.UfChain(w, 0, {(0,): 1}))


def test_boundary_propagation_shrinks(w):
    c = ufchain.random_chain(w, 2, n_terms=6, max_len=5, seed=5)
    assert ufchain.boundary(c).propagation <= c.propagation


def test_norm_examples(w):
    c = chain_of(w, ((0, 3), 2))
    assert ufchain.norm_inf_n(c, 2) == 18
    diag = chain_of(w, ((5, 5), 7))
    assert ufchain.norm_inf_n(diag, 1) == 0
    assert ufchain.norm_inf_n(diag, 0) == 7
    mixed = chain_of(w, ((0, 3), 2), ((0, 1), 5))
    assert ufchain.norm_inf_n(mixed, 0) == 5


def test_graded_norm_examples(w):
    c = chain_of(w, ((0, 3), 1))
    assert ufchain.graded_norm(c, 1) == 3
    assert ufchain.graded_norm(c, 0) == 2
    zero = ufchain.UfChain(w, 1)
    assert ufchain.graded_norm(zero, 4) == 0


def test_shell_norm_examples(w):
    c = chain_of(w, ((0, 3), 2))
    assert ufchain.shell_norm(c, 3) == 2
    assert ufchain.shell_norm(c, 2) == 0
    zero = ufchain.UfChain(w, 1)
    assert all(ufchain.shell_norm(zero, R) == 0 for R in range(1, 6))


def test_shell_bridge_inequality_example(w):
    c = chain_of(w, ((0, 3), 2))
    assert ufchain.shell_norm(c, 3) <= 2 * ufchain.norm_inf_n(c, 1) / 3


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.integers(1, 4),
       R=st.integers(2, 8))
def test_shell_bridge_inequality_random(seed, n, R):
    w = spaces.make_window("zd", 16, 6, dim=1)
    c = ufchain.random_chain(w, 1, n_terms=10, max_len=8, seed=seed)
    lhs = ufchain.shell_norm(c, R)
    rhs = 2 ** n * ufchain.norm_inf_n(c, n) / R ** n
    assert lhs <= rhs * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), scale=st.integers(1, 9),
       n=st.integers(0, 3))
def test_seminorm_homogeneity_and_triangle(seed, scale, n):
    w = spaces.make_window("zd", 12, 4, dim=1)
    a = ufchain.random_chain(w, 1, n_terms=6, max_len=4, seed=seed)
    b = ufchain.random_chain(w, 1, n_terms=6, max_len=4, seed=seed + 1)
    assert ufchain.norm_inf_n(a.scale(scale), n) == pytest.approx(
        scale * ufchain.norm_inf_n(a, n))
    assert ufchain.norm_inf_n(a + b, n) <= \
        ufchain.norm_inf_n(a, n) + ufchain.norm_inf_n(b, n) + 1e-12


def test_norm_nondecreasing_in_n_when_spread(w):
    c = chain_of(w, ((0, 2), 1), ((1, 4), 0.5))
    norms = [ufchain.norm_inf_n(c, n) for n in range(5)]
    assert all(x <= y + 1e-12 for x, y in zip(norms, norms[1:]))


def test_zero_coefficients_dropped(w):
    c = chain_of(w, ((0, 1), 1), ((0, 1), -1), degree=1)
    assert len(c) == 0


def test_exact_fraction_coefficients(w):
    i = w.index_of
    c = ufchain.UfChain(w, 1, {(i((0,)), i((2,))): Fraction(1, 3),
                               (i((2,)), i((4,))): Fraction(2, 3)})
    b = ufchain.boundary(c)
    # +1/3 from the face of (0,2), -2/3 from the face of (2,4)
    assert b.coefficient((i((2,)),)) == Fraction(-1, 3)
    assert isinstance(b.coefficient((i((2,)),)), Fraction)


def test_point_validation(w):
    with pytest.raises(PointNotInWindowError):
        ufchain.UfChain(w, 0, {(9999,): 1})
    with pytest.raises(DegreeError):
        ufchain.UfChain(w, 1, {(0, 1, 2): 1})


def test_json_roundtrip(w):
    c = ufchain.random_chain(w, 1, n_terms=7, max_len=4, seed=13)
    d = ufchain.to_json_dict(c)
    assert d["degree"] == 1
    assert set(d["terms"][0]) == {"tuple", "re", "im"}
    c2 = ufchain.from_json_dict(d, w)
    assert {t: complex(v) for t, v in c.terms()} == dict(c2.terms())


def test_array_roundtrip(w):
    c = ufchain.random_chain(w, 2, n_terms=9, max_len=4, seed=3)
    tuples, values = c.arrays()
    c2 = ufchain.UfChain.from_arrays(w, 2, tuples, values)
    assert dict(c.terms()) == dict(c2.terms())


def test_boundary_arrays_matches_dict_path(w):
    c = ufchain.random_chain(w, 2, n_terms=12, max_len=5, seed=21)
    tuples, values = c.arrays()
    bt, bv = ufchain.boundary_arrays(w, 2, tuples, values)
    expected = dict(ufchain.boundary(c).terms())
    got = {tuple(int(x) for x in row): v for row, v in zip(bt, bv)}
    assert set(got) == set(expected)
    for k, v in got.items():
        assert v == pytest.approx(complex(expected[k]))
