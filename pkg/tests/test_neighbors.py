import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shotgeom import MarkedConfiguration, make_cube_window
from shotgeom.errors import InvalidParameterError
from shotgeom.neighbors import nn_length_functional, nn_structure


def brute_nn(P, k):
    """Independent oracle: sort by (distance^2, coordinates) with Python tuples."""
    out = []
    for i, x in enumerate(P):
        cand = sorted((float(np.sum((P[j] - x) ** 2)), tuple(P[j]), j) for j in range(len(P)) if j != i)
        out.append([c[2] for c in cand[:k]])
    return np.array(out)


def test_two_points_are_mutual():
    ns = nn_structure(np.array([[0.0, 0.0], [1.0, 2.0]]), 1)
    assert ns.nn.ravel().tolist() == [1, 0]
    assert [s.tolist() for s in ns.sym] == [[1], [0]]


def test_collinear_points():
    ns = nn_structure(np.array([[0.0], [1.0], [3.0]]), 1)
    assert ns.nn.ravel().tolist() == [1, 0, 1]
    assert ns.sym[1].tolist() == [0, 2]


def test_ties_broken_by_coordinates():
    P = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    ns = nn_structure(P, 4)
    # from the origin all four are at distance 1; order is lexicographic
    assert [tuple(P[j]) for j in ns.nn[0]] == [(-1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0)]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_tree_matches_brute_force(k):
    rng = np.random.default_rng(k)
    for _ in range(10):
        P = rng.uniform(0, 10, size=(200, 2))
        a = nn_structure(P, k, "tree")
        b = nn_structure(P, k, "brute")
        assert np.array_equal(a.nn, b.nn)
        assert np.array_equal(a.nn, brute_nn(P, k))


def test_tree_matches_brute_force_on_lattice_ties():
    g = np.stack(np.meshgrid(np.arange(8.0), np.arange(8.0), indexing="ij"), -1).reshape(-1, 2)
    for k in (1, 2, 3, 4, 5):
        assert np.array_equal(nn_structure(g, k, "tree").nn, brute_nn(g, k))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 4), st.integers(6, 60))
def test_symmetric_sets(seed, k, n):
    rng = np.random.default_rng(seed)
    P = np.round(rng.uniform(0, 5, size=(n, 2)), 1)  # rounding creates ties
    P = np.unique(P, axis=0)
    if len(P) <= k:
        return
    ns = nn_structure(P, k)
    assert np.array_equal(ns.nn, brute_nn(P, k))
    for i, s in enumerate(ns.sym):
        assert i not in s
        for j in s:
            assert i in ns.sym[j]
            assert j in ns.nn[i] or i in ns.nn[j]
    # neighbour lists run in non-decreasing distance
    d = np.sum((P[ns.nn] - P[:, None, :]) ** 2, axis=-1)
    assert np.all(np.diff(d, axis=1) >= 0)


def test_too_few_points():
    with pytest.raises(InvalidParameterError):
        nn_structure(np.zeros((2, 2)) + [[0, 0], [1, 1]], 2)
    with pytest.raises(InvalidParameterError):
        nn_structure(np.array([[0.0, 0.0], [1.0, 1.0]]), 0)


def test_functional_two_points():
    z = MarkedConfiguration([[-1.0, 0.0], [1.0, 0.0]])
    assert nn_length_functional(z, make_cube_window(4, 2), 1) == 2.0


def test_functional_empty_and_small():
    w = make_cube_window(4, 2)
    assert nn_length_functional(MarkedConfiguration.empty(2), w, 1) == 0.0
    assert nn_length_functional(MarkedConfiguration([[0.0, 0.0]]), w, 1) == 0.0


def test_functional_ignores_points_outside():
    z = MarkedConfiguration([[-1.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
    assert nn_length_functional(z, make_cube_window(4, 2), 1) == 2.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_functional_matches_edge_enumeration(k):
    rng = np.random.default_rng(40 + k)
    P = rng.uniform(-2, 2, size=(50, 2))
    nn = brute_nn(P, k)
    edges = {tuple(sorted((i, int(j)))) for i in range(len(P)) for j in nn[i]}
    oracle = sum(float(np.hypot(*(P[i] - P[j]))) for i, j in edges)
    val = nn_length_functional(MarkedConfiguration(P), make_cube_window(6, 2), k)
    assert val == pytest.approx(oracle, rel=1e-12)
    assert len(nn_structure(P, k).edges()) == len(edges)
