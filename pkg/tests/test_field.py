import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _gen import random_discs
from shotgeom import (FieldGrid, MarkDistribution, MarkedConfiguration, RadialKernel, Region,
                      SeedStream, TokenKernel, build_grid, eval_field, eval_gradient,
                      make_cube_window, sample_poisson, superpose)
from shotgeom.errors import InvalidParameterError, SingularEvaluationError
from shotgeom.field import GRID_MAGIC

RADIAL = RadialKernel()


def disc(x, y, r, L):
    return MarkedConfiguration([[x, y]], [[L, r]], "disc")


def test_empty_field_is_zero():
    e = MarkedConfiguration.empty(2)
    assert eval_field(e, RADIAL, [0.3, 0.1]) == 0.0
    assert eval_field(MarkedConfiguration.empty(2, "disc"), TokenKernel(), [0, 0]) == 0.0
    assert eval_gradient(e, RADIAL, [0.3, 0.1]).tolist() == [0.0, 0.0]


def test_token_disc_values():
    z = disc(0, 0, 1, 2)
    assert eval_field(z, TokenKernel(), [0.5, 0]) == 2.0
    assert eval_field(z, TokenKernel(), [1.5, 0]) == 0.0
    assert eval_field(z, TokenKernel(), [1.0, 0]) == 2.0  # closed disc


def test_radial_atom_inner_branch():
    z = MarkedConfiguration([[0.0, 0.0]])
    assert eval_field(z, RADIAL, [0.25, 0.0]) == pytest.approx(2.0, rel=1e-15)
    assert eval_field(z, RADIAL, [0.0, 2.0]) == pytest.approx(2.0 ** -23, rel=1e-12)


def test_stretched_exponential_tail():
    k = RadialKernel(outer="stretched-exp", a=2.0, gamma=1.0)
    z = MarkedConfiguration([[0.0, 0.0]])
    assert eval_field(z, k, [1.5, 0.0]) == pytest.approx(math.exp(-3.0), rel=1e-12)


def test_amplitude_marks_scale_field():
    z = MarkedConfiguration([[0.0, 0.0]], [[-3.0]], "amplitude")
    assert eval_field(z, RADIAL, [0.25, 0.0]) == pytest.approx(-6.0)


def test_atom_at_query_point_is_singular():
    z = MarkedConfiguration([[0.5, 0.5]])
    with pytest.raises(SingularEvaluationError):
        eval_field(z, RADIAL, [0.5, 0.5])
    with pytest.raises(SingularEvaluationError):
        eval_gradient(z, RADIAL, [0.5, 0.5])


def test_gradient_of_single_atom():
    z = MarkedConfiguration([[0.0, 0.0]])
    for t in (0.3, 0.9, 1.4):
        g = eval_gradient(z, RADIAL, [t, 0.0])
        assert g[0] == pytest.approx(float(RADIAL.derivative(t)), rel=1e-12)
        assert g[1] == 0.0


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(3)
    P = rng.uniform(-1.5, 1.5, size=(10, 2))
    z = MarkedConfiguration(P)
    R = RADIAL.r_trunc
    checked = 0
    while checked < 20:
        y = rng.uniform(-1.5, 1.5, size=2)
        dist = np.hypot(*(P - y).T)
        if dist.min() < 0.05 or np.min(np.abs(dist - 1)) < 1e-3 or np.min(np.abs(dist - R)) < 1e-3:
            continue
        g = eval_gradient(z, RADIAL, y)
        e = 1e-5
        fd = np.array([(eval_field(z, RADIAL, y + e * u) - eval_field(z, RADIAL, y - e * u)) / (2 * e)
                       for u in np.eye(2)])
        assert np.max(np.abs(fd - g)) / np.max(np.abs(g)) < 1e-4
        checked += 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 15), st.integers(0, 15))
def test_linearity_in_configurations(seed, n1, n2):
    rng = np.random.default_rng(seed)
    a = MarkedConfiguration(rng.uniform(-3, 3, (n1, 2)))
    b = MarkedConfiguration(rng.uniform(-3, 3, (n2, 2)))
    y = rng.uniform(-3, 3, size=(10, 2))
    whole = eval_field(superpose(a, b), RADIAL, y)
    parts = eval_field(a, RADIAL, y) + eval_field(b, RADIAL, y)
    np.testing.assert_allclose(whole, parts, rtol=1e-13, atol=1e-300)


def test_field_ignores_assembly_order():
    rng = np.random.default_rng(5)
    P = rng.uniform(-3, 3, (40, 2))
    y = rng.uniform(-3, 3, (25, 2))
    a = eval_field(MarkedConfiguration(P), RADIAL, y)
    b = eval_field(MarkedConfiguration(P[::-1]), RADIAL, y)
    assert a.tobytes() == b.tobytes()


def test_truncation_soundness():
    z = sample_poisson(Region.cube(16, 2), seed=SeedStream(8))
    y = np.random.default_rng(8).uniform(-5, 5, size=(100, 2))
    wide = RadialKernel(r_trunc=2 * RADIAL.r_trunc)
    diff = np.abs(eval_field(z, RADIAL, y) - eval_field(z, wide, y))
    assert diff.max() < RADIAL.eps_tail


def test_truncation_radius_from_tail_bound():
    assert RADIAL.tail_mass(RADIAL.r_trunc) == pytest.approx(0.1 * RADIAL.eps_tail, rel=1e-9)
    k = RadialKernel(outer="stretched-exp", a=1.0, gamma=1.0, eps_tail=1e-6)
    assert k.tail_mass(k.r_trunc) == pytest.approx(1e-7, rel=1e-6)


@pytest.mark.parametrize("kw", [dict(lam=22.0), dict(nu=0.0), dict(C=-1.0),
                                dict(outer="stretched-exp", gamma=2.0),
                                dict(outer="gaussian")])
def test_kernel_validation(kw):
    with pytest.raises(InvalidParameterError):
        RadialKernel(**kw)


def test_kernel_is_monotone_and_positive():
    rho = np.geomspace(1e-3, 5, 500)
    for k in (RADIAL, RadialKernel(outer="stretched-exp", gamma=1.5, C=0.8)):
        v = k.value(rho)
        assert np.all(v > 0)
        if k.C <= 1:
            assert np.all(np.diff(v) <= 0)


def test_empty_grid():
    w = make_cube_window(4, 2)
    g = build_grid(MarkedConfiguration.empty(2), RADIAL, w, 1 / 8)
    assert g.values.shape == (32, 32)
    assert not g.values.any()


@pytest.mark.parametrize("a, h", [(3, 1 / 8), (4, 1 / 16), (5, 1 / 4)])
def test_grid_node_count(a, h):
    w = make_cube_window(a, 2)
    g = build_grid(MarkedConfiguration.empty(2), RADIAL, w, h)
    assert g.values.size == w.volume * (1 / h) ** 2
    assert g.mask.all()


def test_grid_matches_pointwise_evaluation():
    w = make_cube_window(6, 2)
    z = sample_poisson(Region.cube(12, 2), seed=SeedStream(2))
    g = build_grid(z, RADIAL, w, 1 / 8)
    pw = eval_field(z, RADIAL, g.node_coords()).reshape(g.shape)
    assert g.values.tobytes() == pw.tobytes()
    gg = build_grid(z, RADIAL, w, 1 / 8, gradient=True)
    np.testing.assert_allclose(gg.gradient.reshape(-1, 2), eval_gradient(z, RADIAL, g.node_coords()),
                               rtol=1e-12)


def test_token_grid_matches_pointwise():
    rng = np.random.default_rng(4)
    z = random_discs(rng, 12, amps=(1.0, -0.5))
    w = make_cube_window(6, 2)
    g = build_grid(z, TokenKernel(), w, 1 / 16)
    pw = eval_field(z, TokenKernel(), g.node_coords()).reshape(g.shape)
    assert np.array_equal(g.values, pw)


def test_three_dimensional_grid():
    k = RadialKernel(dim=3, lam=40.0)
    z = sample_poisson(Region.cube(5, 3), seed=SeedStream(1))
    w = make_cube_window(2, 3)
    g = build_grid(z, k, w, 1 / 8)
    assert g.values.shape == (16, 16, 16)
    np.testing.assert_array_equal(g.values.ravel(), eval_field(z, k, g.node_coords()))


def test_grid_nodes_lie_in_the_fill():
    w = make_cube_window(3, 2)
    g = build_grid(MarkedConfiguration.empty(2), RADIAL, w, 1 / 8)
    assert w.fill_contains(g.node_coords()).all()


def test_token_refinement():
    rng = np.random.default_rng(12)
    w = make_cube_window(6, 2)
    for _ in range(20):
        z = random_discs(rng, 8, amps=(1.0, 0.5, -0.7))
        coarse = build_grid(z, TokenKernel(), w, 1 / 8).values
        fine = build_grid(z, TokenKernel(), w, 1 / 32).values
        assert coarse.max() <= fine.max()
        assert coarse.min() >= fine.min()


def test_radial_refinement_lipschitz():
    w = make_cube_window(4, 2)
    z = sample_poisson(Region.cube(10, 2), seed=SeedStream(6))
    coarse = build_grid(z, RADIAL, w, 1 / 8)
    fine = build_grid(z, RADIAL, w, 1 / 32)
    # compare away from atoms, where the kernel is Lipschitz
    d = np.min(np.hypot(*(coarse.node_coords()[:, None, :] - z.points[None]).transpose(2, 0, 1)), axis=1)
    far = d > 0.25
    lip = len(z) * RADIAL.lipschitz_outside(0.2)
    fine_max = fine.values.max()
    assert coarse.values.ravel()[far].max() <= fine_max + lip * coarse.h


def test_supersampling_only_for_tokens():
    w = make_cube_window(2, 2)
    with pytest.raises(InvalidParameterError):
        build_grid(MarkedConfiguration.empty(2), RADIAL, w, 1 / 8, supersample=2)


def test_supersampled_token_grid_averages_cells():
    w = make_cube_window(4, 2)
    z = disc(0.0, 0.0, 1.0, 1.0)
    g = build_grid(z, TokenKernel(), w, 1 / 8, supersample=8)
    assert g.values.sum() * (1 / 8) ** 2 == pytest.approx(math.pi, rel=2e-3)
    assert set(np.unique(g.values)) - {0.0, 1.0}


@pytest.mark.parametrize("h", [0.3, 0.0, -0.125])
def test_grid_spacing_must_divide_one(h):
    with pytest.raises(InvalidParameterError):
        build_grid(MarkedConfiguration.empty(2), RADIAL, make_cube_window(2, 2), h)


def test_binary_layout_round_trip():
    w = make_cube_window(3, 2)
    z = sample_poisson(Region.cube(8, 2), seed=SeedStream(3))
    g = build_grid(z, RADIAL, w, 1 / 8)
    buf = g.to_bytes()
    assert buf[:4] == GRID_MAGIC
    assert int.from_bytes(buf[4:8], "little") == 1
    assert int.from_bytes(buf[8:12], "little") == 2
    assert int.from_bytes(buf[12:20], "little") == 24
    h, origin, vals = FieldGrid.read_bytes(buf)
    assert h == 1 / 8
    assert origin.tolist() == [-1.5, -1.5]
    assert vals.tobytes() == g.values.tobytes()
    with pytest.raises(InvalidParameterError):
        FieldGrid.read_bytes(b"XXXX" + buf[4:])


def test_grid_csv_columns():
    g = build_grid(MarkedConfiguration.empty(2), RADIAL, make_cube_window(1, 2), 1 / 8)
    lines = g.to_csv().split("\r\n")
    assert lines[0] == "x1,x2,value,in_window"
    assert len([l for l in lines if l]) == 65


def test_mark_kind_must_match_kernel():
    from shotgeom import FieldSpec
    with pytest.raises(InvalidParameterError):
        FieldSpec(TokenKernel(), MarkDistribution())
    with pytest.raises(InvalidParameterError):
        FieldSpec(RADIAL, MarkDistribution.discs(1.0))
