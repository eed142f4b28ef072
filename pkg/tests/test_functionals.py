import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _gen import exact_euler, generic_discs, random_discs
from shotgeom import (FieldSpec, MarkDistribution, MarkedConfiguration, RadialKernel, Region,
                      SeedStream, TokenKernel, build_grid, make_cube_window, sample_poisson)
from shotgeom.contours import euler_characteristic_2d
from shotgeom.errors import InvalidParameterError
from shotgeom.field import FieldGrid
from shotgeom.functionals import (FunctionalSpec, cell_values, evaluate, excursion_volume,
                                  fixed_level_perimeter_grid, fixed_level_perimeter_token,
                                  score_sum, total_curvature, weighted_perimeter_cont,
                                  weighted_perimeter_jump)
from shotgeom.jumps import build_jump_structure
from shotgeom.neighbors import nn_length_functional
from shotgeom.testfunctions import TestFunction

W8 = make_cube_window(8, 2)
TOKEN = TokenKernel()
RADIAL = RadialKernel()


def discs(rows):
    rows = np.asarray(rows, dtype=float)
    return MarkedConfiguration(rows[:, :2], rows[:, 2:], "disc")


def tc(z, u, w=W8):
    return total_curvature(build_jump_structure(z, w, u)).total


# -- excursion volume ------------------------------------------------------------

def test_volume_of_empty_grid():
    g = build_grid(MarkedConfiguration.empty(2, "disc"), TOKEN, W8, 1 / 8)
    assert excursion_volume(g, 0.5) == 0.0


def test_volume_of_single_disc():
    g = build_grid(discs([[-0.3, 0.2, 1, 1]]), TOKEN, W8, 1 / 128)
    assert excursion_volume(g, 0.5) == pytest.approx(math.pi, rel=0.01)


def test_volume_below_minimum_is_window_volume():
    z = sample_poisson(Region.cube(12, 2), seed=SeedStream(1))
    g = build_grid(z, RADIAL, W8, 1 / 8)
    assert excursion_volume(g, g.values.min() - 1) == W8.volume


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.floats(0, 3), st.floats(0, 3))
def test_volume_non_increasing_in_level(seed, u1, u2):
    z = sample_poisson(Region.cube(8, 2), seed=SeedStream(seed))
    g = build_grid(z, RADIAL, make_cube_window(4, 2), 1 / 8)
    lo, hi = sorted((u1, u2))
    assert excursion_volume(g, lo) >= excursion_volume(g, hi)


# -- perimeters --------------------------------------------------------------------

def test_grid_perimeter_of_constant_field():
    g = build_grid(MarkedConfiguration.empty(2, "disc"), TOKEN, W8, 1 / 8)
    assert fixed_level_perimeter_grid(g, 0.5) == 0.0


def test_grid_perimeter_of_disc():
    g = build_grid(discs([[-0.3, 0.2, 1, 1]]), TOKEN, W8, 1 / 128, supersample=4)
    assert fixed_level_perimeter_grid(g, 0.5) == pytest.approx(2 * math.pi, rel=0.02)


def test_point_sampled_token_contour_is_biased():
    g = build_grid(discs([[-0.3, 0.2, 1, 1]]), TOKEN, W8, 1 / 128)
    assert fixed_level_perimeter_grid(g, 0.5) > 1.04 * 2 * math.pi


def test_grid_perimeter_of_half_plane():
    w = make_cube_window(4, 2)
    h = 1 / 8
    g = build_grid(MarkedConfiguration.empty(2), RADIAL, w, h)
    xs = g.axes()[0]
    g.values = np.repeat((xs >= 0)[:, None], g.shape[1], axis=1).astype(float)
    assert fixed_level_perimeter_grid(g, 0.5) == pytest.approx(4.0, rel=0.02)


def test_token_perimeter_of_single_disc():
    js = build_jump_structure(discs([[-0.3, 0.2, 1, 1]]), W8, 0.5)
    assert fixed_level_perimeter_token(js) == pytest.approx(2 * math.pi, abs=1e-9)
    assert fixed_level_perimeter_token(js, 1.5) == 0.0


def test_token_perimeter_counts_only_inside_arcs():
    js = build_jump_structure(discs([[3.0, 0.0, 1, 1]]), W8, 0.5)
    assert fixed_level_perimeter_token(js) == pytest.approx(4 * math.pi / 3)


def test_perimeter_routes_agree():
    rng = np.random.default_rng(33)
    for _ in range(8):
        z = generic_discs(rng, 6, 0.02, amps=(1.0, -0.5), probs=(0.7, 0.3))
        for u in (0.25, 0.75):
            exact = fixed_level_perimeter_token(build_jump_structure(z, W8, u))
            grid = fixed_level_perimeter_grid(build_grid(z, TOKEN, W8, 1 / 128, supersample=4), u)
            assert abs(exact - grid) / max(exact, 1) < 0.02


# -- total curvature ----------------------------------------------------------------

def test_curvature_of_single_disc():
    assert tc(discs([[0, 0, 1, 1]]), 0.5) == pytest.approx(2 * math.pi)


def test_curvature_of_disjoint_discs():
    z = discs([[-2, -2, 1, 0.8], [1, 1, 1, 0.6], [-2, 1.5, 1, 0.5], [1.5, -2, 1, 0.9]])
    assert tc(z, 0.5) == pytest.approx(4 * 2 * math.pi)


def test_curvature_of_two_overlapping_discs():
    z = discs([[0, 0, 1, 1], [1.2, 0.3, 1, 0.8]])
    union, lens = tc(z, 0.5), tc(z, 1.5)
    assert union == pytest.approx(2 * math.pi)
    assert lens == pytest.approx(2 * math.pi)
    for u, val in ((0.5, union), (1.5, lens)):
        g = build_grid(z, TOKEN, W8, 1 / 256)
        assert euler_characteristic_2d(g.values >= u) == round(val / (2 * math.pi))


def test_curvature_of_annulus():
    z = discs([[0, 0, 1, 1.5], [0.1, 0.2, -1, 0.6]])
    assert tc(z, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_curvature_with_concave_corners():
    # three discs in a ring leave a hole in the middle
    z = discs([[0, 0.8, 1, 0.9], [-0.7, -0.4, 1, 0.9], [0.7, -0.4, 1, 0.9], [0, 0, -1, 0.35]])
    val = tc(z, 0.5)
    g = build_grid(z, TOKEN, W8, 1 / 256)
    assert val / (2 * math.pi) == pytest.approx(round(val / (2 * math.pi)), abs=1e-9)
    assert euler_characteristic_2d(g.values >= 0.5) == round(val / (2 * math.pi))


def test_curvature_decomposition_round_trips():
    z = discs([[0, 0, 1, 1], [1.2, 0.3, 1, 0.8]])
    d = total_curvature(build_jump_structure(z, W8, 0.5))
    js = d.to_dict()
    assert len(js["corners"]) == 2
    s = sum(a["kappa"] * a["length"] for a in js["arcs"]) + sum(c["angle"] for c in js["corners"])
    assert s == pytest.approx(js["total"], abs=1e-12)
    assert d.euler_characteristic == pytest.approx(1.0)


def test_curvature_integrality_on_random_configurations():
    rng = np.random.default_rng(8)
    misses = 0
    for _ in range(15):
        z = generic_discs(rng, int(rng.integers(2, 10)), 0.02, amps=(1.0, -0.5), probs=(0.7, 0.3))
        for u in (0.25, 0.75, 1.25):
            chi = tc(z, u) / (2 * math.pi)
            assert abs(chi - round(chi)) < 1e-7
            g = build_grid(z, TOKEN, W8, 1 / 256)
            # pixels at the tip of a sharp corner may split off on the grid
            misses += euler_characteristic_2d(g.values >= u) != round(chi)
    assert misses <= 1


def test_curvature_matches_exact_arrangement_euler():
    rng = np.random.default_rng(81)
    for i in range(20):
        z = generic_discs(rng, int(rng.integers(2, 10)), 0.02, amps=(1.0, -0.5), probs=(0.7, 0.3))
        u = (0.25, 0.75, 1.25)[i % 3]
        assert round(tc(z, u) / (2 * math.pi)) == exact_euler(z, u)


# -- weighted perimeters --------------------------------------------------------------

def test_weighted_continuous_part_trivial_cases():
    e = MarkedConfiguration.empty(2)
    assert weighted_perimeter_cont(e, RADIAL, W8, TestFunction.bump(0, 1), 1 / 8) == 0.0
    z = MarkedConfiguration([[0.05, 0.02]])
    # the field away from the atom stays below 2 only outside a small disc
    far = TestFunction.bump(40.0, 0.5)
    assert weighted_perimeter_cont(z, RADIAL, W8, far, 1 / 8) == 0.0


def test_weighted_continuous_part_of_single_atom():
    # h = 1 on the range: the co-area integral is the total variation of f
    # along rays, so the result is the integral of |g'| over the plane.
    z = MarkedConfiguration([[0.0, 0.0]])
    k = RadialKernel(nu=0.5)
    val = weighted_perimeter_cont(z, k, make_cube_window(8, 2), TestFunction.linear(), 1 / 256)
    # 2 pi int_0^1 0.5 r^-1.5 r dr + 2 pi int_1^R 23 r^-24 r dr
    R = k.r_trunc
    expect = 2 * math.pi * (1.0 + 23 / 22 * (1 - R ** -22))
    assert val == pytest.approx(expect, rel=0.02)


def test_weighted_continuous_refinement():
    rng = np.random.default_rng(0)
    test = TestFunction.bump(2.0, 1.0)
    w = make_cube_window(4, 2)
    for i in range(20):
        z = sample_poisson(Region.cube(9, 2), seed=SeedStream(100, i))
        a = weighted_perimeter_cont(z, RADIAL, w, test, 1 / 64)
        b = weighted_perimeter_cont(z, RADIAL, w, test, 1 / 128)
        assert abs(a - b) < 0.01 * max(abs(b), 1e-12)


def test_weighted_jump_part_trivial_cases():
    js = build_jump_structure(MarkedConfiguration.empty(2, "disc"), W8)
    assert weighted_perimeter_jump(js, TestFunction.bump(0.5, 0.5)) == 0.0
    js = build_jump_structure(discs([[0, 0, 1, 1]]), W8)
    assert weighted_perimeter_jump(js, TestFunction.linear()) == pytest.approx(2 * math.pi)
    assert weighted_perimeter_jump(js, TestFunction.bump(2.5, 0.5)) == 0.0


def test_weighted_jump_negative_amplitude_is_positive():
    js = build_jump_structure(discs([[0, 0, -1, 1]]), W8)
    assert weighted_perimeter_jump(js, TestFunction.linear()) == pytest.approx(2 * math.pi)


def test_weighted_jump_quadrature_refinement():
    rng = np.random.default_rng(1)
    test = TestFunction.bump(0.8, 0.9)
    for _ in range(20):
        js = build_jump_structure(random_discs(rng, 10, amps=(1.0, -0.5, 0.7)), W8)
        a = weighted_perimeter_jump(js, test, 16)
        b = weighted_perimeter_jump(js, test, 32)
        assert abs(a - b) <= 1e-6 * max(abs(b), 1e-12)


def test_weighted_jump_equals_perimeter_sum_for_indicator_like_h():
    # with h = 1, each boundary arc adds |L| times its length
    rng = np.random.default_rng(4)
    z = random_discs(rng, 8, amps=(1.0, -0.5))
    js = build_jump_structure(z, W8)
    val = weighted_perimeter_jump(js, TestFunction.linear())
    assert val == pytest.approx(np.sum(np.abs(js.arc_amplitude) * js.arc_length * js.inside))


def test_primitive_derivative_is_test_function():
    rng = np.random.default_rng(2)
    f = TestFunction.bump(0.7, 1.3)
    t = rng.uniform(-1, 2.5, 100)
    e = 1e-5
    fd = (f.H(t + e) - f.H(t - e)) / (2 * e)
    np.testing.assert_allclose(fd, f.h(t), atol=1e-8)
    assert f.H(-1.0) == 0.0
    assert f.H(3.0) == pytest.approx(f.total_mass, rel=1e-14)


# -- score sums and dispatch ----------------------------------------------------------

def test_count_score():
    z = sample_poisson(Region.cube(12, 2), seed=SeedStream(2))
    assert score_sum(z, W8, "count") == np.count_nonzero(W8.fill_contains(z.points))
    assert score_sum(z, W8, "zero") == 0.0


def test_nn_score_reproduces_nn_length():
    z = sample_poisson(Region.cube(8, 2), seed=SeedStream(7))
    for k in (1, 2, 3):
        spec = FunctionalSpec("score-sum", score="nn", k=k)
        assert evaluate(spec, z, W8) == pytest.approx(nn_length_functional(z, W8, k), rel=1e-12)


@pytest.mark.parametrize("kw", [
    dict(kind="area"), dict(kind="excursion-volume"),
    dict(kind="excursion-volume", field=FieldSpec(RADIAL), h_grid=0.25),
    dict(kind="excursion-volume", field=FieldSpec(RADIAL), h_grid=0.1),
    dict(kind="excursion-volume", field=FieldSpec(RADIAL), u=math.nan),
    dict(kind="total-curvature", field=FieldSpec(RADIAL)),
    dict(kind="nn-length", mode="infinite"),
    dict(kind="score-sum", score="median"),
    dict(kind="nn-length", k=0),
])
def test_spec_validation(kw):
    with pytest.raises(InvalidParameterError):
        FunctionalSpec(**kw)


def test_translation_covariance():
    rng = np.random.default_rng(3)
    shift = np.array([3, -2])
    w = make_cube_window(6, 2)
    ws = w.translate(shift)
    z = random_discs(rng, 8, amps=(1.0, -0.5), centre=0.0, box=2.0)
    zs = z.translate(shift)
    for kind in ("fixed-level-perimeter", "total-curvature", "excursion-volume"):
        spec = FunctionalSpec(kind, FieldSpec(TOKEN, MarkDistribution.discs(0.3, 1.0)), u=0.5)
        assert evaluate(spec, zs, ws) == pytest.approx(evaluate(spec, z, w), rel=1e-9, abs=1e-9)
    p = sample_poisson(Region.cube(6, 2), seed=SeedStream(1))
    assert nn_length_functional(p.translate(shift), ws, 2) == pytest.approx(
        nn_length_functional(p, w, 2), rel=1e-12)


@pytest.mark.parametrize("kind", ["excursion-volume", "fixed-level-perimeter"])
def test_cell_values_sum_to_functional(kind):
    spec = FunctionalSpec(kind, FieldSpec(RADIAL), u=1.0, mode="infinite")
    w = make_cube_window(5, 2)
    z = sample_poisson(spec.input_region(w), seed=SeedStream(3))
    assert cell_values(spec, z, w).sum() == pytest.approx(evaluate(spec, z, w), rel=1e-12)


def test_cell_values_for_counts():
    spec = FunctionalSpec("score-sum", score="count", mode="infinite")
    w = make_cube_window(5, 2)
    z = sample_poisson(spec.input_region(w) if spec.padding else Region.cube(7, 2), seed=SeedStream(3))
    v = cell_values(spec, z, w)
    assert v.sum() == np.count_nonzero(w.fill_contains(z.points))
