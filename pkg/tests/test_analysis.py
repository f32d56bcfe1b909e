import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbsim.analysis import (
    AnalysisError,
    SweepPoint,
    build_collapse,
    collapse_spread,
    detect_crossover,
    fit_power_law,
    group_by_N,
    local_slopes,
    ratio_vs_N,
    regime_fits,
    spectrum_distance,
    unit_slope_prefactor,
)


def glued(N, T, sigma=6.0):
    """Stefan-Boltzmann below T = N / sigma, equipartition above."""
    return sigma * T * T if T < N / sigma else (N + 1) * T


def test_fit_examples():
    f = fit_power_law([(T, 6 * T * T) for T in (1, 2, 4, 8)])
    assert f.exponent == pytest.approx(2.0, abs=1e-12) and f.prefactor == pytest.approx(6.0, rel=1e-12)
    assert f.residual < 1e-12
    f = fit_power_law([(T, 65 * T) for T in (0.5, 1.0, 3.0)])
    assert f.exponent == pytest.approx(1.0, abs=1e-12) and f.prefactor == pytest.approx(65.0, rel=1e-12)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0])
def test_fit_recovers_noise_free_laws(p):
    pts = [(T, 3.7 * T ** p) for T in np.geomspace(0.1, 50, 9)]
    f = fit_power_law(pts)
    assert abs(f.exponent - p) < 1e-12 and abs(f.prefactor / 3.7 - 1) < 1e-12 and f.residual < 1e-12


@given(st.permutations(list(range(7))))
def test_fit_is_order_invariant(perm):
    rng = random.Random(1)
    pts = [(1.0 + i, 2.0 * (1.0 + i) ** 1.7 * (1 + 0.1 * rng.random())) for i in range(7)]
    assert fit_power_law([pts[i] for i in perm]) == fit_power_law(pts)


@pytest.mark.parametrize("pts", [
    [(1, 1), (2, 2)],
    [(1, 1), (2, -2), (3, 3)],
    [(0, 1), (2, 2), (3, 3)],
    [(2, 1), (2, 2), (2, 3)],
])
def test_fit_rejects_bad_input(pts):
    with pytest.raises(AnalysisError):
        fit_power_law(pts)


def test_unit_slope_prefactor():
    assert unit_slope_prefactor([(1, 65), (2, 130), (4, 260)]) == pytest.approx(65)
    assert unit_slope_prefactor([(1, 2), (1, 8)]) == pytest.approx(4)
    with pytest.raises(AnalysisError):
        unit_slope_prefactor([])


def test_spectrum_distance_examples():
    r = np.array([3.0, 2.0, 1.0])
    assert spectrum_distance(r, r) == 0
    assert spectrum_distance(2 * r, r) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(AnalysisError):
        spectrum_distance(r, r[:2])
    with pytest.raises(AnalysisError):
        spectrum_distance(r, np.zeros(3))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.data())
def test_spectrum_distance_zero_iff_equal(ref, data):
    if not any(ref):
        ref = ref[:-1] + [1.0]
    m = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=len(ref), max_size=len(ref)))
    assert (spectrum_distance(m, ref) == 0) == (m == ref)


@pytest.mark.parametrize("N", [8, 16, 64])
def test_crossover_on_glued_synthetic_law(N):
    Ts = np.geomspace(N / 60, N * 3, 30)
    pts = [(T, glued(N, T)) for T in Ts]
    E_star = detect_crossover(pts)
    # one grid step in E near the joint: the law is quadratic there
    step = (Ts[1] / Ts[0]) ** 2
    assert E_star is not None
    assert abs(math.log(E_star / (N * N / 6))) <= math.log(step)


def test_crossover_not_found_on_pure_law():
    assert detect_crossover([(T, 6 * T * T) for T in range(1, 12)]) is None
    slopes = local_slopes([(T, 5 * T) for T in range(1, 8)], window=4)
    assert len(slopes) == 4 and all(abs(s - 1) < 1e-12 for _, s in slopes)
    with pytest.raises(AnalysisError):
        local_slopes([(1, 1), (2, 2)], window=1)


def point(N, E, l, xi, mean_E0=1.0, rep=0):
    return SweepPoint(N=N, E_total=E, mode="discrete", seed=1, collisions=1, mean_E0=mean_E0,
                      l=l, xi=xi, replicate=rep)


def test_collapse_of_duplicates_has_zero_spread():
    c = build_collapse([point(16, 100.0, 9.0, 12.0)] * 5)
    assert c.spread == 0 and len(c.rows) == 5


def test_collapse_of_exact_scaling_function():
    pts = [point(N, 0, N * min(1.0, x), N * x) for N in (8, 16, 32, 64) for x in (0.1, 0.3, 0.9, 2.0, 5.0)]
    c = build_collapse(pts)
    assert c.spread == pytest.approx(0, abs=1e-15)
    assert np.all(c.y <= 1 + 1e-12) and np.all(c.x > 0)


def test_collapse_detects_scatter():
    pts = [point(8, 1, 2.0, 4.0), point(64, 1, 32.0, 32.0)]  # same x = 0.5, y = 0.25 vs 0.5
    c = build_collapse(pts)
    assert c.spread == pytest.approx(1 / 3)


def test_collapse_preconditions():
    with pytest.raises(AnalysisError):
        build_collapse([point(8, 1, 2.0, 4.0)])
    with pytest.raises(AnalysisError):
        build_collapse([point(8, 1, 0.0, 4.0), point(8, 2, 2.0, 4.0)])
    assert collapse_spread([1.0, 1.0], [2.0, 2.0]) == 0


def test_sweep_point_ratio_and_grouping():
    pts = [point(16, 100.0, 5, 5, mean_E0=4.0), point(8, 100.0, 5, 5, mean_E0=20.0),
           point(16, 100.0, 5, 5, mean_E0=6.0, rep=1)]
    assert pts[0].ratio == 25.0
    g = group_by_N(pts)
    assert sorted(g) == [8, 16] and [p.replicate for p in g[16]] == [0, 1]
    assert ratio_vs_N(pts, 100.0) == [(8, 5.0), (16, 20.0)]
    assert ratio_vs_N(pts, 7.0) == []


def test_regime_fits_on_synthetic_sweep():
    N, sigma = 64, 6.0
    Ts = np.geomspace(0.5, 80, 40)
    pts = [point(N, glued(N, T, sigma), 1, 1, mean_E0=T) for T in Ts]
    f = regime_fits(pts, N)
    assert f["low_exponent"] == pytest.approx(2.0, abs=1e-9)
    assert f["sigma"] == pytest.approx(sigma, rel=1e-9)
    assert f["high_exponent"] == pytest.approx(1.0, abs=1e-9)
    assert f["high_prefactor"] == pytest.approx(N + 1, rel=1e-9)
    assert f["high_unit_prefactor"] == pytest.approx(N + 1, rel=1e-9)
    assert 0.5 < f["E_star_over_prediction"] < 2


def test_regime_fits_with_too_few_points():
    f = regime_fits([point(8, 1.0, 1, 1), point(8, 2.0, 1, 1)], 8)
    assert f == {"N": 8, "n_points": 2}
