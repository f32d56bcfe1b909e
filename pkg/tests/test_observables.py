import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bbsim.engine import Simulation
from bbsim.model import InitialCondition, ModelParams, init_state
from bbsim.observables import (
    ObservableError,
    RunningAverager,
    RunningStats,
    conservation_drift,
    ipr,
    log_schedule,
)
from bbsim.rng import RngStream

from conftest import ALPHA

spectra = st.lists(st.floats(0.0, 1e6), min_size=1, max_size=80).filter(lambda xs: max(xs) > 0)


def traced_run(N, E, mode, n, seed=1, backend=None):
    params = ModelParams(N, E, mode)
    sim = Simulation.start(params, InitialCondition(), RngStream(seed, (N, 0, 0)), backend=backend)
    naive = RunningAverager(N)
    sim.run(n, observers=[lambda rec, s: naive.record(s.state)])
    return sim, naive


@pytest.mark.parametrize("mode", ["classical", "discrete"])
def test_lazy_means_match_naive_oracle(mode, backend):
    sim, naive = traced_run(32, 40.0, mode, 1000, backend=backend)
    st = sim.stats()
    m0, m = naive.means()
    assert st.count == naive.count == 1000
    assert abs(st.mean_E0 - m0) <= 2 * math.ulp(m0)
    for a, b in zip(st.mean_E, m):
        assert abs(a - b) <= 2 * math.ulp(b)


def test_first_collision_means_equal_post_state(backend):
    sim, _ = traced_run(8, 5.0, "discrete", 1, backend=backend)
    st, s = sim.stats(), sim.state
    assert st.mean_E0 == s.E0 and np.array_equal(st.mean_E, s.energies)


def test_record_linearity_on_short_traces(backend):
    for n in (1, 2, 7, 50):
        sim, naive = traced_run(6, 9.0, "classical", n, backend=backend)
        s0, s = naive.sums()
        st = sim.stats()
        # mean * t reproduces the exact sum up to the final division
        assert abs(st.mean_E0 * n - s0) <= 2 * math.ulp(s0)
        assert np.all(np.abs(st.mean_E * n - s) <= 2 * np.spacing(np.maximum(s, 1e-300)))


def test_constant_state_is_a_fixed_point():
    params = ModelParams(5, 4.0, "classical")
    state = init_state(InitialCondition.parse("explicit:0.5,1,0.25,2,0.25,0"), params, RngStream(1))
    avg = RunningAverager(5)
    for _ in range(13):
        avg.record(state)
    m0, m = avg.means()
    assert m0 == 0.5 and m.tolist() == [1.0, 0.25, 2.0, 0.25, 0.0]


def test_ipr_examples():
    assert ipr([3.0] * 64) == 64
    assert ipr([0, 0, 5.0, 0]) == 1
    with pytest.raises(ObservableError):
        ipr([0.0, 0.0])
    with pytest.raises(ObservableError):
        ipr([])
    with pytest.raises(ObservableError):
        ipr([1.0, -0.5])


def test_ipr_of_planck_spectrum():
    # oracle: 40-digit evaluation of the first 64 Planck energies at beta = 0.252
    mpmath.mp.dps = 40
    a = mpmath.sqrt(mpmath.mpf(1) / 10 / mpmath.mpf("0.51"))
    b = mpmath.mpf("0.252")
    e = [a * i / mpmath.expm1(b * a * i) for i in range(1, 65)]
    oracle = float(mpmath.fsum(e) ** 2 / mpmath.fsum(x * x for x in e))
    i = np.arange(1, 65)
    got = ipr(ALPHA * i / np.expm1(0.252 * ALPHA * i))
    assert got == pytest.approx(oracle, rel=1e-13)
    assert abs(got - 27) < 1


@given(spectra)
def test_ipr_bounds(xs):
    v = ipr(xs)
    assert 1 <= v <= len(xs)
    nz = [x for x in xs if x > 0]
    if len(nz) == 1:
        assert v == 1


@given(st.integers(1, 100), st.floats(1e-6, 1e6))
def test_ipr_uniform_saturates(n, x):
    assert ipr([x] * n) == pytest.approx(n, rel=4e-16 * n)


# nonzero entries stay normal so that scaling by c only rounds, never underflows
normal_spectra = st.lists(st.one_of(st.just(0.0), st.floats(1e-290, 1e6)), min_size=1,
                          max_size=80).filter(lambda xs: max(xs) > 0)


@given(normal_spectra, st.floats(1e-6, 1e6))
def test_ipr_scale_invariant(xs, c):
    a, b = ipr(xs), ipr([c * x for x in xs])
    assert abs(a - b) <= 4 * math.ulp(a)


@given(spectra)
def test_ipr_correctly_rounded(xs):
    q = [Fraction(x) for x in xs]
    exact = sum(q) ** 2 / sum(x * x for x in q)
    assert abs(Fraction(ipr(xs)) - exact) <= Fraction(math.ulp(float(exact))) / 2


def test_conservation_drift_fresh_state_is_zero():
    params = ModelParams(64, 60.0, "discrete")
    for ic in ("particle", "oscillator:32"):
        s = init_state(InitialCondition.parse(ic), params, RngStream(1))
        assert conservation_drift(s, 60.0) <= 2 * math.ulp(1.0)


@given(st.integers(1, 10 ** 8), st.floats(1.05, 10.0))
def test_log_schedule_strictly_increasing_and_final(n, r):
    s = log_schedule(n, r)
    assert s[-1] == n and s[0] == 1
    assert all(a < b for a, b in zip(s, s[1:]))


def test_log_schedule_default_density():
    s = log_schedule(10 ** 7)
    assert 50 < len(s) < 60  # eight per decade
    assert log_schedule(0) == []
    with pytest.raises(ObservableError):
        log_schedule(10, 1.0)


def test_merge_weights_by_count():
    sa, na = traced_run(6, 9.0, "classical", 300, seed=1)
    sb, nb = traced_run(6, 9.0, "classical", 500, seed=2)
    merged = RunningStats.merge([sa.stats(), sb.stats()])
    # oracle: pool every recorded sample of both runs
    pooled0 = math.fsum(na._e0 + nb._e0) / 800
    pooled = [math.fsum(a + b) / 800 for a, b in zip(na._e, nb._e)]
    assert merged.count == 800
    assert merged.mean_E0 == pytest.approx(pooled0, rel=1e-14)
    assert merged.mean_E == pytest.approx(pooled, rel=1e-13)
    with pytest.raises(ObservableError):
        RunningStats.merge([])
    with pytest.raises(ObservableError):
        RunningStats.merge([sa.stats(), traced_run(7, 9.0, "classical", 10)[0].stats()])


def test_stats_sum_rule_and_fields():
    sim, _ = traced_run(16, 25.0, "discrete", 2000)
    st = sim.stats()
    assert st.N == 16 and st.sum_rule_error() < 1e-12
    assert st.mean_field == pytest.approx(25.0 - st.mean_E0, rel=1e-12)
    assert st.ipr() == ipr(st.mean_E)
    assert st.estimator()[0] == st.mean_E0 and st.estimator(True)[0] == st.time_mean_E0
    assert np.all(st.mean_E >= 0) and st.mean_E0 >= 0
