import math

import numpy as np
import pytest

from src.errors import PreconditionError, VacuousBoundError
from src.models.profile import Horizon, LinearWeights, profile_from_counts
from src.models.stream import ObservationStream
from src.models.uncertainty import ProxyKind, VarianceProxy
from src.services import estimators, sim_checks, simulator, uncertainty

GT_PROXY_TESTS = [
    ([(1, 2), (2, 1)], 1.0, 4.0, "example profile at r = 1"),
    ([], 1.0, 0.0, "empty profile"),
    ([(1, 10)], 0.5, 7.5, "singletons at r = 0.5"),
]


@pytest.mark.parametrize("pairs, r, expected, msg", GT_PROXY_TESTS)
def test_gt_variance_proxy(pairs, r, expected, msg):
    proxy = uncertainty.gt_variance_proxy(profile_from_counts(pairs), Horizon.of(t=10.0, r=r))
    assert proxy.value == pytest.approx(expected), f"unexpected: {msg}"
    assert proxy.kind == ProxyKind.GT


def test_linear_proxy_matches_gt_proxy_for_gt_weights():
    profile = profile_from_counts([(1, 6), (2, 3), (3, 1)])
    h = Horizon.of(t=10.0, r=0.8)
    linear = uncertainty.linear_variance_proxy(profile, estimators.gt_weights(h, 3))
    assert linear.value == pytest.approx(uncertainty.gt_variance_proxy(profile, h).value)


def test_linear_proxy_is_clamped():
    profile = profile_from_counts([(1, 2)])
    proxy = uncertainty.linear_variance_proxy(profile, LinearWeights(coeffs=(-0.5,)))
    # 0.25 * 2 - 1 < 0
    assert proxy.value == 0.0
    assert proxy.clamped
    assert proxy.raw_value == pytest.approx(-0.5)


def test_gaussian_interval_one_sigma():
    proxy = VarianceProxy.clamp(4.0, ProxyKind.GT)
    lo, hi = uncertainty.gaussian_interval(1.0, proxy, 0.6826894921370859)
    assert lo == pytest.approx(-1.0, abs=1e-6)
    assert hi == pytest.approx(3.0, abs=1e-6)


def test_gaussian_interval_rejects_level():
    proxy = VarianceProxy.clamp(1.0, ProxyKind.GT)
    with pytest.raises(PreconditionError):
        uncertainty.gaussian_interval(0.0, proxy, 1.0)


def test_linear_conservative_interval_widens():
    proxy = VarianceProxy.clamp(1.0, ProxyKind.LINEAR)
    lo, hi = uncertainty.linear_conservative_interval(0.0, proxy, 2.0, 0.95)
    assert lo == pytest.approx(-1.959963984540054 - 2.0)
    assert hi == pytest.approx(1.959963984540054 + 2.0)


def test_linear_bias_bound_of_null_weights():
    h = Horizon.of(t=10.0, r=1.0)
    assert uncertainty.linear_bias_bound(LinearWeights.zeros(2), h, grid=200) == pytest.approx(10.0)


def test_distant_clt_sigma2_is_positive():
    for alpha in (0.2, 0.5, 0.8):
        assert uncertainty.distant_clt_sigma2(alpha, 2.0) > 0
    with pytest.raises(PreconditionError):
        uncertainty.distant_clt_sigma2(1.0, 2.0)


def test_trans_eq_example():
    d = uncertainty.trans_eq_d(1.0, 1.0, 0.4, 2.0, 1.0)
    assert d == pytest.approx(0.3793, abs=1e-4)
    assert 2.0 ** (-(1.0 - d) / (1.0 + d)) * d < 0.4


def test_trans_eq_inequality_on_random_inputs():
    rng = np.random.default_rng(2024)
    for _ in range(2000):
        x, y, k = rng.uniform(0.1, 5.0, size=3)
        c = rng.uniform(1.01, 5.0)
        z = rng.uniform(0.01, 0.99) * k * x * c ** (-y / x)
        d = uncertainty.trans_eq_d(x, y, z, c, k)
        assert c ** (-(y - d) / (x + d)) * k * d < z


@pytest.mark.parametrize(
    "x, y, z, c, k",
    [(1.0, 1.0, 0.4, 1.0, 1.0), (1.0, 1.0, 0.6, 2.0, 1.0), (0.0, 1.0, 0.4, 2.0, 1.0)],
    ids=["c not above one", "z too large", "zero x"],
)
def test_trans_eq_preconditions(x, y, z, c, k):
    with pytest.raises(PreconditionError):
        uncertainty.trans_eq_d(x, y, z, c, k)


def _rich_profile():
    return profile_from_counts([(1, 500), (2, 300), (3, 200)])


def test_tail_bound_at_zero_is_six():
    profile = _rich_profile()
    h = Horizon.of(t=5000.0, r=1.0)
    query = uncertainty.tail_query(profile, h, 0.0, arity_bound=1)
    assert uncertainty.far_future_tail(query, h) == pytest.approx(6.0)


def test_tail_bound_decreases_in_z():
    profile = _rich_profile()
    h = Horizon.of(t=5000.0, r=1.0)
    values = [
        uncertainty.far_future_tail(uncertainty.tail_query(profile, h, z, arity_bound=2), h)
        for z in np.linspace(0.0, 2000.0, 21)
    ]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_d_of_z_rejects_large_z():
    profile = _rich_profile()
    h = Horizon.of(t=5000.0, r=1.0)
    query = uncertainty.tail_query(profile, h, 0.0, arity_bound=1)
    z_max = uncertainty.max_admissible_z(query, h)
    with pytest.raises(PreconditionError):
        uncertainty.d_of_z(query.model_copy(update={"z": z_max * 1.01}), h)


def test_conservative_interval():
    profile = _rich_profile()
    h = Horizon.of(t=5000.0, r=1.0)
    point = estimators.power_law_induced(profile, h, estimators.ratio_alpha(profile))
    lo, hi = uncertainty.conservative_interval(profile, h, arity_bound=1, level=0.5)
    assert lo < point < hi
    assert hi - point == pytest.approx(point - lo)
    query = uncertainty.tail_query(profile, h, hi - point, arity_bound=1)
    assert uncertainty.far_future_tail(query, h) <= 0.5 + 1e-6

    wider_lo, wider_hi = uncertainty.conservative_interval(profile, h, arity_bound=1, level=0.9)
    assert wider_hi - wider_lo >= hi - lo


def test_conservative_interval_is_vacuous_on_tiny_profiles():
    profile = profile_from_counts([(1, 1)])
    with pytest.raises(VacuousBoundError):
        uncertainty.conservative_interval(profile, Horizon.of(t=1.0, r=1.0), arity_bound=1, level=0.9)


def _stream(events):
    return ObservationStream(events=tuple(tuple(e) for e in events))


DEPENDENCE_TESTS = [
    ([(0, 1)], 1.0, 4.0, 2, 4.0, "one pair seen once"),
    ([(0,), (1,), (2,)], 1.0, 0.0, 0, 0.0, "singletons never co-occur"),
    ([(0, 1), (0, 1)], 1.0, 0.0, 2, 0.0, "pair seen twice"),
    ([(0, 1, 2), (3, 4, 5)], 1.0, 24.0, 12, 24.0, "two disjoint triples"),
]


@pytest.mark.parametrize("events, r, epsilon, codiscovered, perfect, msg", DEPENDENCE_TESTS)
def test_dependence_diagnostics(events, r, epsilon, codiscovered, perfect, msg):
    stream = _stream(events)
    h = Horizon.of(t=float(len(events)), r=r)
    assert uncertainty.epsilon_hat(stream, h) == pytest.approx(epsilon), f"epsilon: {msg}"
    assert uncertainty.codiscovery_diagnostic(stream).codiscovered_pairs == codiscovered, msg
    assert uncertainty.perfect_pair_bound(stream, h) == pytest.approx(perfect), f"perfect pairs: {msg}"


def test_dependence_report():
    stream = _stream([(0, 1), (1, 2), (3,)])
    report = uncertainty.dependence_report(stream, Horizon.of(t=3.0, r=0.5))
    assert report.arity == 2
    assert report.codiscovery.discovered_species == 4
    assert report.codiscovery.codiscovered_pairs == 2
    assert report.codiscovery.ratio == pytest.approx(0.5)
    assert math.isfinite(report.epsilon_hat)


def test_gt_intervals_cover_at_the_nominal_level():
    model = simulator.uniform_model(1000)
    h = Horizon.of(t=500.0, r=1.0)

    def covered(outcome):
        point = estimators.good_toulmin(outcome.profile_t, h)
        proxy = uncertainty.gt_variance_proxy(outcome.profile_t, h)
        lo, hi = uncertainty.gaussian_interval(point, proxy, 0.95)
        return lo <= outcome.s_tT_true <= hi

    coverage = np.mean(simulator.map_draws(model, h, covered, reps=1000, seed=17))
    assert 0.90 <= coverage <= 0.98


@pytest.mark.slow
def test_conservative_intervals_cover_the_far_future():
    model = simulator.power_law_model(0.5, n_species=200_000)
    h = Horizon.of(t=20_000.0, r=10.0)

    def covered(outcome):
        try:
            lo, hi = uncertainty.conservative_interval(outcome.profile_t, h, arity_bound=1, level=0.5)
        except VacuousBoundError:
            return None
        return lo <= outcome.s_tT_true <= hi

    results = [c for c in simulator.map_draws(model, h, covered, reps=500, seed=8) if c is not None]
    assert len(results) >= 450
    assert np.mean(results) >= 0.99


def test_epsilon_hat_is_unbiased():
    model = simulator.incidence_model([(0, 1), (1, 2, 3), (4,), (0, 4)], [0.5, 0.3, 0.4, 0.2])
    h = Horizon.of(t=3.0, r=0.8)
    rng = np.random.default_rng(6)
    total = sum(model.intensities) * h.t
    values = []
    for seed in simulator.derive_seeds(6, 4000):
        # Poissonized stream length
        n_events = int(rng.poisson(total))
        if n_events == 0:
            values.append(0.0)
            continue
        values.append(uncertainty.epsilon_hat(simulator.sample_stream(model, n_events, seed), h))
    values = np.asarray(values)
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - sim_checks.epsilon_closed_form(model, h)) <= 4 * se
