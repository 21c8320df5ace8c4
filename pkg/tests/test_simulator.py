import json

import numpy as np
import pytest

from src.errors import DataError, PreconditionError
from src.models.estimator import MethodSpec
from src.models.profile import Horizon, profile_from_counts
from src.models.sim import ModelKind
from src.services import estimators, simulator, uncertainty


def test_simulation_is_deterministic():
    model = simulator.uniform_model(50)
    h = Horizon.of(t=40.0, r=1.5)
    a = simulator.simulate(model, h, seed=11)
    b = simulator.simulate(model, h, seed=11)
    assert a.profile_t == b.profile_t
    assert a.s_tT_true == b.s_tT_true
    np.testing.assert_array_equal(a.future_counts, b.future_counts)


def test_single_species_discovery_rule():
    model = simulator.classical_model([1.0])
    h = Horizon.of(t=5.0, r=1.0)
    for seed in range(20):
        outcome = simulator.simulate(model, h, seed)
        seen_before = outcome.past_counts[0] > 0
        seen_after = outcome.future_counts[0] > 0
        assert outcome.s_tT_true == int(not seen_before and seen_after)


def test_zero_intensities_produce_nothing():
    model = simulator.classical_model([0.0, 0.0])
    outcome = simulator.simulate(model, Horizon.of(t=10.0, r=1.0), seed=0)
    assert outcome.profile_t.s_t == 0
    assert outcome.s_tT_true == 0


def test_duplicate_sets_and_members_are_merged():
    merged = simulator.incidence_model([(0, 0, 1), (1, 0)], [0.5, 0.25])
    assert merged.sets == [(0, 1)]
    assert merged.intensities == [0.75]
    np.testing.assert_allclose(merged.species_masses(), [0.75, 0.75])


def test_incidence_counts_sum_over_sets():
    model = simulator.incidence_model([(0, 1), (1, 2)], [2.0, 3.0])
    outcome = simulator.simulate(model, Horizon.of(t=10.0, r=1.0), seed=3)
    # species 1 belongs to both sets
    assert outcome.past_counts[1] == outcome.past_counts[0] + outcome.past_counts[2]


def test_expected_new_species_matches_simulation():
    model = simulator.uniform_model(1000)
    h = Horizon.of(t=500.0, r=1.0)
    outcomes = simulator.simulate_many(model, h, reps=200, seed=5)
    values = np.array([o.s_tT_true for o in outcomes], dtype=float)
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - simulator.expected_s_tT(model, h)) <= 4 * se


def test_gt_mse_matches_closed_form():
    model = simulator.uniform_model(2000)
    h = Horizon.of(t=100.0, r=0.8)
    estimate = simulator.mc_mse(model, h, MethodSpec.of("gt"), reps=400, seed=1)
    closed = simulator.gt_mse_closed_form(model, h)
    assert abs(estimate.mse - closed) <= 4 * estimate.se


@pytest.mark.slow
def test_gt_worst_case_mse_on_a_large_uniform_model():
    r, t = 0.8, 100.0
    model = simulator.uniform_model(100_000)
    h = Horizon.of(t=t, r=r)
    estimate = simulator.mc_mse(model, h, MethodSpec.of("gt"), reps=2000, seed=21)
    target = r * (r + 1.0) * t
    assert simulator.gt_mse_closed_form(model, h) == pytest.approx(target, rel=0.02)
    assert abs(estimate.mse - target) <= 0.02 * target + 3 * estimate.se


@pytest.mark.parametrize("r", [0.3, 0.7, 1.0])
def test_good_toulmin_is_unbiased_up_to_r_one(r):
    model = simulator.uniform_model(300)
    h = Horizon.of(t=200.0, r=r)

    def error(outcome):
        return estimators.good_toulmin(outcome.profile_t, h) - outcome.s_tT_true

    errors = np.array(simulator.map_draws(model, h, error, reps=2000, seed=12))
    se = errors.std(ddof=1) / np.sqrt(errors.size)
    assert abs(errors.mean()) <= 4 * se


@pytest.mark.parametrize("r", [0.5, 0.9])
def test_finite_support_estimates_vanish(r):
    model = simulator.classical_model([0.2, 0.3, 0.5])
    h = Horizon.of(t=1e4 / 0.2, r=r)
    for outcome in simulator.simulate_many(model, h, reps=50, seed=3):
        assert abs(estimators.good_toulmin(outcome.profile_t, h)) < 1e-3
        assert uncertainty.gt_variance_proxy(outcome.profile_t, h).value < 1e-3


def test_map_draws_reduces_each_outcome():
    model = simulator.uniform_model(50)
    h = Horizon.of(t=40.0, r=1.0)
    outcomes = simulator.simulate_many(model, h, reps=20, seed=9)
    reduced = simulator.map_draws(model, h, lambda o: o.s_tT_true, reps=20, seed=9, threads=2)
    assert reduced == [o.s_tT_true for o in outcomes]


def test_closed_form_needs_classical_model():
    model = simulator.incidence_model([(0, 1)], [1.0])
    with pytest.raises(PreconditionError):
        simulator.gt_mse_closed_form(model, Horizon.of(t=1.0, r=1.0))


def test_mc_mse_needs_two_reps():
    with pytest.raises(PreconditionError):
        simulator.mc_mse(simulator.uniform_model(3), Horizon.of(t=1.0, r=1.0), MethodSpec.of("gt"), reps=1)


def test_power_law_model():
    normalized = simulator.power_law_model(0.5, n_species=100)
    assert sum(normalized.weights) == pytest.approx(1.0)
    assert normalized.weights[0] > normalized.weights[-1]
    scaled = simulator.power_law_model(0.5, n_species=10, c=2.0)
    assert scaled.weights[3] == pytest.approx((4 / 2.0) ** -2.0)
    with pytest.raises(PreconditionError):
        simulator.power_law_model(1.0, n_species=10)


def test_adversarial_worst_case_matches_uniform_closed_form():
    h = Horizon.of(t=10.0, r=0.5)
    weights = estimators.gt_weights(h, 60)
    worst = simulator.adversarial_worst_case(weights, h, [0.01])
    closed = simulator.gt_mse_closed_form(simulator.uniform_model(100), h)
    assert worst.mse == pytest.approx(closed, rel=1e-6)


def test_adversarial_worst_case_picks_the_largest():
    h = Horizon.of(t=10.0, r=1.0)
    worst = simulator.adversarial_worst_case(estimators.gt_weights(h, 2), h, [0.5, 0.1, 0.03])
    assert worst.mse == max(worst.values)
    with pytest.raises(PreconditionError):
        simulator.adversarial_worst_case(estimators.gt_weights(h, 2), h, [0.0])


def test_derive_seeds_is_stable():
    assert simulator.derive_seeds(7, 5) == simulator.derive_seeds(7, 5)
    assert len(set(simulator.derive_seeds(7, 50))) == 50
    assert simulator.derive_seeds(7, 3) != simulator.derive_seeds(8, 3)


def test_run_parallel_keeps_order():
    assert simulator.run_parallel(lambda k: k * k, range(10), threads=4) == [k * k for k in range(10)]


def test_profiles_add_across_independent_streams():
    weights = estimators.gt_weights(Horizon.of(t=10.0, r=0.5), 5)
    a = profile_from_counts([(1, 3), (2, 2)])
    b = profile_from_counts([(1, 1), (5, 1)])
    assert estimators.linear_estimate(a + b, weights) == pytest.approx(
        estimators.linear_estimate(a, weights) + estimators.linear_estimate(b, weights)
    )


def test_sample_stream():
    model = simulator.incidence_model([(0, 1), (2,)], [1.0, 3.0], label="toy")
    stream = simulator.sample_stream(model, 200, seed=4)
    assert len(stream) == 200
    assert stream.source_label == "toy"
    assert set(stream.events) <= {(0, 1), (2,)}
    assert simulator.sample_stream(model, 200, seed=4) == stream


def test_sample_stream_from_classical_model_is_classical():
    stream = simulator.sample_stream(simulator.uniform_model(5), 30, seed=0)
    assert stream.is_classical
    assert stream.labels == ("0", "1", "2", "3", "4")


def test_model_from_document():
    classical = simulator.model_from_document({"weights": [0.5, 0.5]})
    assert classical.kind == ModelKind.CLASSICAL
    incidence = simulator.model_from_document(
        {"sets": [{"species": [0, 1], "intensity": 2.0}], "label": "pair"}
    )
    assert incidence.kind == ModelKind.INCIDENCE
    assert incidence.label == "pair"
    with pytest.raises(DataError):
        simulator.model_from_document({"weights": [-1.0]})


def test_load_model(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"weights": [1.0, 2.0]}))
    assert simulator.load_model(str(path)).n_species == 2
    path.write_text("{not json")
    with pytest.raises(DataError):
        simulator.load_model(str(path))
