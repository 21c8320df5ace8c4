import pytest

from src.errors import EstimateUndefinedError
from src.models.estimator import AlphaEstimate, MethodSpec
from src.models.profile import Horizon, LinearWeights, MethodTag, profile_from_counts
from src.services import estimators
from src.services.predictor import point_estimate, predict, safe_point


def test_gt_prediction_with_interval(small_profile, unit_horizon):
    report = predict(small_profile, unit_horizon, MethodSpec.of("gt"), level=0.95)
    assert report.point == pytest.approx(1.0)
    assert report.variance_proxy == pytest.approx(4.0)
    lo, hi = report.interval
    assert lo == pytest.approx(1.0 - 1.959963984540054 * 2.0)
    assert hi == pytest.approx(1.0 + 1.959963984540054 * 2.0)
    assert report.nominal_level == 0.95
    assert report.diagnostics["s_t"] == 3


def test_null_prediction(small_profile, unit_horizon):
    report = predict(small_profile, unit_horizon, MethodSpec.of("null"))
    assert report.point == 0.0
    assert report.variance_proxy is None
    assert report.interval is None


def test_linear_prediction_with_gt_weights_matches_gt():
    profile = profile_from_counts([(1, 5), (2, 2), (3, 1)])
    h = Horizon.of(t=10.0, r=0.6)
    weights = estimators.gt_weights(h, 4)
    linear = predict(profile, h, MethodSpec.of("linear", weights=weights))
    gt = predict(profile, h, MethodSpec.of("gt"))
    assert linear.point == pytest.approx(gt.point)
    assert linear.variance_proxy == pytest.approx(gt.variance_proxy)


def test_linear_method_needs_weights():
    with pytest.raises(ValueError):
        MethodSpec.of("linear")


def test_hstar_uses_the_weights_provider(small_profile, unit_horizon):
    calls = []

    def provider(h):
        calls.append(h)
        return LinearWeights(coeffs=(1.0, -0.5))

    report = predict(small_profile, unit_horizon, MethodSpec.of("hstar"), hstar=provider)
    assert report.point == pytest.approx(2 * 1.0 - 0.5)
    assert report.diagnostics["depth"] == 2
    assert calls == [unit_horizon]


def test_sgt_short_horizon_reports_preset(small_profile, unit_horizon):
    report = predict(small_profile, unit_horizon, MethodSpec.of("sgt"))
    assert report.point == pytest.approx(1.0)
    assert report.diagnostics["kind"] == "degenerate"
    assert report.variance_proxy == pytest.approx(4.0)


def test_ratio_alpha_prediction_with_fixed_alpha(small_profile):
    h = Horizon.of(t=10.0, r=3.0)
    report = predict(small_profile, h, MethodSpec.of("ratio-alpha", alpha=AlphaEstimate.fixed(0.5)))
    assert report.point == pytest.approx(3.0)
    assert report.diagnostics["alpha_hat"] == 0.5
    assert report.diagnostics["distant_sigma2"] > 0


def test_ratio_alpha_on_empty_profile_is_an_error(unit_horizon):
    with pytest.raises(EstimateUndefinedError):
        predict(profile_from_counts([]), unit_horizon, MethodSpec.of("ratio-alpha"))


def test_ratio_alpha_conservative_interval():
    profile = profile_from_counts([(1, 500), (2, 300), (3, 200)])
    h = Horizon.of(t=5000.0, r=1.0)
    report = predict(profile, h, MethodSpec.of("ratio-alpha"), level=0.5, arity_bound=1)
    lo, hi = report.interval
    assert lo < report.point < hi


def test_point_estimate_reports_pade_degrees(small_profile, unit_horizon):
    _, params = point_estimate(small_profile, unit_horizon, MethodSpec.of("pade", pade_order=(1, 1)))
    assert params == {"num_deg": 1, "den_deg": 1}


def test_safe_point_reports_pade_failure(unit_horizon):
    point, failure = safe_point(profile_from_counts([(4, 2)]), unit_horizon, MethodSpec.of("pade"))
    assert point is None
    assert "singular" in failure


def test_method_tags_round_trip():
    assert {m.value for m in MethodTag} == {
        "gt", "sgt", "linear", "hstar", "ratio-alpha", "pade", "null",
    }
