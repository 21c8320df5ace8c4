"""
Method dispatch: point prediction plus the matching uncertainty quantities.
"""
import math
from typing import Callable, Dict, Optional, Tuple

from src.app.logging_config import get_logger
from src.errors import UnseenError
from src.models.estimator import MethodSpec, SmoothingKind
from src.models.profile import FrequencyProfile, Horizon, LinearWeights, MethodTag, PredictionReport
from src.services import estimators, uncertainty
from src.services.hstar_service import HStarService

logger = get_logger(__name__)

WeightsProvider = Callable[[Horizon], LinearWeights]


def point_estimate(
    profile: FrequencyProfile,
    h: Horizon,
    method: MethodSpec,
    hstar: Optional[WeightsProvider] = None,
) -> Tuple[float, Dict[str, object]]:
    """
    Point prediction for ``method`` and the parameters it actually used.

    Returns:
        (point, params)
    """
    tag = method.tag
    if tag == MethodTag.NULL:
        return 0.0, {}
    if tag == MethodTag.GT:
        return estimators.good_toulmin(profile, h), {}
    if tag == MethodTag.SGT:
        point, smoothing = estimators.smoothed_good_toulmin(profile, h, method.smoothing)
        return point, smoothing.describe()
    if tag == MethodTag.LINEAR:
        return estimators.linear_estimate(profile, method.weights), {"depth": method.weights.depth}
    if tag == MethodTag.HSTAR:
        weights = method.weights or (hstar or HStarService().weights)(h)
        return estimators.linear_estimate(profile, weights), {"depth": weights.depth}
    if tag == MethodTag.RATIO_ALPHA:
        alpha = method.alpha or estimators.ratio_alpha(profile)
        return estimators.power_law_induced(profile, h, alpha), {"alpha_hat": alpha.alpha_hat}
    return estimators.pade_gt(profile, h, method.pade_order), {
        "num_deg": method.pade_order[0],
        "den_deg": method.pade_order[1],
    }


def _linear_weights(
    profile: FrequencyProfile, h: Horizon, method: MethodSpec, hstar: Optional[WeightsProvider]
) -> Optional[LinearWeights]:
    if method.tag in (MethodTag.LINEAR,):
        return method.weights
    if method.tag == MethodTag.HSTAR:
        return method.weights or (hstar or HStarService().weights)(h)
    if method.tag == MethodTag.SGT:
        smoothing = method.smoothing or estimators.default_smoothing(h)
        if smoothing.kind == SmoothingKind.DEGENERATE and smoothing.k is None:
            return None
        return estimators.sgt_weights(h, smoothing, estimators.sgt_depth(profile, smoothing))
    return None


def predict(
    profile: FrequencyProfile,
    h: Horizon,
    method: MethodSpec,
    level: Optional[float] = None,
    arity_bound: Optional[int] = None,
    hstar: Optional[WeightsProvider] = None,
) -> PredictionReport:
    """
    Predict the number of new species in ``(t, T]``.

    Variance proxies are attached for Good-Toulmin and linear methods. With ``level``
    a Gaussian interval is attached to those; ratio-alpha gets the conservative
    tail-bound interval when ``arity_bound`` is also given.

    Args:
        profile: Past frequency profile
        h: Horizon
        method: Method and parameters
        level: Nominal interval coverage in (0, 1)
        arity_bound: Bound on the set size, required for ratio-alpha intervals
        hstar: Provider of H* weights for a horizon

    Returns:
        PredictionReport
    """
    if method.tag == MethodTag.HSTAR and method.weights is None:
        provider = hstar or HStarService().weights
        method = method.model_copy(update={"weights": provider(h)})

    point, params = point_estimate(profile, h, method, hstar)
    diagnostics: Dict[str, object] = dict(params)
    diagnostics["s_t"] = profile.s_t
    variance = None
    interval = None

    if method.tag == MethodTag.GT or (
        method.tag == MethodTag.SGT and _linear_weights(profile, h, method, hstar) is None
    ):
        proxy = uncertainty.gt_variance_proxy(profile, h)
    else:
        weights = _linear_weights(profile, h, method, hstar)
        proxy = uncertainty.linear_variance_proxy(profile, weights) if weights else None

    if proxy is not None:
        variance = proxy.value
        diagnostics["variance_clamped"] = proxy.clamped
        if level is not None:
            interval = uncertainty.gaussian_interval(point, proxy, level)

    if method.tag == MethodTag.RATIO_ALPHA:
        alpha = float(diagnostics["alpha_hat"])
        if 0.0 < alpha < 1.0:
            diagnostics["distant_sigma2"] = uncertainty.distant_clt_sigma2(alpha, h.r)
            diagnostics["distant_scale"] = h.t ** (alpha / 2.0)
        if level is not None and arity_bound is not None:
            interval = uncertainty.conservative_interval(profile, h, arity_bound, level)

    logger.debug(
        "Prediction",
        extra={"method": method.tag.value, "r": h.r, "t": h.t, "point": point},
    )
    return PredictionReport(
        method=method.tag,
        point=point,
        variance_proxy=variance,
        interval=interval,
        nominal_level=level if interval is not None else None,
        diagnostics=diagnostics,
    )


def safe_point(
    profile: FrequencyProfile,
    h: Horizon,
    method: MethodSpec,
    hstar: Optional[WeightsProvider] = None,
) -> Tuple[Optional[float], Optional[str]]:
    """Point estimate, or ``(None, message)`` when the method fails on this input."""
    try:
        point, _ = point_estimate(profile, h, method, hstar)
    except UnseenError as e:
        return None, str(e)
    if not math.isfinite(point):
        return None, "non-finite estimate"
    return point, None
