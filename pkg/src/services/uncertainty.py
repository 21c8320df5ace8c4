"""
Variance proxies, prediction intervals, far-future tail bounds and incidence diagnostics.
"""
import math
from typing import Optional, Tuple

from scipy import optimize, special, stats

from src.app.logging_config import get_logger
from src.errors import NumericGuardError, PreconditionError, VacuousBoundError
from src.models.profile import FrequencyProfile, Horizon, LinearWeights, s_at_least
from src.models.stream import ObservationStream
from src.models.uncertainty import (
    CodiscoveryReport,
    DependenceReport,
    ProxyKind,
    TailBoundQuery,
    VarianceProxy,
)
from src.services.estimators import good_toulmin, linear_estimate, power_law_induced, ratio_alpha
from src.services.ghopt import eval_gh
from src.services.pair_stats import PairStatistics
from src.settings import settings

logger = get_logger(__name__)


def gt_variance_proxy(profile: FrequencyProfile, h: Horizon) -> VarianceProxy:
    """``sum_i phi_i r^(2i)`` plus the Good-Toulmin estimate."""
    if h.r > 1.0:
        logger.warning(
            "Good-Toulmin variance proxy used beyond r = 1; Gaussian intervals are not justified",
            extra={"r": h.r},
        )
    try:
        spread = math.fsum(c * h.r ** (2 * i) for i, c in profile.counts.items())
    except OverflowError as e:
        raise NumericGuardError(f"variance proxy overflow at r={h.r}") from e
    return VarianceProxy.clamp(spread + good_toulmin(profile, h), ProxyKind.GT)


def linear_variance_proxy(profile: FrequencyProfile, weights: LinearWeights) -> VarianceProxy:
    """``sum_i H(i)^2 phi_i`` plus the linear estimate, clamped at 0."""
    spread = math.fsum(weights.coefficient(i) ** 2 * c for i, c in profile.counts.items())
    proxy = VarianceProxy.clamp(spread + linear_estimate(profile, weights), ProxyKind.LINEAR)
    if proxy.clamped:
        logger.warning("Linear variance proxy clamped at zero", extra={"raw": proxy.raw_value})
    return proxy


def _check_level(level: float) -> None:
    if not (0.0 < level < 1.0):
        raise PreconditionError(f"level must lie in (0, 1), got {level}")


def gaussian_interval(point: float, proxy: VarianceProxy, level: float) -> Tuple[float, float]:
    """``point -/+ z_{(1+level)/2} sqrt(proxy)``; negative lower ends are kept."""
    _check_level(level)
    half = stats.norm.ppf((1.0 + level) / 2.0) * math.sqrt(proxy.value)
    return point - half, point + half


def linear_bias_bound(weights: LinearWeights, h: Horizon, grid: Optional[int] = None) -> float:
    """Worst-case absolute bias of a linear estimator over all distributions."""
    return math.sqrt(eval_gh(weights, h, grid).y_b)


def linear_conservative_interval(
    point: float, proxy: VarianceProxy, bias_bound: float, level: float
) -> Tuple[float, float]:
    """Gaussian interval widened by the worst-case bias on both sides."""
    lo, hi = gaussian_interval(point, proxy, level)
    return lo - bias_bound, hi + bias_bound


def distant_clt_sigma2(alpha: float, r: float) -> float:
    """Limiting variance of the induced estimator's error on the ``t^(alpha/2)`` scale."""
    if not (0.0 < alpha < 1.0):
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    g = (1.0 + r) ** alpha
    return special.gamma(1.0 - alpha) * (
        (2.0 ** alpha - 1.0) * g
        - 2.0 * g * ((1.0 + 1.0 / (1.0 + r)) ** alpha - 1.0)
        + 2.0 ** alpha
        - 1.0
    )


def tail_query(
    profile: FrequencyProfile,
    h: Horizon,
    z: float,
    arity_bound: int,
    p_split: Optional[float] = None,
) -> TailBoundQuery:
    """Plug-in tail-bound query for the ratio-alpha prediction on ``profile``."""
    alpha = ratio_alpha(profile)
    point = power_law_induced(profile, h, alpha)
    s_t = float(profile.s_t)
    c_hat = None
    if 0.0 < alpha.alpha_hat < 1.0:
        c_hat = s_t / (special.gamma(1.0 - alpha.alpha_hat) * h.t ** alpha.alpha_hat)
    return TailBoundQuery(
        z=z,
        p_split=settings.P_SPLIT if p_split is None else p_split,
        arity_bound=arity_bound,
        s_t=s_t,
        s_t2=float(s_at_least(profile, 2)),
        s_T_hat=s_t + point,
        alpha_hat=alpha.alpha_hat,
        c_hat=c_hat,
    )


def max_admissible_z(q: TailBoundQuery, h: Horizon) -> float:
    """Validity threshold ``(1/p)(1+r)^alpha (1 + 2 ln(1+r)) S_t``."""
    log_growth = math.log1p(h.r)
    return (
        (1.0 + h.r) ** q.alpha_hat * (1.0 + 2.0 * log_growth) * q.s_t / q.p_split
    )


def d_of_z(q: TailBoundQuery, h: Horizon) -> float:
    """Deviation allowed in S_t and S_t^(2) for a total deviation ``z``."""
    if q.s_t <= 0:
        raise PreconditionError("tail bound needs S_t > 0")
    z_max = max_admissible_z(q, h)
    if q.z >= z_max and q.z > 0:
        raise PreconditionError(f"z={q.z} exceeds the admissible range; max admissible z is {z_max}")
    log_growth = math.log1p(h.r)
    shrink = (1.0 + h.r) ** -q.alpha_hat
    pz = q.p_split * q.z
    return (pz * q.s_t * shrink) / (
        (1.0 + 2.0 * log_growth) * q.s_t + pz * (2.0 - q.alpha_hat) * log_growth * shrink
    )


def _exp_term(numerator: float, denominator: float) -> float:
    if denominator <= 0.0:
        return 0.0 if numerator > 0.0 else 1.0
    return math.exp(-numerator / denominator)


def far_future_tail(q: TailBoundQuery, h: Horizon) -> float:
    """
    Six-term bound on ``P(|S_hat - S| > z)`` for the ratio-alpha prediction.

    The value lies in [0, 6]; callers cap it at 1 when reading it as a probability.
    """
    d = d_of_z(q, h)
    B = q.arity_bound
    u = q.q_split * q.z
    w = 4.0 * B - 2.0
    return (
        _exp_term(u * u, 2.0 * B * q.s_T_hat)
        + _exp_term(u * u, 2.0 * B * q.s_T_hat + 2.0 / 3.0 * B * u)
        + _exp_term(d * d, 2.0 * B * q.s_t)
        + _exp_term(d * d, 2.0 * B * q.s_t + 2.0 / 3.0 * B * d)
        + _exp_term(d * d, w * q.s_t2)
        + _exp_term(d * d, w * q.s_t2 + w / 3.0 * d)
    )


def conservative_interval(
    profile: FrequencyProfile,
    h: Horizon,
    arity_bound: int,
    level: float,
    p_split: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Interval around the ratio-alpha prediction from the far-future tail bound.

    Bisects for the smallest z with ``min(1, tail(z)) <= 1 - level``.

    Raises:
        VacuousBoundError: If no admissible z reaches the level
    """
    _check_level(level)
    base = tail_query(profile, h, 0.0, arity_bound, p_split)
    point = power_law_induced(profile, h, ratio_alpha(profile))
    target = 1.0 - level
    z_hi = max_admissible_z(base, h) * (1.0 - 1e-9)

    def excess(z: float) -> float:
        return min(1.0, far_future_tail(base.model_copy(update={"z": z}), h)) - target

    if z_hi <= 0.0 or excess(z_hi) > 0.0:
        raise VacuousBoundError(
            f"bound vacuous at level {level}: tail at the largest admissible z={z_hi:.6g} "
            f"stays above {target:.6g}"
        )
    xtol = max(1e-9, 1e-9 * z_hi)
    z = optimize.bisect(excess, 0.0, z_hi, xtol=xtol)
    z = min(z + xtol, z_hi)
    logger.debug(
        "Conservative interval",
        extra={"z": z, "level": level, "arity_bound": arity_bound, "point": point},
    )
    return point - z, point + z


def trans_eq_d(x: float, y: float, z: float, c: float, k: float) -> float:
    """
    ``d = x^2 z c^(y/x) / (k x^2 + (x + y) z c^(y/x) ln c)``.

    For admissible inputs ``c^(-(y-d)/(x+d)) k d < z``.
    """
    if not (c > 1.0 and x > 0 and y > 0 and z > 0 and k > 0):
        raise PreconditionError("trans_eq_d needs c > 1 and x, y, z, k > 0")
    growth = c ** (y / x)
    if z / (k * x) * growth >= 1.0:
        raise PreconditionError("trans_eq_d needs (z / (k x)) c^(y/x) < 1")
    return x * x * z * growth / (k * x * x + (x + y) * z * growth * math.log(c))


def epsilon_hat(stream: ObservationStream, h: Horizon, precomputed: Optional[PairStatistics] = None) -> float:
    """
    Unbiased estimate of the dependence term of the MSE.

    Sums ``(r^(2N_and) - (-r)^N_and) (-r)^N_xor`` over ordered pairs of distinct species.
    """
    pair_stats = precomputed or PairStatistics.build(stream)
    r = h.r
    try:
        terms = []
        for (x, y), both in pair_stats.pair_counts.items():
            xor = pair_stats.symmetric_difference(x, y, both)
            terms.append(2.0 * (r ** (2 * both) - (-r) ** both) * (-r) ** xor)
        value = math.fsum(terms)
    except OverflowError as e:
        raise NumericGuardError(f"epsilon estimate overflow at r={r}") from e
    if not math.isfinite(value):
        raise NumericGuardError(f"epsilon estimate overflow at r={r}")
    return value


def codiscovery_diagnostic(
    stream: ObservationStream, precomputed: Optional[PairStatistics] = None
) -> CodiscoveryReport:
    """Ordered pairs first seen together in the same event, relative to ``S_t``."""
    pair_stats = precomputed or PairStatistics.build(stream)
    discovered = pair_stats.discovered_species
    ratio = pair_stats.codiscovered_pairs / discovered if discovered else 0.0
    return CodiscoveryReport(
        codiscovered_pairs=pair_stats.codiscovered_pairs,
        discovered_species=discovered,
        ratio=ratio,
    )


def perfect_pair_bound(
    stream: ObservationStream, h: Horizon, precomputed: Optional[PairStatistics] = None
) -> float:
    """``r(r+1)`` times the number of ordered pairs co-observed exactly once."""
    pair_stats = precomputed or PairStatistics.build(stream)
    once = sum(1 for both in pair_stats.pair_counts.values() if both == 1)
    return h.r * (h.r + 1.0) * 2 * once


def dependence_report(stream: ObservationStream, h: Horizon) -> DependenceReport:
    pair_stats = PairStatistics.build(stream)
    return DependenceReport(
        r=h.r,
        t=h.t,
        epsilon_hat=epsilon_hat(stream, h, pair_stats),
        codiscovery=codiscovery_diagnostic(stream, pair_stats),
        perfect_pair_bound=perfect_pair_bound(stream, h, pair_stats),
        arity=stream.arity,
    )
