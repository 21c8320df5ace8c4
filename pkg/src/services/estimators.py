"""
Point estimators for the number of new species in a future window.
"""
import math
from typing import Optional, Tuple

import numpy as np

from src.app.logging_config import get_logger
from src.errors import EstimateUndefinedError, NumericGuardError, PreconditionError
from src.models.estimator import (
    AlphaEstimate,
    AlphaSource,
    SmoothingDistribution,
    SmoothingKind,
)
from src.models.profile import FrequencyProfile, Horizon, LinearWeights
from src.services.pade import evaluate_without_constant
from src.settings import settings

logger = get_logger(__name__)

SGT_PRESETS = ("binomial", "binomial-half", "poisson")


def good_toulmin(profile: FrequencyProfile, h: Horizon) -> float:
    """
    Good-Toulmin estimate ``-sum_i phi_i (-r)^i`` over the sparse profile.

    No truncation is applied.
    """
    r = h.r
    try:
        terms = [-c * (-r) ** i for i, c in profile.counts.items()]
        value = math.fsum(terms)
    except OverflowError as e:
        raise NumericGuardError(
            f"Good-Toulmin overflow at r={r}, max multiplicity {profile.max_multiplicity}"
        ) from e
    if not math.isfinite(value):
        raise NumericGuardError(
            f"Good-Toulmin overflow at r={r}, max multiplicity {profile.max_multiplicity}"
        )
    return value


def gt_weights(h: Horizon, depth: int) -> LinearWeights:
    """Good-Toulmin coefficients ``H_i = -(-r)^i`` for ``i = 1..depth``."""
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    i = np.arange(1, depth + 1)
    with np.errstate(over="ignore"):
        coeffs = -np.power(-h.r, i.astype(float))
    if not np.all(np.isfinite(coeffs)):
        raise NumericGuardError(f"Good-Toulmin weights overflow at r={h.r}, depth={depth}")
    return LinearWeights(coeffs=tuple(coeffs))


def linear_estimate(profile: FrequencyProfile, weights: LinearWeights) -> float:
    """``sum_i H(i) phi_i``; multiplicities beyond the depth contribute 0."""
    return math.fsum(weights.coefficient(i) * c for i, c in profile.counts.items())


def sgt_weights(h: Horizon, smoothing: SmoothingDistribution, depth: int) -> LinearWeights:
    """Smoothed Good-Toulmin coefficients ``H_i = -P(L >= i)(-r)^i``."""
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    i = np.arange(1, depth + 1)
    tail = smoothing.tail(i)
    with np.errstate(over="ignore", invalid="ignore"):
        powers = np.power(-h.r, i.astype(float))
        # tail 0 times an overflowed power is 0, not nan
        coeffs = np.where(tail > 0, -tail * powers, 0.0)
    if not np.all(np.isfinite(coeffs)):
        raise NumericGuardError(f"SGT weights overflow at r={h.r}, depth={depth}")
    return LinearWeights(coeffs=tuple(coeffs))


def default_smoothing(
    h: Horizon, preset: Optional[str] = None, n: Optional[float] = None
) -> SmoothingDistribution:
    """
    Smoothing law with the usual parameter choice for the given horizon.

    ``n`` is the number of past events and defaults to ``t``. For ``r <= 1``
    every preset reduces to plain Good-Toulmin.

    Args:
        h: Horizon
        preset: "binomial", "binomial-half" or "poisson"; defaults to SGT_SMOOTHING
        n: Past sample size

    Returns:
        SmoothingDistribution with the preset name recorded
    """
    preset = preset or settings.SGT_SMOOTHING
    if preset not in SGT_PRESETS:
        raise PreconditionError(f"Unknown SGT preset '{preset}', expected one of {SGT_PRESETS}")
    n = h.t if n is None else n
    r = h.r

    if r <= 1.0:
        return SmoothingDistribution(kind=SmoothingKind.DEGENERATE, preset=preset)

    argument = n * r * r / (r - 1.0)
    if preset == "binomial":
        k = math.ceil(0.5 * math.log(argument) / math.log(settings.SGT_BINOMIAL_BASE))
        return SmoothingDistribution(
            kind=SmoothingKind.BINOMIAL, k=max(k, 1), q=2.0 / (2.0 + r), preset=preset
        )
    if preset == "binomial-half":
        k = math.ceil(0.5 * math.log2(argument))
        return SmoothingDistribution(
            kind=SmoothingKind.BINOMIAL, k=max(k, 1), q=1.0 / (1.0 + r), preset=preset
        )

    lam = math.log(n * (r + 1.0) ** 2 / (r - 1.0)) / (2.0 * r)
    return SmoothingDistribution(kind=SmoothingKind.POISSON, lam=max(lam, 0.0), preset=preset)


def sgt_depth(profile: FrequencyProfile, smoothing: SmoothingDistribution) -> int:
    """Depth needed to cover the profile; bounded by ``k`` for finite-support laws."""
    depth = max(profile.max_multiplicity, 1)
    if smoothing.kind in (SmoothingKind.BINOMIAL, SmoothingKind.DEGENERATE) and smoothing.k is not None:
        depth = min(depth, max(smoothing.k, 1))
    return depth


def smoothed_good_toulmin(
    profile: FrequencyProfile, h: Horizon, smoothing: Optional[SmoothingDistribution] = None
) -> Tuple[float, SmoothingDistribution]:
    smoothing = smoothing or default_smoothing(h)
    if smoothing.kind == SmoothingKind.DEGENERATE and smoothing.k is None:
        return good_toulmin(profile, h), smoothing
    weights = sgt_weights(h, smoothing, sgt_depth(profile, smoothing))
    return linear_estimate(profile, weights), smoothing


def ratio_alpha(profile: FrequencyProfile) -> AlphaEstimate:
    """Tail index estimate ``phi_1 / S_t``."""
    s_t = profile.s_t
    if s_t == 0:
        raise EstimateUndefinedError("ratio-alpha is undefined when no species were observed")
    return AlphaEstimate(alpha_hat=profile.phi(1) / s_t, source=AlphaSource.RATIO_PHI1)


def power_law_induced(profile: FrequencyProfile, h: Horizon, alpha: AlphaEstimate) -> float:
    """Induced estimate ``S_t((1+r)^alpha - 1)``."""
    return profile.s_t * math.expm1(alpha.alpha_hat * math.log1p(h.r))


def pade_gt(profile: FrequencyProfile, h: Horizon, order: Tuple[int, int] = (2, 3)) -> float:
    """
    Padé-resummed Good-Toulmin estimate.

    Resums ``sum_i (-1)^(i+1) phi_i x^i`` from its first ``num_deg + den_deg + 1``
    coefficients and evaluates it at ``x = r``.
    """
    num_deg, den_deg = order
    coeffs = [(-1.0) ** (i + 1) * profile.phi(i) for i in range(1, num_deg + den_deg + 2)]
    return evaluate_without_constant(coeffs, num_deg, den_deg, h.r)
