"""
Monte-Carlo and quadrature checks of the closed-form identities and bounds.
"""
import math
import warnings
from itertools import permutations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from src.app.logging_config import get_logger
from src.errors import NumericGuardError, PreconditionError
from src.models.estimator import MethodSpec
from src.models.profile import Horizon, MethodTag
from src.models.sim import (
    AlphaRateReport,
    AlphaRateRow,
    ConcentrationReport,
    DecompositionReport,
    IdentityCheck,
    ModelKind,
    PhiTailRow,
    SimOutcome,
    SpeciesModel,
    TailRow,
)
from src.services import simulator
from src.settings import settings

logger = get_logger(__name__)

MAX_DECOMPOSITION_SPECIES = 20
ALPHA_RATE_BATCHES = 10
MIN_BATCH_SIZE = 20


def _binomial_band(bound: float, reps: int) -> float:
    return 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / reps)


def _exp_bound(numerator: float, denominator: float) -> float:
    if denominator <= 0.0:
        return 0.0 if numerator > 0.0 else 1.0
    return math.exp(-numerator / denominator)


def pair_masses(model: SpeciesModel) -> np.ndarray:
    """``M_{x and y}``: intensity of the sets containing both x and y."""
    n = model.n_species
    both = np.zeros((n, n))
    if model.kind == ModelKind.INCIDENCE:
        for members, mu in zip(model.sets, model.intensities):
            for x, y in permutations(members, 2):
                both[x, y] += mu
    return both


def delta_closed_form(model: SpeciesModel, h: Horizon) -> float:
    """Per-species part of the Good-Toulmin MSE."""
    lam = model.species_masses() * h.t
    return float(np.sum(np.exp(-lam) * (-np.expm1(-h.r * lam) + np.expm1(lam * h.r * h.r))))


def epsilon_closed_form(model: SpeciesModel, h: Horizon) -> float:
    """Cross-species part: ``sum e^{-(1+r) M_or t} (e^{r(r+1) M_and t} - 1)`` over ordered pairs."""
    masses = model.species_masses()
    both = pair_masses(model)
    either = masses[:, None] + masses[None, :] - both
    mask = both > 0
    terms = np.exp(-(1.0 + h.r) * either[mask] * h.t) * np.expm1(h.r * (h.r + 1.0) * both[mask] * h.t)
    return float(np.sum(terms))


def error_decomposition_check(
    model: SpeciesModel, h: Horizon, reps: Optional[int] = None, seed: int = 0
) -> DecompositionReport:
    """Compare the Monte-Carlo MSE of Good-Toulmin with the closed-form ``delta + epsilon``."""
    if model.n_species > MAX_DECOMPOSITION_SPECIES:
        raise PreconditionError(
            f"error decomposition check supports at most {MAX_DECOMPOSITION_SPECIES} species"
        )
    mc = simulator.mc_mse(model, h, MethodSpec(tag=MethodTag.GT), reps, seed)
    delta = delta_closed_form(model, h)
    epsilon = epsilon_closed_form(model, h)
    gap = abs(mc.mse - (delta + epsilon))

    masses = model.species_masses()
    both = pair_masses(model)
    either = masses[:, None] + masses[None, :] - both
    mask = both > 0
    e_s_t = simulator.expected_s_t(model, h.t)
    e_s_tT = simulator.expected_s_tT(model, h)
    B = model.arity_bound
    factor = h.r * (h.r + 1.0)

    report = DecompositionReport(
        mc_mse=mc.mse,
        se=mc.se,
        delta=delta,
        epsilon=epsilon,
        gap=gap,
        passed=gap <= 3.0 * mc.se,
        expected_s_t=e_s_t,
        expected_s_tT=e_s_tT,
        arity_bound=B,
        epsilon_arity_bound=factor * (B - 1) * e_s_t,
        epsilon_connectedness_bound=factor * float(np.sum(both[mask] / either[mask])),
        delta_bound=h.r * h.r * e_s_t + e_s_tT,
    )
    logger.info(
        "Error decomposition check",
        extra={"passed": report.passed, "gap": gap, "se": mc.se, "reps": mc.reps},
    )
    return report


def concentration_check(
    model: SpeciesModel,
    h: Horizon,
    i: int,
    reps: Optional[int] = None,
    seed: int = 0,
    z_grid: Optional[Sequence[float]] = None,
    arity_bound: Optional[int] = None,
    threads: Optional[int] = None,
) -> ConcentrationReport:
    """
    Empirical tails of ``S_t^(i)`` and ``phi_i`` against the size-biased-coupling bounds.

    A row passes when the empirical frequency is at most the bound plus three
    binomial standard errors.
    """
    if i < 1:
        raise PreconditionError("concentration check needs i >= 1")
    reps = settings.SIM_REPS if reps is None else reps
    B = model.arity_bound if arity_bound is None else arity_bound
    if B < model.arity_bound:
        raise PreconditionError(f"arity bound {B} is below the model arity {model.arity_bound}")

    lam = model.species_masses() * h.t
    e_i = float(np.sum(stats.poisson.sf(i - 1, lam)))
    e_next = float(np.sum(stats.poisson.sf(i, lam)))
    e_phi = e_i - e_next

    def tails(outcome: SimOutcome) -> Tuple[int, int]:
        past = outcome.past_counts
        return int(np.count_nonzero(past >= i)), int(np.count_nonzero(past == i))

    drawn = simulator.map_draws(model, h, tails, reps, seed, threads)
    s_i = np.array([d[0] for d in drawn], dtype=float)
    phi = np.array([d[1] for d in drawn], dtype=float)

    f = (B - 1) * i + 1
    g = B * i + B - i
    if z_grid is None:
        z_grid = np.linspace(0.0, 4.0 * math.sqrt(max(f * e_i, 1.0)), 9)

    rows: List[TailRow] = []
    phi_rows: List[PhiTailRow] = []
    for z in z_grid:
        z = float(z)
        bound_lower = _exp_bound(z * z, 2.0 * f * e_i)
        bound_upper = _exp_bound(z * z, 2.0 * f * e_i + 2.0 / 3.0 * f * z)
        emp_lower = float(np.mean(s_i - e_i <= -z))
        emp_upper = float(np.mean(s_i - e_i >= z))
        rows.append(TailRow(
            z=z,
            empirical_lower=emp_lower,
            bound_lower=bound_lower,
            empirical_upper=emp_upper,
            bound_upper=bound_upper,
            passed=(emp_lower <= bound_lower + _binomial_band(bound_lower, reps)
                    and emp_upper <= bound_upper + _binomial_band(bound_upper, reps)),
        ))

        phi_bound = min(1.0, (
            _exp_bound(z * z, 8.0 * f * e_i)
            + _exp_bound(z * z, 8.0 * f * e_i + 4.0 / 3.0 * f * z)
            + _exp_bound(z * z, 8.0 * g * e_next)
            + _exp_bound(z * z, 8.0 * g * e_next + 4.0 / 3.0 * g * z)
        ))
        emp_phi = float(np.mean(np.abs(phi - e_phi) > z))
        phi_rows.append(PhiTailRow(
            z=z,
            empirical=emp_phi,
            bound=phi_bound,
            passed=emp_phi <= phi_bound + _binomial_band(phi_bound, reps),
        ))

    passed = all(row.passed for row in rows) and all(row.passed for row in phi_rows)
    logger.info(
        "Concentration check",
        extra={"i": i, "arity_bound": B, "reps": reps, "passed": passed},
    )
    return ConcentrationReport(
        i=i,
        arity_bound=B,
        reps=reps,
        expected_value=e_i,
        expected_phi=e_phi,
        rows=rows,
        phi_rows=phi_rows,
        passed=passed,
    )


def _quad(fn, lo: float, hi: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
        except integrate.IntegrationWarning as e:
            raise NumericGuardError(f"quadrature did not converge on [{lo}, {hi}]: {e}") from e
    if not math.isfinite(value):
        raise NumericGuardError(f"quadrature returned a non-finite value on [{lo}, {hi}]")
    return value


def laplace_identity_check(model: SpeciesModel, t: float) -> List[IdentityCheck]:
    """
    Closed-form expectations of ``S_t``, ``S_t^(2)`` and ``phi_1`` against quadrature of
    the Laplace transform of ``nu(x) = #{s: M_s > x}``.
    """
    if t <= 0:
        raise PreconditionError("t must be positive")
    masses = model.species_masses()
    masses = masses[masses > 0]
    lam = masses * t
    e_s_t = float(np.sum(-np.expm1(-lam)))
    e_s_t2 = float(np.sum(stats.poisson.sf(1, lam)))
    e_phi1 = float(np.sum(lam * np.exp(-lam)))

    # nu is constant between consecutive distinct masses
    levels, multiplicity = np.unique(masses, return_counts=True)
    above = np.cumsum(multiplicity[::-1])[::-1]
    edges = np.concatenate(([0.0], levels))
    transform = 0.0
    moment = 0.0
    for j in range(levels.size):
        lo, hi = edges[j], edges[j + 1]
        transform += above[j] * _quad(lambda x: math.exp(-x * t), lo, hi)
        moment += above[j] * _quad(lambda x: x * math.exp(-x * t), lo, hi)

    # L(t) = transform, L'(t) = -moment
    checks = [
        ("E[S_t] = t L(t)", e_s_t, t * transform),
        ("E[S_t^(2)] = -t^2 L'(t)", e_s_t2, t * t * moment),
        ("E[phi_1] = t L(t) + t^2 L'(t)", e_phi1, t * transform - t * t * moment),
    ]
    results = []
    for name, lhs, rhs in checks:
        relerr = abs(lhs - rhs) / max(abs(lhs), 1e-300)
        results.append(IdentityCheck(name=name, lhs=lhs, rhs=rhs, relerr=relerr))
    logger.info(
        "Laplace identity check",
        extra={"t": t, "max_relerr": max(c.relerr for c in results), "species": int(masses.size)},
    )
    return results


def alpha_rate_check(
    alpha: float,
    c: Optional[float],
    t_grid: Sequence[float],
    reps: Optional[int] = None,
    seed: int = 0,
    n_species: Optional[int] = None,
    level: float = 0.05,
    batches: Optional[int] = None,
    threads: Optional[int] = None,
) -> AlphaRateReport:
    """
    Scaled errors ``|alpha_hat - alpha| t^(alpha/2)`` across ``t_grid`` on a power-law model.

    The replications at each t are split into ``batches`` equal blocks (by default as
    many blocks of at least MIN_BATCH_SIZE as fit, up to ALPHA_RATE_BATCHES) and the
    95th percentile is taken per block. The check passes when a one-sided Kendall rank test
    of block percentile against t finds no increasing trend at ``level``.
    """
    if not (0.0 < alpha < 1.0):
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    reps = settings.SIM_REPS if reps is None else reps
    if batches is None:
        batches = min(ALPHA_RATE_BATCHES, reps // MIN_BATCH_SIZE)
    if batches < 2:
        raise PreconditionError(
            f"alpha rate check needs at least 2 batches of {MIN_BATCH_SIZE} replications per t"
        )
    if reps < batches * MIN_BATCH_SIZE:
        raise PreconditionError(
            f"alpha rate check needs at least {batches * MIN_BATCH_SIZE} replications for {batches} batches"
        )
    model = simulator.power_law_model(alpha, n_species, c)

    rows: List[AlphaRateRow] = []
    batch_t: List[float] = []
    batch_q95: List[float] = []
    for index, t in enumerate(t_grid):
        t = float(t)
        scale = t ** (alpha / 2.0)

        def scaled_error(outcome: SimOutcome) -> Optional[float]:
            s_t = outcome.profile_t.s_t
            if s_t == 0:
                return None
            return abs(outcome.profile_t.phi(1) / s_t - alpha) * scale

        drawn = simulator.map_draws(model, Horizon.of(t=t, r=1.0), scaled_error, reps, seed + index, threads)
        scaled = np.array([e for e in drawn if e is not None], dtype=float)
        if scaled.size < batches * MIN_BATCH_SIZE:
            raise NumericGuardError(f"too few replications with S_t > 0 at t={t}")

        per_batch = [float(np.quantile(block, 0.95)) for block in np.array_split(scaled, batches)]
        rows.append(AlphaRateRow(
            t=t,
            median=float(np.median(scaled)),
            q95=float(np.quantile(scaled, 0.95)),
            batch_q95=per_batch,
        ))
        batch_t.extend([t] * batches)
        batch_q95.extend(per_batch)

    result = stats.kendalltau(batch_t, batch_q95, alternative="greater")
    tau = float(result.statistic) if math.isfinite(result.statistic) else 0.0
    p_value = float(result.pvalue) if math.isfinite(result.pvalue) else 1.0
    passed = p_value >= level
    logger.info(
        "Alpha rate check",
        extra={"alpha": alpha, "tau": tau, "p_value": p_value, "batches": batches, "passed": passed},
    )
    return AlphaRateReport(
        alpha=alpha,
        c=c,
        reps=reps,
        batches=batches,
        rows=rows,
        tau=tau,
        p_value=p_value,
        passed=passed,
    )
