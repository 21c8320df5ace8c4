"""
Poissonized Monte-Carlo simulation of classical and incidence species models.
"""
import json
import math
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from joblib import Parallel, delayed
from scipy import sparse, stats

from src.app.logging_config import get_logger
from src.errors import DataError, PreconditionError
from src.models.estimator import MethodSpec
from src.models.profile import FrequencyProfile, Horizon, LinearWeights, MethodTag
from src.models.sim import ModelKind, MseEstimate, SimOutcome, SpeciesModel, WorstCase
from src.models.stream import ObservationStream
from src.services.corpus_service import corpus_service
from src.services.hstar_service import HStarService
from src.services.predictor import point_estimate
from src.settings import settings
from src.validators.line_validator import ModelValidator

logger = get_logger(__name__)

T = TypeVar("T")


def classical_model(weights: Sequence[float], label: str = "") -> SpeciesModel:
    return SpeciesModel(kind=ModelKind.CLASSICAL, weights=list(weights), label=label)


def uniform_model(n_species: int, total: float = 1.0) -> SpeciesModel:
    """``n_species`` species of equal intensity summing to ``total``."""
    if n_species < 1:
        raise PreconditionError("uniform model needs at least one species")
    return classical_model([total / n_species] * n_species, label=f"uniform-{n_species}")


def incidence_model(
    sets: Sequence[Sequence[int]], intensities: Sequence[float], label: str = ""
) -> SpeciesModel:
    return SpeciesModel(
        kind=ModelKind.INCIDENCE,
        sets=[tuple(s) for s in sets],
        intensities=list(intensities),
        label=label,
    )


def power_law_model(
    alpha: float, n_species: Optional[int] = None, c: Optional[float] = None
) -> SpeciesModel:
    """
    Species masses ``M_s = (s/c)^(-1/alpha)``, ``s = 1..K``, so that the number of
    species with mass above x tracks ``c x^(-alpha)``. Without ``c`` the masses are
    normalized to sum to 1.
    """
    if not (0.0 < alpha < 1.0):
        raise PreconditionError(f"power-law alpha must lie in (0, 1), got {alpha}")
    n_species = settings.POWER_LAW_SPECIES if n_species is None else n_species
    ranks = np.arange(1, n_species + 1, dtype=float)
    if c is None:
        masses = ranks ** (-1.0 / alpha)
        masses = masses / masses.sum()
    else:
        masses = (ranks / c) ** (-1.0 / alpha)
    return classical_model(masses.tolist(), label=f"power-law-{alpha}")


class _CompiledModel:
    """Dense per-set intensities and the sparse set-to-species incidence matrix."""

    def __init__(self, model: SpeciesModel, h: Horizon, active_floor: float):
        if model.kind == ModelKind.CLASSICAL:
            mu = np.asarray(model.weights, dtype=float)
            self.n_species = mu.size
            set_species = None
        else:
            mu = np.asarray(model.intensities, dtype=float)
            self.n_species = model.n_species
            rows = np.repeat(np.arange(len(model.sets)), [len(s) for s in model.sets])
            cols = np.fromiter((x for s in model.sets for x in s), dtype=np.int64, count=rows.size)
            set_species = sparse.csr_matrix(
                (np.ones(rows.size, dtype=np.int64), (rows, cols)),
                shape=(len(model.sets), self.n_species),
            )

        # sets too light to ever show up before T are skipped
        active = mu * h.T >= active_floor
        self.skipped_expected = float(np.sum(-np.expm1(-mu[~active] * h.T)))
        self.active = np.nonzero(active)[0]
        self.past_means = mu[self.active] * h.t
        self.future_means = mu[self.active] * h.t * h.r
        self.set_species = None if set_species is None else set_species[self.active].T.tocsr()

    def species_counts(self, set_counts: np.ndarray) -> np.ndarray:
        if self.set_species is None:
            counts = np.zeros(self.n_species, dtype=np.int64)
            counts[self.active] = set_counts
            return counts
        return np.asarray(self.set_species @ set_counts, dtype=np.int64).ravel()

    def draw(self, seed: int) -> SimOutcome:
        rng = np.random.default_rng(seed)
        past_sets = rng.poisson(self.past_means)
        future_sets = rng.poisson(self.future_means)
        past = self.species_counts(past_sets)
        future = self.species_counts(future_sets)
        profile = FrequencyProfile.from_species_counts(past, n_events=int(past_sets.sum()))
        s_tT = int(np.count_nonzero((past == 0) & (future > 0)))
        return SimOutcome(
            profile_t=profile,
            s_tT_true=s_tT,
            past_counts=past,
            future_counts=future,
            seed=seed,
            skipped_expected=self.skipped_expected,
        )


def _compile(model: SpeciesModel, h: Horizon) -> _CompiledModel:
    return _CompiledModel(model, h, settings.SIM_ACTIVE_FLOOR)


def derive_seeds(seed: int, count: int) -> List[int]:
    """Independent per-replication seeds derived from a master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def run_parallel(fn: Callable[[int], T], items: Iterable[int], threads: Optional[int] = None) -> List[T]:
    """
    Map ``fn`` over ``items`` in order, on up to ``threads`` workers.
    Thread backend only: callers pass closures over compiled models.
    """
    threads = settings.THREADS if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    return Parallel(n_jobs=threads, prefer="threads")(delayed(fn)(item) for item in items)


def simulate(model: SpeciesModel, h: Horizon, seed: int) -> SimOutcome:
    """
    One Poissonized draw: each set gets Poisson(t mu) past and Poisson(r t mu) future
    occurrences; species counts sum over the sets containing them.
    """
    return _compile(model, h).draw(seed)


def simulate_many(
    model: SpeciesModel, h: Horizon, reps: int, seed: int, threads: Optional[int] = None
) -> List[SimOutcome]:
    compiled = _compile(model, h)
    return run_parallel(compiled.draw, derive_seeds(seed, reps), threads)


def map_draws(
    model: SpeciesModel,
    h: Horizon,
    reduce: Callable[[SimOutcome], T],
    reps: int,
    seed: int,
    threads: Optional[int] = None,
) -> List[T]:
    """
    Like :func:`simulate_many` but only ``reduce(outcome)`` outlives each draw, so
    memory stays at one outcome per worker however large the support is.
    """
    compiled = _compile(model, h)

    def one(rep_seed: int) -> T:
        return reduce(compiled.draw(rep_seed))

    return run_parallel(one, derive_seeds(seed, reps), threads)


def expected_s_tT(model: SpeciesModel, h: Horizon) -> float:
    """``sum_s e^(-M_s t)(1 - e^(-r M_s t))``."""
    lam = model.species_masses() * h.t
    return float(np.sum(np.exp(-lam) * -np.expm1(-h.r * lam)))


def expected_s_t(model: SpeciesModel, t: float) -> float:
    return float(np.sum(-np.expm1(-model.species_masses() * t)))


def gt_mse_closed_form(model: SpeciesModel, h: Horizon) -> float:
    """Exact MSE of Good-Toulmin on a classical model: ``E[S_tT] + E[sum 1_{N>0} r^(2N)]``."""
    if model.kind != ModelKind.CLASSICAL:
        raise PreconditionError("closed-form Good-Toulmin MSE needs a classical model")
    lam = model.species_masses() * h.t
    # E[r^(2N) 1_{N>0}] = e^(-lam)(e^(lam r^2) - 1)
    spread = np.exp(-lam) * np.expm1(lam * h.r * h.r)
    return expected_s_tT(model, h) + float(np.sum(spread))


def mc_mse(
    model: SpeciesModel,
    h: Horizon,
    method: MethodSpec,
    reps: Optional[int] = None,
    seed: int = 0,
    threads: Optional[int] = None,
) -> MseEstimate:
    """Monte-Carlo MSE of ``method`` with its standard error."""
    reps = settings.SIM_REPS if reps is None else reps
    if reps < 2:
        raise PreconditionError("mc_mse needs at least 2 replications")
    if method.tag == MethodTag.HSTAR and method.weights is None:
        method = method.model_copy(update={"weights": HStarService().weights(h)})

    compiled = _compile(model, h)

    def error(rep_seed: int) -> float:
        outcome = compiled.draw(rep_seed)
        point, _ = point_estimate(outcome.profile_t, h, method)
        return point - outcome.s_tT_true

    errors = np.asarray(run_parallel(error, derive_seeds(seed, reps), threads))
    squared = errors * errors
    logger.info(
        "Monte-Carlo MSE",
        extra={"method": method.tag.value, "reps": reps, "seed": seed, "r": h.r, "t": h.t},
    )
    return MseEstimate(
        mse=float(squared.mean()),
        se=float(squared.std(ddof=1) / math.sqrt(reps)),
        reps=reps,
        mean_error=float(errors.mean()),
    )


def _species_moments(H: np.ndarray, h: Horizon, mass: float) -> Tuple[float, float]:
    """Bias and second moment of one species' error ``H(N) - 1{N=0, N'>0}``."""
    lam = mass * h.t
    pmf = stats.poisson.pmf(np.arange(1, H.size + 1), lam)
    discover = math.exp(-lam) * -math.expm1(-h.r * lam)
    return float(pmf @ H) - discover, discover + float(pmf @ (H * H))


def adversarial_worst_case(
    weights: LinearWeights, h: Horizon, p_values: Sequence[float]
) -> WorstCase:
    """
    Largest exact MSE over the lower-bound construction: ``floor(1/p)`` species of
    mass ``p`` plus one species carrying the leftover mass.
    """
    H = weights.as_array()
    values = []
    for p in p_values:
        if not (0.0 < p <= 1.0):
            raise PreconditionError(f"witness mass must lie in (0, 1], got {p}")
        n = int(math.floor(1.0 / p * (1.0 + 1e-12)))
        bias, second = _species_moments(H, h, p)
        total_bias = n * bias
        spread = n * (second - bias * bias)
        leftover = 1.0 - n * p
        if leftover > 1e-12:
            bias_l, second_l = _species_moments(H, h, leftover)
            total_bias += bias_l
            spread += second_l - bias_l * bias_l
        values.append(total_bias * total_bias + spread)
    best = int(np.argmax(values))
    return WorstCase(mse=values[best], p=float(p_values[best]), values=values)


def sample_stream(model: SpeciesModel, n_events: int, seed: int) -> ObservationStream:
    """
    ``n_events`` i.i.d. draws from the normalized intensity measure, one event per
    drawn set, as a fixed-size (not Poissonized) sample.
    """
    if n_events < 1:
        raise PreconditionError("a sampled stream needs at least one event")
    incidence = model.as_incidence()
    mu = np.asarray(incidence.intensities, dtype=float)
    total = mu.sum()
    if total <= 0:
        raise PreconditionError("model has zero total intensity")
    rng = np.random.default_rng(seed)
    drawn = rng.choice(mu.size, size=n_events, p=mu / total)
    return ObservationStream(
        events=tuple(incidence.sets[k] for k in drawn),
        labels=tuple(str(s) for s in range(incidence.n_species)),
        source_label=model.label or "synthetic",
    )


def model_from_document(document: dict, label: str = "") -> SpeciesModel:
    """Species model from ``{"weights": [...]}`` or ``{"sets": [{"species", "intensity"}]}``."""
    result = ModelValidator.validate_model(document)
    if not result.is_valid:
        raise DataError(f"Invalid model {label or '<document>'}: {result.message}")
    label = document.get("label", label)
    if "weights" in document:
        return classical_model(document["weights"], label=label)
    return incidence_model(
        [entry["species"] for entry in document["sets"]],
        [entry["intensity"] for entry in document["sets"]],
        label=label,
    )


def load_model(location: str) -> SpeciesModel:
    try:
        document = json.loads(corpus_service.read_text(location))
    except json.JSONDecodeError as e:
        raise DataError(f"Model file {location} is not valid JSON: {e}") from e
    model = model_from_document(document, label=location)
    logger.info(
        "Model loaded",
        extra={"location": location, "kind": model.kind.value, "species": model.n_species},
    )
    return model
