"""
Species models for Poissonized simulation and the reports produced by the checks.
"""
import enum
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.profile import FrequencyProfile


class ModelKind(str, enum.Enum):
    CLASSICAL = "classical"
    INCIDENCE = "incidence"


class SpeciesModel(BaseModel):
    """
    Intensity measure over species sets.

    Classical models store one weight per species (each species is its own set).
    Incidence models store sets of species ids with one intensity per set; duplicate
    members and duplicate sets are merged on construction. Intensities need not sum to 1.
    """

    model_config = ConfigDict(frozen=True)

    kind: ModelKind
    weights: Optional[List[float]] = None
    sets: Optional[List[Tuple[int, ...]]] = None
    intensities: Optional[List[float]] = None
    label: str = ""

    @model_validator(mode="before")
    @classmethod
    def _merge_sets(cls, data):
        if not isinstance(data, dict) or data.get("sets") is None or data.get("intensities") is None:
            return data
        if len(data["sets"]) != len(data["intensities"]):
            raise ValueError("sets and intensities must have equal length")
        merged: Dict[Tuple[int, ...], float] = {}
        for members, mu in zip(data["sets"], data["intensities"]):
            key = tuple(sorted(set(int(m) for m in members)))
            if not key:
                raise ValueError("sets must be non-empty")
            if key[0] < 0:
                raise ValueError("species ids must be non-negative")
            merged[key] = merged.get(key, 0.0) + float(mu)
        return {**data, "sets": list(merged.keys()), "intensities": list(merged.values())}

    @model_validator(mode="after")
    def _check_kind(self) -> "SpeciesModel":
        if self.kind == ModelKind.CLASSICAL:
            if self.weights is None:
                raise ValueError("classical model needs weights")
            _check_nonnegative(self.weights, "weights")
        else:
            if self.sets is None or self.intensities is None:
                raise ValueError("incidence model needs sets and intensities")
            _check_nonnegative(self.intensities, "intensities")
        return self

    @property
    def n_species(self) -> int:
        if self.kind == ModelKind.CLASSICAL:
            return len(self.weights)
        return 1 + max((max(s) for s in self.sets), default=-1)

    @property
    def arity_bound(self) -> int:
        if self.kind == ModelKind.CLASSICAL:
            return 1
        return max((len(s) for s in self.sets), default=0)

    def species_masses(self) -> np.ndarray:
        """``M_s``: total intensity of the sets containing each species."""
        if self.kind == ModelKind.CLASSICAL:
            return np.asarray(self.weights, dtype=float)
        masses = np.zeros(self.n_species, dtype=float)
        for members, mu in zip(self.sets, self.intensities):
            masses[list(members)] += mu
        return masses

    def as_incidence(self) -> "SpeciesModel":
        if self.kind == ModelKind.INCIDENCE:
            return self
        return SpeciesModel(
            kind=ModelKind.INCIDENCE,
            sets=[(s,) for s in range(len(self.weights))],
            intensities=list(self.weights),
            label=self.label,
        )


def _check_nonnegative(values: List[float], name: str) -> None:
    for v in values:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class SimOutcome:
    """One Poissonized draw: past profile, true discoveries and per-species counts."""

    profile_t: FrequencyProfile
    s_tT_true: int
    past_counts: np.ndarray
    future_counts: np.ndarray
    seed: int
    skipped_expected: float = 0.0

    @property
    def s_T(self) -> int:
        return self.profile_t.s_t + self.s_tT_true


class MseEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mse: float
    se: float
    reps: int
    mean_error: float = 0.0


class DecompositionReport(BaseModel):
    """Monte-Carlo MSE against the closed-form error decomposition."""

    model_config = ConfigDict(frozen=True)

    mc_mse: float
    se: float
    delta: float
    epsilon: float
    gap: float
    passed: bool
    expected_s_t: float
    expected_s_tT: float
    arity_bound: int
    epsilon_arity_bound: float
    epsilon_connectedness_bound: float
    delta_bound: float


class TailRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    z: float
    empirical_lower: float
    bound_lower: float
    empirical_upper: float
    bound_upper: float
    passed: bool


class PhiTailRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    z: float
    empirical: float
    bound: float
    passed: bool


class ConcentrationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    i: int
    arity_bound: int
    reps: int
    expected_value: float
    expected_phi: float
    rows: List[TailRow] = Field(default_factory=list)
    phi_rows: List[PhiTailRow] = Field(default_factory=list)
    passed: bool


class IdentityCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    lhs: float
    rhs: float
    relerr: float


class AlphaRateRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    median: float
    q95: float
    batch_q95: List[float] = Field(default_factory=list)


class AlphaRateReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    c: Optional[float] = None
    reps: int
    batches: int = 1
    rows: List[AlphaRateRow]
    tau: float
    p_value: float
    passed: bool


class WorstCase(BaseModel):
    """Largest exact MSE over the adversarial witness family."""

    model_config = ConfigDict(frozen=True)

    mse: float
    p: float
    values: List[float] = Field(default_factory=list)
