"""
Frequency profiles, horizons and linear weight sequences.
"""
import enum
import math
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.errors import DataError, PreconditionError


class FrequencyProfile(BaseModel):
    """
    Sparse frequency-of-frequencies vector.

    ``counts[i]`` is the number of species seen exactly ``i`` times. Absent keys mean zero.
    """

    model_config = ConfigDict(frozen=True)

    counts: Dict[int, int] = Field(default_factory=dict)
    n_events: int = 0

    @field_validator("counts")
    @classmethod
    def _normalize_counts(cls, value: Dict[int, int]) -> Dict[int, int]:
        for multiplicity, count in value.items():
            if multiplicity < 1:
                raise ValueError(f"multiplicity must be >= 1, got {multiplicity}")
            if count < 0:
                raise ValueError(f"count for multiplicity {multiplicity} is negative")
        return {i: value[i] for i in sorted(value) if value[i] > 0}

    @field_validator("n_events")
    @classmethod
    def _check_events(cls, value: int) -> int:
        if value < 0:
            raise ValueError("n_events must be non-negative")
        return value

    @property
    def s_t(self) -> int:
        """Number of distinct species observed."""
        return sum(self.counts.values())

    @property
    def max_multiplicity(self) -> int:
        return max(self.counts) if self.counts else 0

    def phi(self, i: int) -> int:
        return self.counts.get(i, 0)

    def scaled(self, k: int) -> "FrequencyProfile":
        """Profile with every species replicated ``k`` times."""
        return FrequencyProfile(
            counts={i: k * c for i, c in self.counts.items()},
            n_events=k * self.n_events,
        )

    def __add__(self, other: "FrequencyProfile") -> "FrequencyProfile":
        merged = dict(self.counts)
        for i, c in other.counts.items():
            merged[i] = merged.get(i, 0) + c
        return FrequencyProfile(counts=merged, n_events=self.n_events + other.n_events)

    def to_json(self) -> str:
        return self.model_dump_json()

    @classmethod
    def from_json(cls, payload: str) -> "FrequencyProfile":
        try:
            return cls.model_validate_json(payload)
        except ValueError as e:
            raise DataError(f"Invalid frequency profile: {e}") from e

    @classmethod
    def from_species_counts(
        cls, species_counts: Iterable[int], n_events: int
    ) -> "FrequencyProfile":
        """Build a profile from per-species occurrence counts (zeros ignored)."""
        if isinstance(species_counts, np.ndarray):
            arr = species_counts.astype(np.int64, copy=False)
        else:
            arr = np.fromiter(species_counts, dtype=np.int64)
        arr = arr[arr > 0]
        if arr.size == 0:
            return cls(counts={}, n_events=n_events)
        phi = np.bincount(arr)
        nz = np.nonzero(phi)[0]
        return cls(counts={int(i): int(phi[i]) for i in nz}, n_events=n_events)


def profile_from_counts(
    pairs: Iterable[Tuple[int, int]], n_events: Optional[int] = None
) -> FrequencyProfile:
    """
    Build a profile from ``(multiplicity, count)`` pairs.

    ``n_events`` defaults to the classical total ``sum(i * count)``.
    """
    counts: Dict[int, int] = {}
    for multiplicity, count in pairs:
        if multiplicity in counts:
            raise DataError(f"Duplicate multiplicity key: {multiplicity}")
        if multiplicity < 1:
            raise DataError(f"Multiplicity must be >= 1, got {multiplicity}")
        if count < 0:
            raise DataError(f"Negative count {count} for multiplicity {multiplicity}")
        counts[int(multiplicity)] = int(count)
    if n_events is None:
        n_events = sum(i * c for i, c in counts.items())
    return FrequencyProfile(counts=counts, n_events=n_events)


def s_at_least(profile: FrequencyProfile, i: int) -> int:
    """Number of species seen at least ``i`` times."""
    if i < 1:
        raise PreconditionError(f"s_at_least requires i >= 1, got {i}")
    return sum(c for j, c in profile.counts.items() if j >= i)


class Horizon(BaseModel):
    """Past duration ``t`` and future-to-past ratio ``r``."""

    model_config = ConfigDict(frozen=True)

    t: float
    r: float

    @model_validator(mode="after")
    def _check_positive(self) -> "Horizon":
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError(f"t must be positive and finite, got {self.t}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"r must be positive and finite, got {self.r}")
        return self

    @property
    def T(self) -> float:
        return (1.0 + self.r) * self.t

    @classmethod
    def of(cls, t: float, r: float) -> "Horizon":
        try:
            return cls(t=t, r=r)
        except ValueError as e:
            raise PreconditionError(str(e)) from e


class LinearWeights(BaseModel):
    """Truncated coefficients ``H_1..H_D`` of a linear estimator; ``H_0 = 0`` implicitly."""

    model_config = ConfigDict(frozen=True)

    coeffs: Tuple[float, ...]

    @field_validator("coeffs")
    @classmethod
    def _check_coeffs(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) < 1:
            raise ValueError("LinearWeights needs depth >= 1")
        if not all(math.isfinite(v) for v in value):
            raise ValueError("LinearWeights coefficients must be finite")
        return tuple(float(v) for v in value)

    @property
    def depth(self) -> int:
        return len(self.coeffs)

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.coeffs)

    def coefficient(self, i: int) -> float:
        """``H(i)``, zero outside ``1..depth``."""
        if 1 <= i <= self.depth:
            return self.coeffs[i - 1]
        return 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    def resized(self, depth: int) -> "LinearWeights":
        """Truncate or zero-pad to ``depth``."""
        padded = list(self.coeffs[:depth]) + [0.0] * max(0, depth - self.depth)
        return LinearWeights(coeffs=tuple(padded))

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "LinearWeights":
        try:
            return cls(coeffs=tuple(float(v) for v in values))
        except ValueError as e:
            raise DataError(f"Invalid weights: {e}") from e

    @classmethod
    def zeros(cls, depth: int) -> "LinearWeights":
        return cls(coeffs=(0.0,) * depth)

    def to_list(self) -> List[float]:
        return list(self.coeffs)


class MethodTag(str, enum.Enum):
    """Estimator names used on the command line and in reports."""
    GT = "gt"
    SGT = "sgt"
    LINEAR = "linear"
    HSTAR = "hstar"
    RATIO_ALPHA = "ratio-alpha"
    PADE = "pade"
    NULL = "null"


class PredictionReport(BaseModel):
    """Point prediction of the number of new species plus optional uncertainty."""

    model_config = ConfigDict(frozen=True)

    method: MethodTag
    point: float
    variance_proxy: Optional[float] = None
    interval: Optional[Tuple[float, float]] = None
    nominal_level: Optional[float] = None
    diagnostics: Dict[str, object] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_interval(self) -> "PredictionReport":
        if self.variance_proxy is not None and self.variance_proxy < 0:
            raise ValueError("variance_proxy must be non-negative")
        if self.interval is not None:
            lo, hi = self.interval
            if not (lo <= self.point <= hi):
                raise ValueError(f"interval ({lo}, {hi}) does not contain point {self.point}")
        if self.nominal_level is not None and not (0.0 < self.nominal_level < 1.0):
            raise ValueError("nominal_level must lie in (0, 1)")
        return self
