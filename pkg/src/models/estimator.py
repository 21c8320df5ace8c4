"""
Estimator configuration: smoothing distributions, tail-index estimates, method specs.
"""
import enum
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from src.models.profile import LinearWeights, MethodTag


class SmoothingKind(str, enum.Enum):
    """Law of the random truncation point L."""
    DEGENERATE = "degenerate"
    BINOMIAL = "binomial"
    POISSON = "poisson"
    CUSTOM = "custom"


class SmoothingDistribution(BaseModel):
    """
    Random truncation point for the smoothed Good-Toulmin estimator.

    Only the tail ``P(L >= i)`` matters. ``DEGENERATE`` with ``k=None`` means
    ``L = infinity`` (no truncation, tail identically 1).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: SmoothingKind
    k: Optional[int] = None
    q: Optional[float] = None
    lam: Optional[float] = None
    custom_tail: Optional[Callable[[np.ndarray], np.ndarray]] = Field(default=None, exclude=True)
    preset: Optional[str] = None

    @model_validator(mode="after")
    def _check_params(self) -> "SmoothingDistribution":
        if self.kind == SmoothingKind.BINOMIAL:
            if self.k is None or self.k < 0:
                raise ValueError("binomial smoothing needs k >= 0")
            if self.q is None or not (0.0 <= self.q <= 1.0):
                raise ValueError(f"binomial smoothing needs q in [0, 1], got {self.q}")
        elif self.kind == SmoothingKind.POISSON:
            if self.lam is None or self.lam < 0 or not math.isfinite(self.lam):
                raise ValueError(f"poisson smoothing needs lambda >= 0, got {self.lam}")
        elif self.kind == SmoothingKind.DEGENERATE:
            if self.k is not None and self.k < 0:
                raise ValueError("degenerate smoothing needs k >= 0")
        elif self.kind == SmoothingKind.CUSTOM and self.custom_tail is None:
            raise ValueError("custom smoothing needs a tail function")
        return self

    def tail(self, i: np.ndarray) -> np.ndarray:
        """``P(L >= i)`` evaluated elementwise for integer ``i >= 1``."""
        i = np.asarray(i)
        if self.kind == SmoothingKind.DEGENERATE:
            if self.k is None:
                return np.ones(i.shape, dtype=float)
            return (i <= self.k).astype(float)
        if self.kind == SmoothingKind.BINOMIAL:
            return stats.binom.sf(i - 1, self.k, self.q)
        if self.kind == SmoothingKind.POISSON:
            return stats.poisson.sf(i - 1, self.lam)
        values = np.asarray(self.custom_tail(i), dtype=float)
        if np.any(values < 0) or np.any(values > 1) or np.any(np.diff(values) > 0):
            raise ValueError("custom tail must be non-increasing with values in [0, 1]")
        return values

    def describe(self) -> Dict[str, object]:
        """Parameters as recorded in reports and manifests."""
        return self.model_dump(exclude_none=True, mode="json")

    @classmethod
    def no_truncation(cls) -> "SmoothingDistribution":
        return cls(kind=SmoothingKind.DEGENERATE)


class AlphaSource(str, enum.Enum):
    RATIO_PHI1 = "ratio-phi1"
    FIXED = "fixed"


class AlphaEstimate(BaseModel):
    """Power-law tail index estimate, clamped to [0, 1]."""

    model_config = ConfigDict(frozen=True)

    alpha_hat: float
    source: AlphaSource = AlphaSource.RATIO_PHI1

    @field_validator("alpha_hat")
    @classmethod
    def _clamp(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("alpha_hat must be finite")
        return min(1.0, max(0.0, value))

    @classmethod
    def fixed(cls, value: float) -> "AlphaEstimate":
        return cls(alpha_hat=value, source=AlphaSource.FIXED)


class MethodSpec(BaseModel):
    """A prediction method together with its parameters."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tag: MethodTag
    smoothing: Optional[SmoothingDistribution] = None
    weights: Optional[LinearWeights] = None
    pade_order: Tuple[int, int] = (2, 3)
    alpha: Optional[AlphaEstimate] = None

    @model_validator(mode="after")
    def _check_linear(self) -> "MethodSpec":
        if self.tag == MethodTag.LINEAR and self.weights is None:
            raise ValueError("linear method needs weights")
        return self

    @classmethod
    def of(cls, tag: str, **kwargs) -> "MethodSpec":
        return cls(tag=MethodTag(tag), **kwargs)
