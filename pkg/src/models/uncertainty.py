"""
Variance proxies, tail-bound queries and dependence diagnostics.
"""
import enum
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, model_validator


class ProxyKind(str, enum.Enum):
    GT = "gt-proxy"
    LINEAR = "linear-proxy"


class VarianceProxy(BaseModel):
    """Plug-in variance of the prediction error; negative raw values are clamped to 0."""

    model_config = ConfigDict(frozen=True)

    value: float
    kind: ProxyKind
    clamped: bool = False
    raw_value: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "VarianceProxy":
        if self.value < 0:
            raise ValueError("variance proxy must be non-negative")
        return self

    @classmethod
    def clamp(cls, raw: float, kind: ProxyKind) -> "VarianceProxy":
        return cls(value=max(raw, 0.0), kind=kind, clamped=raw < 0, raw_value=raw)


class TailBoundQuery(BaseModel):
    """
    Inputs of the far-future tail bound.

    ``s_t`` plays the role of the power-law scale ``c Gamma(1-alpha) t^alpha``; the
    expectations of S_T, S_t and S_t^(2) are replaced by ``s_T_hat``, ``s_t`` and ``s_t2``.
    """

    model_config = ConfigDict(frozen=True)

    z: float
    p_split: float = 0.5
    arity_bound: int = 1
    s_t: float
    s_t2: float
    s_T_hat: float
    alpha_hat: float
    c_hat: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "TailBoundQuery":
        if not (0.0 < self.p_split < 1.0):
            raise ValueError(f"p_split must lie in (0, 1), got {self.p_split}")
        if self.arity_bound < 1:
            raise ValueError("arity bound must be a positive integer")
        if self.z < 0 or not math.isfinite(self.z):
            raise ValueError(f"z must be a finite non-negative number, got {self.z}")
        for name in ("s_t", "s_t2", "s_T_hat", "alpha_hat"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        return self

    @property
    def q_split(self) -> float:
        return 1.0 - self.p_split


class CodiscoveryReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    codiscovered_pairs: int
    discovered_species: int
    ratio: float


class DependenceReport(BaseModel):
    """Incidence-dependence diagnostics printed by ``diagnose``."""

    model_config = ConfigDict(frozen=True)

    r: float
    t: float
    epsilon_hat: float
    codiscovery: CodiscoveryReport
    perfect_pair_bound: float
    arity: int
