"""
Worst-case MSE evaluations and certificates for linear estimators.
"""
import math
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GhEvaluation(BaseModel):
    """
    Grid evaluation of the worst-case MSE functional.

    ``p_star``/``q_star`` are the smallest grid maximizers of the bias and variance
    terms; 0 means the analytic limit at p -> 0 attained the maximum.
    """

    model_config = ConfigDict(frozen=True)

    y_b: float
    y_v: float
    g_h: float
    p_star: float
    q_star: float
    grid_size: int
    p0: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "GhEvaluation":
        if self.y_b < 0 or self.y_v < 0:
            raise ValueError("y_b and y_v must be non-negative")
        if not math.isclose(self.g_h, self.y_b + self.y_v, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("g_h must equal y_b + y_v")
        if not (0.0 <= self.p_star <= 1.0 and 0.0 <= self.q_star <= 1.0):
            raise ValueError("maximizers must lie in [0, 1]")
        return self

    @classmethod
    def of(cls, y_b: float, y_v: float, p_star: float, q_star: float,
           grid_size: int, p0: Optional[float] = None) -> "GhEvaluation":
        return cls(y_b=y_b, y_v=y_v, g_h=y_b + y_v, p_star=p_star, q_star=q_star,
                   grid_size=grid_size, p0=p0)


class GhCertificate(BaseModel):
    """Fine-grid evaluation of a fitted H together with its lower bound and checks."""

    model_config = ConfigDict(frozen=True)

    evaluation: GhEvaluation
    m_p: float
    m_q: float
    tilde_g: float
    uniqueness_ok: bool
    bias_bounded_by_one: bool
    p_star_at_limit: bool = False
    q_star_at_limit: bool = False

    # Run settings, recorded so the fit can be reproduced.
    r: Optional[float] = None
    t: Optional[float] = None
    depth: Optional[int] = None
    grid: Optional[int] = None
    cert_grid: Optional[int] = None
    budget: Optional[int] = None
    solver: str = "epigraph-slsqp+subgradient"
    certified: bool = True
    start_values: Dict[str, float] = Field(default_factory=dict)
    linear_minimax_floor: Optional[float] = None
