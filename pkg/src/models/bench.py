"""
Benchmark result tables.
"""
import enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class OrderMode(str, enum.Enum):
    TEMPORAL = "temporal"
    PERM_AVERAGE = "perm-average"


class BenchRow(BaseModel):
    """
    One (fraction, method) cell. ``mape_mean`` is None when the method failed on
    some permutation; ``failure`` then carries the first error message.
    """

    model_config = ConfigDict(frozen=True)

    fraction_seen: float
    method: str
    mape_mean: Optional[float] = None
    mape_sem: Optional[float] = None
    n_perms: int
    failure: Optional[str] = None
    l_alpha_mean: Optional[float] = None
    params: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self) -> "BenchRow":
        if self.mape_mean is not None and self.mape_mean < 0:
            raise ValueError("mape_mean must be non-negative")
        if self.mape_sem is not None and self.mape_sem < 0:
            raise ValueError("mape_sem must be non-negative")
        return self

    @property
    def is_gap(self) -> bool:
        return self.mape_mean is None


class BenchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset: str
    order_mode: OrderMode
    rows: List[BenchRow] = Field(default_factory=list)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_temporal(self) -> "BenchResult":
        if self.order_mode == OrderMode.TEMPORAL:
            for row in self.rows:
                if row.n_perms != 1:
                    raise ValueError("temporal results have exactly one permutation per cell")
        return self

    def cell(self, fraction: float, method: str) -> Optional[BenchRow]:
        for row in self.rows:
            if row.method == method and abs(row.fraction_seen - fraction) < 1e-12:
                return row
        return None

    @property
    def methods(self) -> List[str]:
        return list(dict.fromkeys(row.method for row in self.rows))

    @property
    def fractions(self) -> List[float]:
        return sorted({row.fraction_seen for row in self.rows})
