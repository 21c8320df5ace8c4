"""
Application settings and configuration.
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # H* optimizer
    GH_GRID: int = 5000
    GH_CERT_GRID: int = 50000
    GH_DEPTH: int = 40
    GH_BUDGET: int = 400
    GH_EXCHANGE_ROUNDS: int = 25
    GH_P_FLOOR: float = 1e-7

    # Smoothed Good-Toulmin preset (binomial | binomial-half | poisson)
    SGT_SMOOTHING: str = "binomial"
    SGT_BINOMIAL_BASE: float = 3.0

    # Far-future tail bound
    P_SPLIT: float = 0.5

    # Simulation
    SIM_REPS: int = 1000
    SIM_ACTIVE_FLOOR: float = 1e-12
    POWER_LAW_SPECIES: int = 1_000_000

    # Benchmark
    BENCH_PERMS: int = 100
    BENCH_FRACTIONS: int = 10
    THREADS: int = 1

    # H* fit cache
    DATABASE_URL: str = "sqlite:///hstar_cache.db"
    HSTAR_CACHE_ENABLED: bool = True

    # Corpus sources on S3
    AWS_REGION: str = "us-east-1"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
