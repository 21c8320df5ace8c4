import logging

import pytest
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

from src.app.db.database import Base
from src.models import hstar_fit  # noqa: F401
from src.models.profile import Horizon, profile_from_counts
from src.services.hstar_service import HStarService


@pytest.fixture(autouse=True)
def restore_root_logger():
    """CLI runs reconfigure the root logger; put the previous handlers back."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def session_factory():
    engine = create_engine(
        "sqlite://",
        connect_args={"check_same_thread": False},
        poolclass=StaticPool,
    )
    Base.metadata.create_all(bind=engine)
    factory = sessionmaker(autoflush=False, bind=engine)
    yield factory
    engine.dispose()


@pytest.fixture
def hstar_service():
    """Small, uncached fits so optimizer tests stay fast."""
    return HStarService(depth=6, grid=200, budget=20, cert_grid=2000, use_cache=False)


@pytest.fixture
def small_profile():
    return profile_from_counts([(1, 2), (2, 1)])


@pytest.fixture
def unit_horizon():
    return Horizon.of(t=10.0, r=1.0)
