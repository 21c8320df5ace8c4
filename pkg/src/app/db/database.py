"""
Database connection and session management for the H* fit cache.
"""
from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from src.settings import settings

# Engine connects lazily; nothing touches the database until a session is used.
engine = create_engine(
    settings.DATABASE_URL,
    pool_pre_ping=True,
)

SessionLocal = sessionmaker(autoflush=False, bind=engine)

Base = declarative_base()


def init_db() -> None:
    """Create the cache tables if they do not exist yet."""
    # Import registers the model on Base.metadata.
    from src.models import hstar_fit  # noqa: F401

    Base.metadata.create_all(bind=engine)

