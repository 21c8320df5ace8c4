"""
SQLAlchemy model for the hstar_fits cache table.
"""
from sqlalchemy import Column, DateTime, Float, Integer, String, Text, UniqueConstraint
from sqlalchemy.sql import func

from src.app.db.database import Base


class HStarFit(Base):
    """A fitted H* weight vector and its certificate, keyed by rounded horizon and run settings."""

    __tablename__ = "hstar_fits"
    __table_args__ = (
        UniqueConstraint(
            "fit_r_key", "fit_t_key", "fit_depth", "fit_grid", "fit_budget",
            "fit_cert_grid", "fit_rounds", "fit_p0_key",
            name="uq_hstar_fit_key",
        ),
    )

    fit_id = Column(Integer, primary_key=True, index=True)
    fit_created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
    fit_r_key = Column(Float, nullable=False, index=True)
    fit_t_key = Column(Float, nullable=False, index=True)
    fit_depth = Column(Integer, nullable=False)
    fit_grid = Column(Integer, nullable=False)
    fit_budget = Column(Integer, nullable=False)
    fit_cert_grid = Column(Integer, nullable=False)
    fit_rounds = Column(Integer, nullable=False)
    # -1 stands for the unrestricted functional
    fit_p0_key = Column(Float, nullable=False, default=-1.0)
    fit_solver = Column(String, nullable=False)
    fit_weights_json = Column(Text, nullable=False)
    fit_certificate_json = Column(Text, nullable=False)

    def __repr__(self):
        return (
            f"<HStarFit(fit_id={self.fit_id}, r={self.fit_r_key}, t={self.fit_t_key}, "
            f"depth={self.fit_depth})>"
        )
