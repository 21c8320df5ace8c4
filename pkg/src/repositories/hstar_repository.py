"""
Repository for cached H* fits.
"""
import json
from dataclasses import dataclass
from typing import Optional, Tuple

from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import Session

from src.app.logging_config import get_logger
from src.models.gh import GhCertificate
from src.models.hstar_fit import HStarFit
from src.models.profile import LinearWeights

logger = get_logger(__name__)

_KEY_DIGITS = 6


@dataclass(frozen=True)
class FitKey:
    """Cache key: horizon rounded to a fixed number of digits plus every optimizer setting."""

    r: float
    t: float
    depth: int
    grid: int
    budget: int
    cert_grid: int
    rounds: int
    p0: float = -1.0

    @classmethod
    def of(
        cls,
        r: float,
        t: float,
        depth: int,
        grid: int,
        budget: int,
        cert_grid: int,
        rounds: int,
        p0: Optional[float] = None,
    ) -> "FitKey":
        return cls(
            r=round(r, _KEY_DIGITS),
            t=round(t, _KEY_DIGITS),
            depth=depth,
            grid=grid,
            budget=budget,
            cert_grid=cert_grid,
            rounds=rounds,
            p0=-1.0 if p0 is None else round(p0, _KEY_DIGITS),
        )


class HStarRepository:
    """Repository for H* fit cache operations."""

    @staticmethod
    def _query(db: Session, key: FitKey):
        return db.query(HStarFit).filter(
            HStarFit.fit_r_key == key.r,
            HStarFit.fit_t_key == key.t,
            HStarFit.fit_depth == key.depth,
            HStarFit.fit_grid == key.grid,
            HStarFit.fit_budget == key.budget,
            HStarFit.fit_cert_grid == key.cert_grid,
            HStarFit.fit_rounds == key.rounds,
            HStarFit.fit_p0_key == key.p0,
        )

    @staticmethod
    def get(db: Session, key: FitKey) -> Optional[Tuple[LinearWeights, GhCertificate]]:
        """
        Get a cached fit.

        Args:
            db: Database session
            key: Fit key

        Returns:
            (weights, certificate) or None
        """
        row = HStarRepository._query(db, key).first()
        if row is None:
            return None
        logger.debug("H* cache hit", extra={"r": key.r, "t": key.t, "depth": key.depth})
        weights = LinearWeights.from_array(json.loads(row.fit_weights_json))
        certificate = GhCertificate.model_validate_json(row.fit_certificate_json)
        return weights, certificate

    @staticmethod
    def save(
        db: Session, key: FitKey, weights: LinearWeights, certificate: GhCertificate
    ) -> Optional[HStarFit]:
        """
        Store a fit; an existing row for the same key is kept.

        Args:
            db: Database session
            key: Fit key
            weights: Fitted weights
            certificate: Certificate of the fit

        Returns:
            The stored row, or None if another writer stored the key first
        """
        row = HStarFit(
            fit_r_key=key.r,
            fit_t_key=key.t,
            fit_depth=key.depth,
            fit_grid=key.grid,
            fit_budget=key.budget,
            fit_cert_grid=key.cert_grid,
            fit_rounds=key.rounds,
            fit_p0_key=key.p0,
            fit_solver=certificate.solver,
            fit_weights_json=json.dumps(weights.to_list()),
            fit_certificate_json=certificate.model_dump_json(),
        )
        db.add(row)
        try:
            db.commit()
        except IntegrityError:
            db.rollback()
            logger.info("H* fit already cached", extra={"r": key.r, "t": key.t})
            return None
        db.refresh(row)
        logger.info(
            "H* fit cached",
            extra={"fit_id": row.fit_id, "r": key.r, "t": key.t, "depth": key.depth},
        )
        return row

    @staticmethod
    def count(db: Session) -> int:
        return db.query(HStarFit).count()
