"""
H* fitting with an in-process memo and the SQL fit cache in front of the optimizer.
"""
from typing import Dict, Optional, Tuple

from sqlalchemy.exc import SQLAlchemyError

from src.app.db.database import SessionLocal, init_db
from src.app.logging_config import get_logger
from src.models.gh import GhCertificate
from src.models.profile import Horizon, LinearWeights
from src.repositories.hstar_repository import FitKey, HStarRepository
from src.services.ghopt import optimize_hstar
from src.settings import settings

logger = get_logger(__name__)


class HStarService:
    """
    Fits H* once per rounded horizon and run settings.

    Lookups go memo -> database -> optimizer. Database failures are logged and the
    fit proceeds without the cache.
    """

    def __init__(
        self,
        depth: Optional[int] = None,
        grid: Optional[int] = None,
        budget: Optional[int] = None,
        cert_grid: Optional[int] = None,
        rounds: Optional[int] = None,
        use_cache: Optional[bool] = None,
        session_factory=None,
    ):
        self.depth = settings.GH_DEPTH if depth is None else depth
        self.grid = settings.GH_GRID if grid is None else grid
        self.budget = settings.GH_BUDGET if budget is None else budget
        # same effective value optimize_hstar would use
        self.cert_grid = max(settings.GH_CERT_GRID if cert_grid is None else cert_grid, 10 * self.grid)
        self.rounds = settings.GH_EXCHANGE_ROUNDS if rounds is None else rounds
        self.use_cache = settings.HSTAR_CACHE_ENABLED if use_cache is None else use_cache
        self._session_factory = session_factory
        self._memo: Dict[FitKey, Tuple[LinearWeights, GhCertificate]] = {}
        self._db_ready = False

    def _key(self, h: Horizon, p0: Optional[float]) -> FitKey:
        return FitKey.of(h.r, h.t, self.depth, self.grid, self.budget, self.cert_grid, self.rounds, p0)

    def _session(self):
        if self._session_factory is not None:
            return self._session_factory()
        if not self._db_ready:
            init_db()
            self._db_ready = True
        return SessionLocal()

    def fit(self, h: Horizon, p0: Optional[float] = None) -> Tuple[LinearWeights, GhCertificate]:
        key = self._key(h, p0)
        if key in self._memo:
            return self._memo[key]

        if self.use_cache:
            try:
                db = self._session()
                try:
                    cached = HStarRepository.get(db, key)
                finally:
                    db.close()
                if cached is not None:
                    self._memo[key] = cached
                    return cached
            except SQLAlchemyError as e:
                logger.warning("H* cache read failed", extra={"error": str(e)})

        result = optimize_hstar(
            Horizon.of(t=key.t, r=key.r),
            depth=self.depth,
            grid=self.grid,
            budget=self.budget,
            p0=p0,
            cert_grid=self.cert_grid,
            rounds=self.rounds,
        )
        self._memo[key] = result

        if self.use_cache:
            try:
                db = self._session()
                try:
                    HStarRepository.save(db, key, *result)
                finally:
                    db.close()
            except SQLAlchemyError as e:
                logger.warning("H* cache write failed", extra={"error": str(e)})
        return result

    def weights(self, h: Horizon) -> LinearWeights:
        return self.fit(h)[0]
