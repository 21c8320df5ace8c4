"""
Benchmark processor.
Runs every method over a grid of seen fractions, in temporal order or averaged over
seeded permutations, and aggregates absolute percentage errors per cell.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.app.logging_config import get_logger
from src.errors import UnseenError, UsageError
from src.models.bench import BenchResult, BenchRow, OrderMode
from src.models.estimator import MethodSpec
from src.models.profile import Horizon, MethodTag
from src.models.stream import ObservationStream, SplitPlan
from src.services import estimators
from src.services.corpus_service import apply_split
from src.services.hstar_service import HStarService
from src.services.predictor import safe_point
from src.services.simulator import derive_seeds, run_parallel
from src.settings import settings

logger = get_logger(__name__)

DEFAULT_METHODS = ("gt", "sgt", "hstar", "ratio-alpha", "pade", "null")


def default_fractions(count: Optional[int] = None) -> List[float]:
    count = settings.BENCH_FRACTIONS if count is None else count
    return [float(f) for f in np.linspace(0.05, 0.5, count)]


@dataclass
class _CellScore:
    mape: Optional[float] = None
    failure: Optional[str] = None
    l_alpha: Optional[float] = None


class BenchProcessor:
    """Processor for benchmark runs over one stream."""

    def __init__(
        self,
        methods: Sequence[str] = DEFAULT_METHODS,
        hstar_service: Optional[HStarService] = None,
        threads: Optional[int] = None,
        with_l_alpha: bool = False,
        sgt_preset: Optional[str] = None,
        pade_order: tuple = (2, 3),
    ):
        """
        Initialize processor.

        Args:
            methods: Method tags to score
            hstar_service: Source of H* weights, fitted once per horizon
            threads: Worker threads for permutations
            with_l_alpha: Also report the distant-future l_alpha metric for ratio-alpha
            sgt_preset: SGT smoothing preset
            pade_order: Numerator and denominator degrees for Padé
        """
        try:
            self.methods = [MethodTag(m) for m in methods]
        except ValueError as e:
            raise UsageError(str(e)) from e
        if MethodTag.LINEAR in self.methods:
            raise UsageError("the linear method needs explicit weights and is not benchmarked")
        self.hstar_service = hstar_service or HStarService()
        self.threads = threads
        self.with_l_alpha = with_l_alpha
        self.sgt_preset = sgt_preset
        self.pade_order = tuple(pade_order)

    def _specs(self, h: Horizon) -> Dict[MethodTag, MethodSpec]:
        """Method specs for one horizon; H* is fitted here, outside the worker threads."""
        specs = {}
        for tag in self.methods:
            if tag == MethodTag.SGT:
                smoothing = estimators.default_smoothing(h, self.sgt_preset)
                specs[tag] = MethodSpec(tag=tag, smoothing=smoothing)
            elif tag == MethodTag.HSTAR:
                specs[tag] = MethodSpec(tag=tag, weights=self.hstar_service.weights(h))
            elif tag == MethodTag.PADE:
                specs[tag] = MethodSpec(tag=tag, pade_order=self.pade_order)
            else:
                specs[tag] = MethodSpec(tag=tag)
        return specs

    @staticmethod
    def _params(spec: MethodSpec) -> Dict[str, float]:
        if spec.tag == MethodTag.SGT and spec.smoothing is not None:
            return {
                key: float(value)
                for key, value in spec.smoothing.describe().items()
                if isinstance(value, (int, float)) and not isinstance(value, bool)
            }
        if spec.tag == MethodTag.PADE:
            return {"num_deg": float(spec.pade_order[0]), "den_deg": float(spec.pade_order[1])}
        if spec.tag == MethodTag.HSTAR and spec.weights is not None:
            return {"depth": float(spec.weights.depth)}
        return {}

    def _score(
        self, stream: ObservationStream, plan: SplitPlan, specs: Dict[MethodTag, MethodSpec]
    ) -> Dict[MethodTag, _CellScore]:
        split = apply_split(stream, plan)
        profile = split.past.profile()
        true_new = split.discoveries()
        s_T = profile.s_t + true_new

        scores = {}
        for tag, spec in specs.items():
            point, failure = safe_point(profile, split.h, spec)
            if point is None:
                scores[tag] = _CellScore(failure=failure)
                continue
            score = _CellScore(mape=100.0 * abs(profile.s_t + point - s_T) / s_T)
            if self.with_l_alpha and tag == MethodTag.RATIO_ALPHA:
                try:
                    alpha = estimators.ratio_alpha(profile).alpha_hat
                except UnseenError as e:
                    scores[tag] = _CellScore(failure=str(e))
                    continue
                score.l_alpha = (true_new - point) ** 2 / (split.h.r * split.h.t) ** (2.0 * alpha)
            scores[tag] = score
        return scores

    def _aggregate(
        self, fraction: float, spec: MethodSpec, cells: List[_CellScore]
    ) -> BenchRow:
        n_perms = len(cells)
        failures = [c.failure for c in cells if c.failure is not None]
        params = self._params(spec)
        if failures:
            logger.warning(
                "Benchmark cell has failures",
                extra={
                    "fraction": fraction,
                    "method": spec.tag.value,
                    "failed": len(failures),
                    "n_perms": n_perms,
                    "error": failures[0],
                },
            )
            return BenchRow(
                fraction_seen=fraction,
                method=spec.tag.value,
                n_perms=n_perms,
                failure=failures[0],
                params=params,
            )

        values = np.array([c.mape for c in cells])
        sem = float(values.std(ddof=1) / math.sqrt(n_perms)) if n_perms > 1 else 0.0
        l_alpha = None
        if self.with_l_alpha and spec.tag == MethodTag.RATIO_ALPHA:
            l_alpha = float(np.mean([c.l_alpha for c in cells]))
        return BenchRow(
            fraction_seen=fraction,
            method=spec.tag.value,
            mape_mean=float(values.mean()),
            mape_sem=sem,
            n_perms=n_perms,
            l_alpha_mean=l_alpha,
            params=params,
        )

    def run(
        self,
        stream: ObservationStream,
        fractions: Optional[Sequence[float]] = None,
        n_perms: Optional[int] = None,
        seed: Optional[int] = None,
        subsample_every: int = 1,
        dataset: Optional[str] = None,
    ) -> BenchResult:
        """
        Score every method on every fraction.

        Without ``seed`` the stream is split in its original order once per fraction.
        With ``seed`` each fraction is scored on ``n_perms`` seeded permutations; the
        same permutations are reused across fractions.

        Args:
            stream: Observation stream
            fractions: Seen fractions in (0, 1); defaults to 10 values over [0.05, 0.5]
            n_perms: Permutations per cell (ignored in temporal mode)
            seed: Master seed for permutations
            subsample_every: Keep every k-th event before splitting
            dataset: Label stored in the result

        Returns:
            BenchResult with one row per (fraction, method)
        """
        fractions = default_fractions() if fractions is None else list(fractions)
        if seed is None:
            order_mode = OrderMode.TEMPORAL
            perm_seeds: List[Optional[int]] = [None]
        else:
            order_mode = OrderMode.PERM_AVERAGE
            n_perms = settings.BENCH_PERMS if n_perms is None else n_perms
            perm_seeds = list(derive_seeds(seed, n_perms))

        logger.info(
            "Starting benchmark",
            extra={
                "dataset": dataset or stream.source_label,
                "events": len(stream),
                "methods": [m.value for m in self.methods],
                "fractions": len(fractions),
                "n_perms": len(perm_seeds),
                "order_mode": order_mode.value,
                "seed": seed,
            },
        )

        rows: List[BenchRow] = []
        for fraction in fractions:
            plans = [
                SplitPlan(fraction_seen=fraction, permutation_seed=s, subsample_every=subsample_every)
                for s in perm_seeds
            ]
            # the horizon depends only on the fraction and the stream length
            h = apply_split(stream, plans[0].model_copy(update={"permutation_seed": None})).h
            specs = self._specs(h)

            per_perm = run_parallel(
                lambda k: self._score(stream, plans[k], specs), range(len(plans)), self.threads
            )
            for tag, spec in specs.items():
                rows.append(self._aggregate(fraction, spec, [scores[tag] for scores in per_perm]))

            logger.info(
                "Benchmark fraction done",
                extra={"fraction": fraction, "r": h.r, "t": h.t},
            )

        return BenchResult(
            dataset=dataset or stream.source_label,
            order_mode=order_mode,
            rows=rows,
            seed=seed,
        )


def run_bench(
    stream: ObservationStream,
    fractions: Optional[Sequence[float]] = None,
    methods: Sequence[str] = DEFAULT_METHODS,
    n_perms: Optional[int] = None,
    seed: Optional[int] = None,
    **kwargs,
) -> BenchResult:
    processor_kwargs = {
        key: kwargs.pop(key)
        for key in ("hstar_service", "threads", "with_l_alpha", "sgt_preset", "pade_order")
        if key in kwargs
    }
    return BenchProcessor(methods, **processor_kwargs).run(
        stream, fractions, n_perms, seed, **kwargs
    )
