"""
Pairwise co-occurrence statistics of incidence streams.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Tuple

import numpy as np

from src.app.logging_config import get_logger
from src.models.stream import ObservationStream

logger = get_logger(__name__)


@dataclass(frozen=True)
class PairStatistics:
    """
    ``pair_counts[(x, y)]`` (x < y) is the number of events containing both x and y.
    Pairs that never co-occur are absent.
    """

    species_counts: np.ndarray
    pair_counts: Dict[Tuple[int, int], int]
    codiscovered_pairs: int
    n_events: int

    @classmethod
    def build(cls, stream: ObservationStream) -> "PairStatistics":
        counts = np.zeros(stream.n_species, dtype=np.int64)
        pairs: Dict[Tuple[int, int], int] = {}
        seen = np.zeros(stream.n_species, dtype=bool)
        codiscovered = 0

        for event in stream.events:
            members = sorted(event)
            counts[members] += 1
            new = [s for s in members if not seen[s]]
            codiscovered += len(new) * (len(new) - 1)
            seen[new] = True
            for pair in combinations(members, 2):
                pairs[pair] = pairs.get(pair, 0) + 1

        logger.debug(
            "Pair statistics built",
            extra={"events": len(stream), "pairs": len(pairs), "source": stream.source_label},
        )
        return cls(
            species_counts=counts,
            pair_counts=pairs,
            codiscovered_pairs=codiscovered,
            n_events=len(stream),
        )

    @property
    def discovered_species(self) -> int:
        return int(np.count_nonzero(self.species_counts))

    def symmetric_difference(self, x: int, y: int, both: int) -> int:
        """Events containing exactly one of x and y."""
        return int(self.species_counts[x] + self.species_counts[y] - 2 * both)
