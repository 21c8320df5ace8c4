"""
Observation streams and split plans.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from src.errors import DataError
from src.models.profile import FrequencyProfile, Horizon


@dataclass(frozen=True)
class ObservationStream:
    """
    Ordered events, each a non-empty set of interned species ids.

    ``labels[i]`` is the original name of species ``i``. Events of size one
    make a classical stream.
    """

    events: Tuple[Tuple[int, ...], ...]
    labels: Tuple[str, ...] = ()
    source_label: str = ""

    def __post_init__(self):
        for position, event in enumerate(self.events):
            if not event:
                raise DataError(f"Event {position} is empty")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def n_species(self) -> int:
        if self.labels:
            return len(self.labels)
        return 1 + max((max(e) for e in self.events), default=-1)

    @property
    def is_classical(self) -> bool:
        return all(len(e) == 1 for e in self.events)

    @property
    def arity(self) -> int:
        return max((len(e) for e in self.events), default=0)

    def flat(self) -> Tuple[np.ndarray, np.ndarray]:
        """Concatenated species ids and event offsets (CSR layout)."""
        sizes = np.fromiter((len(e) for e in self.events), dtype=np.int64, count=len(self.events))
        offsets = np.zeros(len(self.events) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        ids = np.fromiter(
            (s for e in self.events for s in e), dtype=np.int64, count=int(offsets[-1])
        )
        return ids, offsets

    def species_counts(self) -> np.ndarray:
        """Number of events containing each species."""
        ids, _ = self.flat()
        return np.bincount(ids, minlength=self.n_species)

    def profile(self) -> FrequencyProfile:
        """Frequency profile of the whole stream; ``n_events`` is the number of events."""
        return FrequencyProfile.from_species_counts(self.species_counts(), n_events=len(self.events))

    def species(self) -> set:
        return {s for e in self.events for s in e}

    def subsequence(self, indices: Iterable[int]) -> "ObservationStream":
        return ObservationStream(
            events=tuple(self.events[i] for i in indices),
            labels=self.labels,
            source_label=self.source_label,
        )


class StreamBuilder:
    """Interns species labels to dense ids in order of first appearance."""

    def __init__(self, source_label: str = ""):
        self.source_label = source_label
        self._ids: Dict[str, int] = {}
        self._labels: List[str] = []
        self._events: List[Tuple[int, ...]] = []

    def intern(self, label: str) -> int:
        sid = self._ids.get(label)
        if sid is None:
            sid = len(self._labels)
            self._ids[label] = sid
            self._labels.append(label)
        return sid

    def add_event(self, labels: Sequence[str]) -> None:
        # dict preserves first-seen order while dropping duplicates
        members = tuple(dict.fromkeys(self.intern(label) for label in labels))
        if not members:
            raise DataError("Cannot add an empty event")
        self._events.append(members)

    def build(self) -> ObservationStream:
        return ObservationStream(
            events=tuple(self._events),
            labels=tuple(self._labels),
            source_label=self.source_label,
        )


class SplitPlan(BaseModel):
    """How a stream is cut into a seen prefix and a future suffix."""

    model_config = ConfigDict(frozen=True)

    fraction_seen: float
    permutation_seed: Optional[int] = None
    subsample_every: int = 1

    @field_validator("fraction_seen")
    @classmethod
    def _check_fraction(cls, value: float) -> float:
        if not (0.0 < value < 1.0):
            raise ValueError(f"fraction_seen must lie in (0, 1), got {value}")
        return value

    @field_validator("subsample_every")
    @classmethod
    def _check_subsample(cls, value: int) -> int:
        if value < 1:
            raise ValueError("subsample_every must be >= 1")
        return value


@dataclass(frozen=True)
class SplitResult:
    past: ObservationStream
    future: ObservationStream
    h: Horizon
    order: Optional[np.ndarray] = field(default=None, compare=False)

    def discoveries(self) -> int:
        """True number of species in the future that the past never saw."""
        return len(self.future.species() - self.past.species())
