"""
Binary stream files.

Layout (little-endian)::

    b"USPS1"
    u32 len, utf-8 source label
    u32 n_labels, then per label: u32 len, utf-8 bytes
    u32 n_events
    u32[n_events]  event sizes
    u32[sum sizes] interned species ids
"""
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from src.app.logging_config import get_logger
from src.errors import DataError
from src.models.stream import ObservationStream

logger = get_logger(__name__)

MAGIC = b"USPS1"
_U32 = struct.Struct("<I")
_DTYPE = np.dtype("<u4")


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def encode_stream(stream: ObservationStream) -> bytes:
    ids, offsets = stream.flat()
    if stream.n_species > np.iinfo(np.uint32).max:
        raise DataError("Too many species for the stream format")
    parts = [MAGIC, _pack_str(stream.source_label), _U32.pack(len(stream.labels))]
    parts.extend(_pack_str(label) for label in stream.labels)
    parts.append(_U32.pack(len(stream)))
    parts.append(np.diff(offsets).astype(_DTYPE).tobytes())
    parts.append(ids.astype(_DTYPE).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.payload):
            raise DataError(f"Truncated stream file at byte {self.pos}")
        chunk = self.payload[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError(f"Invalid label encoding at byte {self.pos}") from e

    def array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype=_DTYPE).astype(np.int64)


def decode_stream(payload: bytes) -> ObservationStream:
    reader = _Reader(payload)
    if reader.take(len(MAGIC)) != MAGIC:
        raise DataError("Not a stream file (bad magic header)")
    source_label = reader.text()
    labels = tuple(reader.text() for _ in range(reader.u32()))
    n_events = reader.u32()
    sizes = reader.array(n_events)
    ids = reader.array(int(sizes.sum()))
    if reader.pos != len(payload):
        raise DataError(f"Trailing bytes after stream payload ({len(payload) - reader.pos})")
    if labels and ids.size and int(ids.max()) >= len(labels):
        raise DataError("Species id out of range of the label table")

    offsets = np.concatenate(([0], np.cumsum(sizes)))
    events: Tuple[Tuple[int, ...], ...] = tuple(
        tuple(ids[offsets[k]:offsets[k + 1]].tolist()) for k in range(n_events)
    )
    return ObservationStream(events=events, labels=labels, source_label=source_label)


def write_stream(stream: ObservationStream, path: str) -> None:
    try:
        Path(path).write_bytes(encode_stream(stream))
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e.strerror or e}") from e
    logger.info("Stream written", extra={"path": path, "events": len(stream)})


def read_stream(path: str) -> ObservationStream:
    from src.services.corpus_service import corpus_service

    stream = decode_stream(corpus_service.read_bytes(path))
    logger.info(
        "Stream read",
        extra={"path": path, "events": len(stream), "species": stream.n_species},
    )
    return stream
