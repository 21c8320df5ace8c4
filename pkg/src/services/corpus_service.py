"""
Corpus loading: local or S3 sources, tokenization, incidence files and prefix splits.
"""
import re
import unicodedata
from pathlib import Path
from typing import Optional

import boto3
import numpy as np
from botocore.exceptions import BotoCoreError, ClientError

from src.app.logging_config import get_logger
from src.errors import DataError
from src.models.profile import Horizon
from src.models.stream import ObservationStream, SplitPlan, SplitResult, StreamBuilder
from src.settings import settings
from src.validators.line_validator import IssueType, LineValidator

logger = get_logger(__name__)

# utf-8-sig also reads plain utf-8; latin-1 accepts any byte string, so it goes last
ENCODINGS = ["utf-8-sig", "cp1252", "latin-1"]

_EDGE_PUNCTUATION = re.compile(r"^[\W_]+|[\W_]+$")


class CorpusService:
    """Reads corpora from local paths or ``s3://bucket/key`` URIs."""

    def __init__(self, region: Optional[str] = None):
        self.region = region or settings.AWS_REGION
        self._s3_client = None

    @property
    def s3_client(self):
        if self._s3_client is None:
            self._s3_client = boto3.client("s3", region_name=self.region)
            logger.debug("S3 client initialized", extra={"region": self.region})
        return self._s3_client

    def read_bytes(self, location: str) -> bytes:
        """
        Raw bytes of a local file or S3 object.

        Raises:
            DataError: If the source cannot be read
        """
        if location.startswith("s3://"):
            bucket, _, key = location[len("s3://"):].partition("/")
            if not bucket or not key:
                raise DataError(f"Malformed S3 URI: {location}")
            try:
                logger.info("Reading corpus from S3", extra={"bucket_name": bucket, "s3_key": key})
                response = self.s3_client.get_object(Bucket=bucket, Key=key)
                return response["Body"].read()
            except ClientError as e:
                error_code = e.response.get("Error", {}).get("Code", "Unknown")
                logger.error(
                    "Failed to read corpus from S3",
                    extra={"bucket_name": bucket, "s3_key": key, "error_code": error_code},
                    exc_info=True,
                )
                raise DataError(f"Failed to read {location} from S3: {error_code}") from e
            except BotoCoreError as e:
                raise DataError(f"Failed to read {location} from S3: {e}") from e

        try:
            return Path(location).read_bytes()
        except OSError as e:
            raise DataError(f"Cannot read {location}: {e.strerror or e}") from e

    def read_text(self, location: str) -> str:
        """
        Decode a corpus, trying multiple encodings in order of preference.

        Raises:
            DataError: If the source cannot be read or decoded
        """
        raw_content = self.read_bytes(location)
        for encoding in ENCODINGS:
            try:
                content = raw_content.decode(encoding)
            except UnicodeDecodeError:
                logger.debug(
                    "Failed to decode corpus with encoding, trying next",
                    extra={"location": location, "encoding": encoding},
                )
                continue
            logger.info(
                "Corpus decoded",
                extra={"location": location, "encoding": encoding, "bytes": len(raw_content)},
            )
            return content
        raise DataError(f"Failed to decode {location} with any of: {', '.join(ENCODINGS)}")


corpus_service = CorpusService()


def normalize_token(raw: str) -> str:
    """NFC-normalize, lowercase and strip leading/trailing non-alphanumerics."""
    token = unicodedata.normalize("NFC", raw).lower()
    return _EDGE_PUNCTUATION.sub("", token)


def tokens_from_text(text: str, source_label: str = "") -> ObservationStream:
    builder = StreamBuilder(source_label)
    for raw in text.split():
        token = normalize_token(raw)
        if token:
            builder.add_event([token])
    stream = builder.build()
    if len(stream) == 0:
        raise DataError(f"Corpus {source_label or '<text>'} contains no tokens")
    return stream


def load_tokens(location: str, service: Optional[CorpusService] = None) -> ObservationStream:
    """Each token of a plain-text corpus becomes a singleton event."""
    service = service or corpus_service
    stream = tokens_from_text(service.read_text(location), source_label=location)
    logger.info(
        "Token stream loaded",
        extra={"location": location, "events": len(stream), "species": stream.n_species},
    )
    return stream


def incidence_from_text(
    text: str,
    source_label: str = "",
    max_id: Optional[int] = None,
    keep_every: int = 1,
) -> ObservationStream:
    """
    One event per non-empty line of whitespace-separated ids.

    With ``max_id`` ids must be numeric and those ``>= max_id`` are dropped; lines left
    empty are skipped. ``keep_every=k`` keeps every k-th non-empty line.
    """
    if keep_every < 1:
        raise DataError("keep_every must be >= 1")
    builder = StreamBuilder(source_label)
    non_empty = 0
    for line_number, line in enumerate(text.splitlines(), start=1):
        result = LineValidator.validate_line(line, numeric_ids=max_id is not None)
        if not result.is_valid:
            if result.issue_type == IssueType.EMPTY_LINE:
                continue
            raise DataError(f"{source_label or '<text>'}:{line_number}: {result.message}")
        non_empty += 1
        if (non_empty - 1) % keep_every:
            continue
        ids = line.split()
        if max_id is not None:
            ids = [i for i in ids if int(i) < max_id]
            if not ids:
                continue
        builder.add_event(ids)
    stream = builder.build()
    if len(stream) == 0:
        raise DataError(f"Incidence file {source_label or '<text>'} contains no events")
    return stream


def load_incidence(
    location: str,
    max_id: Optional[int] = None,
    keep_every: int = 1,
    service: Optional[CorpusService] = None,
) -> ObservationStream:
    service = service or corpus_service
    stream = incidence_from_text(service.read_text(location), location, max_id, keep_every)
    logger.info(
        "Incidence stream loaded",
        extra={
            "location": location,
            "events": len(stream),
            "species": stream.n_species,
            "arity": stream.arity,
            "keep_every": keep_every,
        },
    )
    return stream


def permutation(n: int, seed: int) -> np.ndarray:
    """
    Fisher-Yates shuffle of ``range(n)`` driven by raw PCG64 output, so the
    permutation depends only on ``(n, seed)``.
    """
    order = np.arange(n, dtype=np.int64)
    if n < 2:
        return order
    raw = np.random.PCG64(seed).random_raw(n - 1)
    for step, i in enumerate(range(n - 1, 0, -1)):
        j = int(raw[step] % np.uint64(i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def apply_split(stream: ObservationStream, plan: SplitPlan) -> SplitResult:
    """
    Subsample, optionally shuffle, then cut into past prefix and future suffix.

    ``h.t`` is the prefix length in events and ``h.r`` the suffix-to-prefix ratio.
    """
    indices = np.arange(0, len(stream), plan.subsample_every, dtype=np.int64)
    order = None
    if plan.permutation_seed is not None:
        order = indices[permutation(indices.size, plan.permutation_seed)]
        indices = order
    n = int(indices.size)
    prefix = int(np.floor(plan.fraction_seen * n + 1e-9))
    if prefix < 1:
        raise DataError(
            f"Split of {n} events at fraction {plan.fraction_seen} leaves an empty past"
        )
    if prefix >= n:
        raise DataError(
            f"Split of {n} events at fraction {plan.fraction_seen} leaves an empty future"
        )
    past = stream.subsequence(indices[:prefix].tolist())
    future = stream.subsequence(indices[prefix:].tolist())
    h = Horizon(t=float(prefix), r=(n - prefix) / prefix)
    return SplitResult(past=past, future=future, h=h, order=order)
