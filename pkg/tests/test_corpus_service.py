import io

import numpy as np
import pytest
from botocore.exceptions import ClientError

from src.errors import DataError
from src.models.stream import ObservationStream, SplitPlan
from src.services.corpus_service import (
    CorpusService,
    apply_split,
    incidence_from_text,
    load_incidence,
    load_tokens,
    normalize_token,
    permutation,
    tokens_from_text,
)


class _FakeS3:
    def __init__(self, objects):
        self.objects = objects

    def get_object(self, Bucket, Key):
        if (Bucket, Key) not in self.objects:
            raise ClientError({"Error": {"Code": "NoSuchKey"}}, "GetObject")
        return {"Body": io.BytesIO(self.objects[(Bucket, Key)])}


def _service(objects):
    service = CorpusService(region="us-east-1")
    service._s3_client = _FakeS3(objects)
    return service


NORMALIZE_TESTS = [
    ("Hello,", "hello", "trailing punctuation"),
    ("(Don't)", "don't", "inner apostrophe kept"),
    ("Cafe\u0301", "caf\u00e9", "combining accent composed"),
    ("--", "", "punctuation only"),
    ("_x_", "x", "underscores stripped"),
]


@pytest.mark.parametrize("raw, expected, msg", NORMALIZE_TESTS)
def test_normalize_token(raw, expected, msg):
    assert normalize_token(raw) == expected, f"unexpected: {msg}"


def test_tokens_from_text():
    stream = tokens_from_text("To be, to be")
    assert len(stream) == 4
    assert stream.labels == ("to", "be")
    assert stream.profile().counts == {2: 2}
    assert stream.is_classical


@pytest.mark.parametrize("text", ["", "  \n\t", "-- ... !!"], ids=["empty", "whitespace", "punctuation"])
def test_tokens_from_text_without_tokens(text):
    with pytest.raises(DataError):
        tokens_from_text(text)


def test_load_tokens_from_file(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_bytes("caf\xe9 caf\xe9 th\xe9".encode("latin-1"))
    stream = load_tokens(str(path))
    assert stream.labels == ("café", "thé")
    assert stream.source_label == str(path)


DECODE_TESTS = [
    (b"\xef\xbb\xbfone two", ("one", "two"), "utf-8 byte order mark is stripped"),
    ("na\u00efve r\u00e9sum\u00e9".encode("utf-8"), ("na\u00efve", "r\u00e9sum\u00e9"), "plain utf-8"),
    (b"\x93quoted\x94 caf\xe9", ("\u201cquoted\u201d", "caf\u00e9"), "cp1252 smart quotes"),
    (b"caf\xe9 \x81x", ("caf\u00e9", "\x81x"), "byte undefined in cp1252 falls back to latin-1"),
]


@pytest.mark.parametrize("raw, expected, msg", DECODE_TESTS)
def test_read_text_encoding_fallback(tmp_path, raw, expected, msg):
    path = tmp_path / "corpus.txt"
    path.write_bytes(raw)
    text = CorpusService().read_text(str(path))
    assert tuple(text.split()) == expected, f"unexpected decoding: {msg}"


def test_load_tokens_from_s3():
    service = _service({("bucket", "books/a.txt"): b"one two two"})
    stream = load_tokens("s3://bucket/books/a.txt", service=service)
    assert stream.profile().counts == {1: 1, 2: 1}


def test_s3_errors_are_data_errors():
    service = _service({})
    with pytest.raises(DataError, match="NoSuchKey"):
        service.read_bytes("s3://bucket/missing.txt")
    with pytest.raises(DataError):
        service.read_bytes("s3://bucket-only")


def test_missing_local_file(tmp_path):
    with pytest.raises(DataError):
        CorpusService().read_bytes(str(tmp_path / "absent.txt"))


def test_incidence_from_text():
    stream = incidence_from_text("a b a\nx\n\n  \nb c\n")
    assert len(stream) == 3
    assert stream.events[0] == (0, 1)
    assert stream.arity == 2
    assert not stream.is_classical


def test_incidence_rejects_control_characters():
    with pytest.raises(DataError, match=":2:"):
        incidence_from_text("a b\nc\x01d\n", source_label="sets.txt")


def test_incidence_max_id_drops_large_ids():
    stream = incidence_from_text("1 2 300\n400\n5\n", max_id=100)
    assert len(stream) == 2
    assert [[stream.labels[s] for s in e] for e in stream.events] == [["1", "2"], ["5"]]


def test_incidence_max_id_needs_numeric_ids():
    with pytest.raises(DataError):
        incidence_from_text("1 x\n", max_id=10)


def test_incidence_keep_every():
    stream = incidence_from_text("a\n\nb\nc\nd\n", keep_every=2)
    assert [stream.labels[e[0]] for e in stream.events] == ["a", "c"]


def test_incidence_without_events():
    with pytest.raises(DataError):
        incidence_from_text("\n\n")


def test_load_incidence(tmp_path):
    path = tmp_path / "sets.txt"
    path.write_text("x y\ny z\n", encoding="utf-8")
    stream = load_incidence(str(path))
    assert stream.n_species == 3
    assert stream.profile().counts == {1: 2, 2: 1}


def test_permutation_is_deterministic():
    a = permutation(50, seed=9)
    assert np.array_equal(a, permutation(50, seed=9))
    assert sorted(a.tolist()) == list(range(50))
    assert not np.array_equal(a, permutation(50, seed=10))
    assert permutation(1, seed=3).tolist() == [0]


def _numbered_stream(n):
    return ObservationStream(events=tuple((k % 7,) for k in range(n)))


def test_temporal_split():
    stream = _numbered_stream(100)
    split = apply_split(stream, SplitPlan(fraction_seen=0.25))
    assert split.h.t == 25.0
    assert split.h.r == pytest.approx(3.0)
    assert split.past.events == stream.events[:25]
    assert split.order is None


def test_permuted_split_keeps_the_multiset():
    stream = ObservationStream(events=tuple((k,) for k in range(40)))
    split = apply_split(stream, SplitPlan(fraction_seen=0.5, permutation_seed=1))
    assert sorted(split.past.events + split.future.events) == sorted(stream.events)
    again = apply_split(stream, SplitPlan(fraction_seen=0.5, permutation_seed=1))
    assert again.past.events == split.past.events


def test_subsampled_split():
    stream = _numbered_stream(100)
    split = apply_split(stream, SplitPlan(fraction_seen=0.5, subsample_every=10))
    assert split.h.t == 5.0
    assert len(split.future) == 5


def test_split_reconstructs_total_species():
    stream = ObservationStream(events=tuple((k % 13,) for k in range(0, 60, 1)))
    split = apply_split(stream, SplitPlan(fraction_seen=0.3, permutation_seed=5))
    assert split.past.profile().s_t + split.discoveries() == len(stream.species())


def test_split_with_empty_past():
    with pytest.raises(DataError):
        apply_split(_numbered_stream(3), SplitPlan(fraction_seen=0.1))


def test_split_plan_rejects_fractions():
    with pytest.raises(ValueError):
        SplitPlan(fraction_seen=1.0)
    with pytest.raises(ValueError):
        SplitPlan(fraction_seen=0.5, subsample_every=0)
