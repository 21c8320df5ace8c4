import struct

import pytest

from src.errors import DataError
from src.models.stream import ObservationStream
from src.services.stream_codec import MAGIC, decode_stream, encode_stream, read_stream, write_stream


def _stream():
    return ObservationStream(
        events=((0,), (1, 2), (0, 2), (3,)),
        labels=("ant", "bee", "cicada", "dragonfly"),
        source_label="insects.txt",
    )


def test_encode_decode():
    stream = _stream()
    payload = encode_stream(stream)
    assert payload.startswith(MAGIC)
    assert decode_stream(payload) == stream


def test_layout_header():
    payload = encode_stream(_stream())
    (label_len,) = struct.unpack_from("<I", payload, len(MAGIC))
    assert payload[len(MAGIC) + 4:len(MAGIC) + 4 + label_len] == b"insects.txt"


@pytest.mark.parametrize(
    "mutate",
    [
        lambda p: b"XXXXX" + p[5:],
        lambda p: p[:-3],
        lambda p: p + b"\x00",
    ],
    ids=["bad magic", "truncated", "trailing bytes"],
)
def test_decode_rejects_corrupt_payloads(mutate):
    with pytest.raises(DataError):
        decode_stream(mutate(encode_stream(_stream())))


def test_decode_rejects_ids_outside_label_table():
    stream = ObservationStream(events=((0,), (5,)), labels=("a", "b"))
    with pytest.raises(DataError):
        decode_stream(encode_stream(stream))


def test_write_and_read(tmp_path):
    path = tmp_path / "stream.bin"
    write_stream(_stream(), str(path))
    assert read_stream(str(path)) == _stream()


def test_write_to_missing_directory(tmp_path):
    with pytest.raises(DataError):
        write_stream(_stream(), str(tmp_path / "missing" / "stream.bin"))
