"""Framing contract: byte-exact round trips and a bounded streaming decoder."""

import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from silmesh.errors import EmptyParts, MalformedMultipart, TruncatedStream
from silmesh.multipart import (
    Part,
    StreamingDecoder,
    boundary_of,
    decode_multipart,
    encode_multipart,
    generate_boundary,
)


def test_two_part_round_trip_preserves_order_and_bytes():
    parts = [
        Part("text/xml", b"<sil/>"),
        Part("application/octet-stream", b"\x00\xff"),
    ]
    assert decode_multipart(encode_multipart(parts)) == parts


def test_single_part_has_exactly_one_boundary_section():
    stream = encode_multipart([Part("text/plain", b"just one")])
    boundary = boundary_of(stream).encode()
    assert stream.count(b"--" + boundary + b"\r\n") == 1
    assert stream.count(b"--" + boundary + b"--\r\n") == 1


def test_empty_part_list_is_refused():
    with pytest.raises(EmptyParts):
        encode_multipart([])


def test_crlf_heavy_binary_body_survives():
    body = b"\r\n--tricky\r\n\r\n" * 50 + b"\x00\x01\r\n"
    parts = [Part("application/octet-stream", body)]
    assert decode_multipart(encode_multipart(parts))[0].body == body


def test_missing_final_boundary_is_malformed():
    stream = encode_multipart([Part("text/plain", b"abc")])
    boundary = boundary_of(stream)
    cut = stream[: stream.rindex(b"--" + boundary.encode() + b"--")]
    with pytest.raises(MalformedMultipart):
        decode_multipart(cut)


def test_truncated_body_is_reported():
    stream = encode_multipart([Part("text/plain", b"x" * 100)])
    with pytest.raises(TruncatedStream):
        decode_multipart(stream[: len(stream) - 80])


def test_boundary_generation_redraws_on_collision():
    rng = random.Random(3)
    probe = generate_boundary([], random.Random(3))
    parts = [Part("application/octet-stream", probe.encode())]
    drawn = generate_boundary(parts, rng)
    assert drawn.encode() not in parts[0].body


def test_content_id_round_trips():
    parts = [Part("text/xml", b"<a/>", content_id="meta-1")]
    assert decode_multipart(encode_multipart(parts))[0].content_id == "meta-1"


def test_decoder_without_length_header_scans_to_boundary():
    stream = (b"--bb\r\nContent-Type: text/plain\r\n\r\nhello\r\n--bb--\r\n")
    assert decode_multipart(stream) == [Part("text/plain", b"hello")]


def test_streaming_decoder_buffers_one_part_at_a_time():
    big = bytes(random.Random(5).randrange(256) for _ in range(64 * 1024))
    parts = [Part("application/octet-stream", big) for _ in range(4)]
    stream = encode_multipart(parts)
    decoder = StreamingDecoder(io.BytesIO(stream), chunk_size=1024)
    overhead = 256  # headers and boundary lines
    for i, part in enumerate(decoder):
        assert part.body == big
        assert decoder.max_buffered <= len(big) + 1024 + overhead
    assert decoder.max_buffered < len(stream) / 2


media_types = st.sampled_from(
    ["text/xml", "text/plain", "application/octet-stream", "image/png"])
bodies = st.binary(max_size=2000)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(media_types, bodies), min_size=1, max_size=5))
def test_round_trip_property(raw):
    parts = [Part(ct, body) for ct, body in raw]
    assert decode_multipart(encode_multipart(parts)) == parts
