"""Multipart framing: heterogeneous payloads on one connection.

One XML document and any number of binary resource bodies travel as parts
of a single multipart/mixed stream, so a response needs exactly one
connection however mixed its content. Bodies are carried 8-bit verbatim
(both ends are ours; no base64). Each part declares Content-Length, and the
boundary is re-drawn until it collides with no body, so decoding is exact.

The stream is self-delimiting: it opens with its own dash-boundary line,
which is how a decoder without access to a Content-Type header discovers
the boundary.
"""

from __future__ import annotations

import io
import random
import re
import string
from dataclasses import dataclass
from typing import IO, Iterator

from silmesh.errors import EmptyParts, MalformedMultipart, TruncatedStream

_ALNUM = string.ascii_letters + string.digits
_BOUNDARY_LEN = 24
_MEDIA_TYPE_RE = re.compile(r"^[!#$%&'*+.^_`|~0-9A-Za-z-]+/[!#$%&'*+.^_`|~0-9A-Za-z-]+$")
_CRLF = b"\r\n"


@dataclass(frozen=True)
class Part:
    content_type: str
    body: bytes
    content_id: str | None = None

    def __post_init__(self):
        if not _MEDIA_TYPE_RE.match(self.content_type):
            raise MalformedMultipart(
                f"'{self.content_type}' is not a media type (type/subtype)")


def generate_boundary(parts: list[Part], rng: random.Random | None = None) -> str:
    """Draw a random boundary, re-drawing until no part body contains it."""
    rng = rng or random.SystemRandom()
    while True:
        token = "".join(rng.choice(_ALNUM) for _ in range(_BOUNDARY_LEN))
        marker = token.encode("ascii")
        if not any(marker in p.body for p in parts):
            return token


def encode_multipart(parts: list[Part], rng: random.Random | None = None,
                     boundary: str | None = None) -> bytes:
    """Encode parts in order into one self-delimiting octet stream."""
    if not parts:
        raise EmptyParts("cannot encode a multipart stream with no parts")
    if boundary is None:
        boundary = generate_boundary(parts, rng)
    delim = b"--" + boundary.encode("ascii")
    out = io.BytesIO()
    for part in parts:
        out.write(delim + _CRLF)
        out.write(f"Content-Type: {part.content_type}\r\n".encode("ascii"))
        if part.content_id is not None:
            out.write(f"Content-ID: {part.content_id}\r\n".encode("ascii"))
        out.write(f"Content-Length: {len(part.body)}\r\n".encode("ascii"))
        out.write(_CRLF)
        out.write(part.body)
        out.write(_CRLF)
    out.write(delim + b"--" + _CRLF)
    return out.getvalue()


def boundary_of(stream: bytes) -> str:
    """Boundary declared by the stream's leading dash-boundary line."""
    end = stream.find(_CRLF)
    if end == -1 or not stream.startswith(b"--") or end == 2:
        raise MalformedMultipart("stream does not open with a boundary line")
    return stream[2:end].decode("ascii", errors="replace")


class StreamingDecoder:
    """Forward-only part reader holding at most one part in memory.

    Reads the input in chunks; `buffered` exposes the current internal
    buffer size so callers can assert the memory bound.
    """

    def __init__(self, source: IO[bytes], boundary: str | None = None,
                 chunk_size: int = 8192):
        self._source = source
        self._chunk = chunk_size
        self._buf = b""
        self._eof = False
        self._finished = False
        self.max_buffered = 0
        if boundary is None:
            while _CRLF not in self._buf:
                if not self._fill():
                    raise MalformedMultipart(
                        "stream does not open with a boundary line")
            boundary = boundary_of(self._buf)
        self._delim = b"--" + boundary.encode("ascii")

    @property
    def buffered(self) -> int:
        return len(self._buf)

    def _fill(self) -> bool:
        if self._eof:
            return False
        chunk = self._source.read(self._chunk)
        if not chunk:
            self._eof = True
            return False
        self._buf += chunk
        self.max_buffered = max(self.max_buffered, len(self._buf))
        return True

    def _need_line(self) -> bytes:
        while _CRLF not in self._buf:
            if not self._fill():
                raise TruncatedStream("stream ended inside a line")
        line, self._buf = self._buf.split(_CRLF, 1)
        return line

    def _need_bytes(self, n: int) -> bytes:
        while len(self._buf) < n:
            if not self._fill():
                raise TruncatedStream(
                    f"stream ended {n - len(self._buf)} bytes early")
        taken, self._buf = self._buf[:n], self._buf[n:]
        return taken

    def _boundary_line(self) -> bytes:
        try:
            return self._need_line()
        except TruncatedStream:
            raise MalformedMultipart("stream has no terminal boundary") from None

    def __iter__(self) -> Iterator[Part]:
        if self._finished:
            return
        line = self._boundary_line()
        while True:
            if line == self._delim + b"--":
                self._finished = True
                return
            if line != self._delim:
                raise MalformedMultipart(
                    f"expected boundary line, found {line[:40]!r}")
            yield self._read_part()
            line = self._boundary_line()

    def _read_part(self) -> Part:
        headers: dict[str, str] = {}
        while True:
            line = self._need_line()
            if line == b"":
                break
            if b":" not in line:
                raise MalformedMultipart(f"part header without colon: {line[:40]!r}")
            name, _, value = line.partition(b":")
            headers[name.strip().lower().decode("ascii")] = value.strip().decode(
                "latin-1")
        if "content-type" not in headers:
            raise MalformedMultipart("part lacks a Content-Type header")
        length = headers.get("content-length")
        if length is not None:
            try:
                body = self._need_bytes(int(length))
            except ValueError:
                raise MalformedMultipart(
                    f"Content-Length '{length}' is not a number") from None
            if self._need_bytes(2) != _CRLF:
                raise MalformedMultipart("part body longer than declared")
        else:
            # No declared length: scan for the next boundary.
            marker = _CRLF + self._delim
            while marker not in self._buf:
                if not self._fill():
                    raise MalformedMultipart("stream has no terminal boundary")
            body, self._buf = self._buf.split(marker, 1)
            self._buf = self._delim + self._buf
        return Part(content_type=headers["content-type"], body=body,
                    content_id=headers.get("content-id"))


def iter_parts(source: IO[bytes], boundary: str | None = None,
               chunk_size: int = 8192) -> Iterator[Part]:
    return iter(StreamingDecoder(source, boundary, chunk_size))


def decode_multipart(stream: bytes | IO[bytes], boundary: str | None = None) -> list[Part]:
    """Decode a complete stream; bodies come back byte-exact and in order."""
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    return list(iter_parts(stream, boundary))
