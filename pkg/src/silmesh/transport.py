"""HTTP-shaped transport with interchangeable carriers.

Services implement `handle(WireRequest) -> WireResponse`. The same service
object can sit behind a real loopback HTTP server or behind the in-memory
hub, which routes by URL authority without sockets; scenarios run on either
carrier and must transcribe identically. All outbound traffic goes through
a Transport, so one RecordingTransport wrapper per actor captures every
message that crosses a process boundary.
"""

from __future__ import annotations

import http.client
import http.server
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field

from silmesh.errors import SilError, error_for_code

_RECORDED_HEADERS = (
    "content-type",
    "x-ident-tag",
    "x-nmu-admin",
    "x-server-id",
    "x-session",
)


class TransportError(Exception):
    """Carrier-level failure: refused connection, unknown authority, reset."""


@dataclass
class WireRequest:
    method: str
    target: str  # path plus optional query string
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""

    @property
    def path(self) -> str:
        return self.target.split("?", 1)[0]

    @property
    def query(self) -> dict[str, str]:
        if "?" not in self.target:
            return {}
        qs = self.target.split("?", 1)[1]
        return {k: v[-1] for k, v in urllib.parse.parse_qs(qs, keep_blank_values=True).items()}

    def header(self, name: str) -> str | None:
        for key, value in self.headers.items():
            if key.lower() == name.lower():
                return value
        return None


@dataclass
class WireResponse:
    status: int
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""

    def header(self, name: str) -> str | None:
        for key, value in self.headers.items():
            if key.lower() == name.lower():
                return value
        return None


def error_response(exc: SilError) -> WireResponse:
    from silmesh.codec.serialize import _esc_attr  # same escaping as documents

    body = f'<error code="{exc.code}" msg="{_esc_attr(str(exc))}"/>'.encode("utf-8")
    return WireResponse(exc.http_status, {"Content-Type": "text/xml"}, body)


def raise_for_response(resp: WireResponse) -> WireResponse:
    """Re-raise a protocol error carried by an error-document response."""
    if resp.status < 400:
        return resp
    code, msg = "RemoteError", resp.body.decode("utf-8", errors="replace")
    if resp.body.startswith(b"<error "):
        import xml.etree.ElementTree as ET

        try:
            el = ET.fromstring(resp.body)
            code = el.get("code", code)
            msg = el.get("msg", msg)
        except ET.ParseError:
            pass
    raise error_for_code(code, msg)


# --- transports -------------------------------------------------------------


class Transport:
    def request(self, method: str, url: str, headers: dict[str, str] | None = None,
                body: bytes = b"") -> WireResponse:
        raise NotImplementedError


class InMemoryHub:
    """Socketless carrier: maps URL authorities onto service objects."""

    def __init__(self):
        self._services: dict[str, object] = {}
        self._down: set[str] = set()
        self._lock = threading.Lock()

    def register(self, base_url: str, service) -> None:
        with self._lock:
            self._services[urllib.parse.urlsplit(base_url).netloc] = service

    def set_down(self, base_url: str, down: bool = True) -> None:
        netloc = urllib.parse.urlsplit(base_url).netloc
        with self._lock:
            if down:
                self._down.add(netloc)
            else:
                self._down.discard(netloc)

    def deliver(self, method: str, url: str, headers: dict[str, str],
                body: bytes) -> WireResponse:
        split = urllib.parse.urlsplit(url)
        with self._lock:
            service = self._services.get(split.netloc)
            down = split.netloc in self._down
        if service is None or down:
            raise TransportError(f"no route to {split.netloc}")
        target = split.path or "/"
        if split.query:
            target += "?" + split.query
        return service.handle(WireRequest(method, target, dict(headers), body))


class InMemoryTransport(Transport):
    def __init__(self, hub: InMemoryHub):
        self.hub = hub

    def request(self, method, url, headers=None, body=b"") -> WireResponse:
        return self.hub.deliver(method, url, headers or {}, body)


class HttpTransport(Transport):
    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout

    def request(self, method, url, headers=None, body=b"") -> WireResponse:
        req = urllib.request.Request(url, data=body if body else None,
                                     method=method, headers=headers or {})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return WireResponse(resp.status, dict(resp.headers.items()),
                                    resp.read())
        except urllib.error.HTTPError as err:
            return WireResponse(err.code, dict(err.headers.items()), err.read())
        except (urllib.error.URLError, ConnectionError, http.client.HTTPException,
                TimeoutError) as err:
            raise TransportError(str(err)) from None


# --- transcript capture -----------------------------------------------------


@dataclass(frozen=True)
class WireMessage:
    seq: int
    kind: str  # request | response
    src: str
    dst: str
    method: str
    target: str
    status: int | None
    headers: tuple[tuple[str, str], ...]
    body: bytes


class Transcript:
    """Ordered record of every message that crossed the wire."""

    def __init__(self):
        self.messages: list[WireMessage] = []
        self._lock = threading.Lock()
        self._names: list[tuple[str, str]] = []  # (url prefix, logical name)

    def name_address(self, base_url: str, name: str) -> None:
        with self._lock:
            self._names.append((base_url.rstrip("/"), name))
            self._names.sort(key=lambda p: -len(p[0]))

    def resolve(self, url: str) -> str:
        with self._lock:
            for prefix, name in self._names:
                if url.startswith(prefix):
                    return name
        return urllib.parse.urlsplit(url).netloc or url

    def record(self, **kw) -> None:
        with self._lock:
            self.messages.append(WireMessage(seq=len(self.messages) + 1, **kw))

    def requests(self, method: str | None = None, path: str | None = None,
                 src: str | None = None, dst: str | None = None) -> list[WireMessage]:
        out = []
        for m in self.messages:
            if m.kind != "request":
                continue
            if method and m.method != method:
                continue
            tpath = m.target.split("?", 1)[0]
            if path and tpath != path and not tpath.startswith(path.rstrip("/") + "/"):
                continue
            if src and m.src != src:
                continue
            if dst and m.dst != dst:
                continue
            out.append(m)
        return out

    def to_xml(self) -> bytes:
        from base64 import b64encode

        from silmesh.codec.serialize import _esc_attr, _esc_text

        lines = [f'<transcript n="{len(self.messages)}">']
        for m in self.messages:
            attrs = (f'seq="{m.seq}" kind="{m.kind}" src="{_esc_attr(m.src)}"'
                     f' dst="{_esc_attr(m.dst)}" method="{m.method}"'
                     f' target="{_esc_attr(m.target)}"')
            if m.status is not None:
                attrs += f' status="{m.status}"'
            lines.append(f"<msg {attrs}>")
            for name, value in m.headers:
                lines.append(f'<hdr name="{_esc_attr(name)}" value="{_esc_attr(value)}"/>')
            if m.body:
                try:
                    text = m.body.decode("utf-8")
                    if any(ord(c) < 0x20 and c not in "\t\n\r" for c in text):
                        raise UnicodeDecodeError("utf-8", m.body, 0, 1, "control bytes")
                    lines.append(f"<body>{_esc_text(text)}</body>")
                except UnicodeDecodeError:
                    lines.append(f'<body enc="b64">{b64encode(m.body).decode()}</body>')
            lines.append("</msg>")
        lines.append("</transcript>")
        return "".join(lines).encode("utf-8")


class RecordingTransport(Transport):
    """Wraps a transport, attributing traffic to one named actor."""

    def __init__(self, inner: Transport, transcript: Transcript, actor: str):
        self.inner = inner
        self.transcript = transcript
        self.actor = actor

    def _kept(self, headers: dict[str, str]) -> tuple[tuple[str, str], ...]:
        kept = [(k.title(), v) for k, v in headers.items()
                if k.lower() in _RECORDED_HEADERS]
        return tuple(sorted(kept))

    def request(self, method, url, headers=None, body=b"") -> WireResponse:
        headers = headers or {}
        dst = self.transcript.resolve(url)
        split = urllib.parse.urlsplit(url)
        target = (split.path or "/") + (f"?{split.query}" if split.query else "")
        self.transcript.record(kind="request", src=self.actor, dst=dst,
                               method=method, target=target, status=None,
                               headers=self._kept(headers), body=body)
        try:
            resp = self.inner.request(method, url, headers, body)
        except TransportError:
            self.transcript.record(kind="response", src=dst, dst=self.actor,
                                   method=method, target=target, status=0,
                                   headers=(), body=b"")
            raise
        self.transcript.record(kind="response", src=dst, dst=self.actor,
                               method=method, target=target, status=resp.status,
                               headers=self._kept(resp.headers), body=resp.body)
        return resp


# --- service base and loopback serving ---------------------------------------


class Service:
    """Routes (METHOD, /path/{var}) patterns onto handler methods."""

    def handle(self, request: WireRequest) -> WireResponse:
        response = self._dispatch(request)
        # Browser clients (the workspace UI) may sit on another origin.
        response.headers.setdefault("Access-Control-Allow-Origin", "*")
        response.headers.setdefault("Access-Control-Allow-Headers", "*")
        response.headers.setdefault("Access-Control-Expose-Headers", "*")
        return response

    def _dispatch(self, request: WireRequest) -> WireResponse:
        if request.method == "OPTIONS":
            return WireResponse(204, {"Access-Control-Allow-Methods":
                                      "GET, POST, PUT, OPTIONS"})
        handler, params = self._match(request)
        if handler is None:
            body = (f'<error code="NoRoute" msg="no route '
                    f'{request.method} {request.path}"/>').encode()
            return WireResponse(404, {"Content-Type": "text/xml"}, body)
        try:
            return handler(request, **params)
        except SilError as exc:
            return error_response(exc)
        except TransportError as exc:
            from silmesh.errors import ServerUnreachable

            return error_response(ServerUnreachable(str(exc)))

    def _match(self, request: WireRequest):
        segs = [s for s in request.path.split("/") if s]
        for method, pattern, handler in self._route_table():
            if method != request.method:
                continue
            pat = [s for s in pattern.split("/") if s]
            if len(pat) != len(segs):
                continue
            params = {}
            for p, s in zip(pat, segs):
                if p.startswith("{") and p.endswith("}"):
                    params[p[1:-1]] = urllib.parse.unquote(s)
                elif p != s:
                    break
            else:
                return handler, params
        return None, {}

    def _route_table(self):
        table = getattr(self, "_routes_cache", None)
        if table is None:
            table = [(m, p, getattr(self, name)) for m, p, name in self.ROUTES]
            self._routes_cache = table
        return table

    ROUTES: list[tuple[str, str, str]] = []


class _Handler(http.server.BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def _dispatch(self):
        length = int(self.headers.get("Content-Length", "0") or "0")
        body = self.rfile.read(length) if length else b""
        request = WireRequest(self.command, self.path,
                              {k: v for k, v in self.headers.items()}, body)
        response = self.server.service.handle(request)
        self.send_response(response.status)
        for key, value in response.headers.items():
            self.send_header(key, value)
        self.send_header("Content-Length", str(len(response.body)))
        self.end_headers()
        self.wfile.write(response.body)

    do_GET = do_POST = do_PUT = do_DELETE = do_OPTIONS = _dispatch

    def log_message(self, fmt, *args):  # keep harness output clean
        pass


class _LoopbackServer(http.server.ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = False


class LoopbackServer:
    """Serves one Service over real sockets on 127.0.0.1."""

    def __init__(self, service, port: int = 0):
        try:
            self._httpd = _LoopbackServer(("127.0.0.1", port), _Handler)
        except OSError as exc:
            from silmesh.errors import BindFailed

            raise BindFailed(f"cannot bind 127.0.0.1:{port}: {exc}") from None
        self._httpd.service = service
        self.url = f"http://127.0.0.1:{self._httpd.server_address[1]}"
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        name=f"loopback:{self.url}", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
