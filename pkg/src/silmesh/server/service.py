"""HTTP surface of a server: client endpoints, forwarded-query endpoints,
registry sync, resource download, and the static workspace UI."""

from __future__ import annotations

import mimetypes
import os
import urllib.parse
from dataclasses import replace

from silmesh.broker import TAG_HEADER, Broker, IdentificationTag
from silmesh.codec.model import (
    ResultSet,
    Workspace,
    net_document,
    resultset_document,
    service_uid,
    user_document,
    workspace_document,
)
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import _esc_attr, serialize_document
from silmesh.errors import SchemaViolation, SilError
from silmesh.multipart import Part, encode_multipart
from silmesh.server.core import ServerCore, Session
from silmesh.transport import Service, Transport, WireRequest, WireResponse


class ServerService(Service):
    ROUTES = [
        ("POST", "/session", "post_session"),
        ("POST", "/txn/open", "post_txn_open"),
        ("POST", "/txn/close", "post_txn_close"),
        ("POST", "/txn/commit", "post_txn_commit"),
        ("POST", "/txn/abort", "post_txn_abort"),
        ("GET", "/txn/status", "get_txn_status"),
        ("POST", "/query", "post_query"),
        ("GET", "/results", "get_results"),
        ("GET", "/count", "get_count"),
        ("GET", "/workspace/{name}", "get_workspace"),
        ("PUT", "/workspace/{name}", "put_workspace"),
        ("GET", "/servers", "get_servers"),
        ("GET", "/status", "get_status"),
        ("GET", "/resource/{uri}", "get_resource"),
        ("POST", "/net/sync", "post_net_sync"),
        ("POST", "/s2s/query", "post_s2s_query"),
        ("GET", "/s2s/results", "get_s2s_results"),
        ("GET", "/s2s/resource/{uri}", "get_s2s_resource"),
    ]

    def __init__(self, core: ServerCore, transport: Transport):
        self.core = core
        self.broker = Broker(core, transport)
        self.transport = transport

    # --- helpers -----------------------------------------------------------

    @property
    def sid(self) -> str:
        return self.core.config.sid

    def _session(self, request: WireRequest) -> Session:
        return self.core.session(request.header("X-Session"))

    def _xml(self, body: bytes, status: int = 200,
             headers: dict[str, str] | None = None) -> WireResponse:
        hdrs = {"Content-Type": "text/xml"}
        if headers:
            hdrs.update(headers)
        return WireResponse(status, hdrs, body)

    def _rs_response(self, rs: ResultSet) -> WireResponse:
        doc = resultset_document(self.sid, service_uid(self.sid), rs,
                                 crdate=self.core.clock.stamp())
        return self._xml(serialize_document(doc))

    def _txn_ack(self, txn_id: str, is_open: bool) -> WireResponse:
        body = f'<txn id="{_esc_attr(txn_id)}" open="{1 if is_open else 0}"/>'
        return self._xml(body.encode())

    def _query_payload(self, request: WireRequest):
        doc = parse_document(request.body)
        if doc.payloads[0].kind != "ql":
            raise SchemaViolation("expected a query document")
        return doc.payloads[0].body

    # --- sessions and transactions --------------------------------------------

    def post_session(self, request: WireRequest) -> WireResponse:
        doc = parse_document(request.body)
        session = self.core.authenticate(doc.uid.login, doc.uid.passwd)
        record = self.core.store.get(session.login)
        uid = replace(record.uid, passwd=None, level=session.level)
        body = serialize_document(user_document(self.sid, uid, record.info,
                                                crdate=self.core.clock.stamp()))
        return self._xml(body, headers={"X-Session": session.token})

    def post_txn_open(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        txn = self.core.open_transaction(session)
        return self._txn_ack(txn.txn_id, True)

    def post_txn_close(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        txn_id = self.core.close_transaction(session,
                                             request.query.get("id") or None)
        return self._txn_ack(txn_id, False)

    def post_txn_commit(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        self.core.commit(session)
        return self._txn_ack(session.txn.txn_id, True)

    def post_txn_abort(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        self.core.abort(session)
        return self._txn_ack(session.txn.txn_id, True)

    def get_txn_status(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        txn_id = request.query.get("id") or None
        is_open = self.core.is_open(session, txn_id)
        return self._txn_ack(txn_id or session.txn.txn_id, is_open)

    # --- queries ------------------------------------------------------------------

    def post_query(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        query = self._query_payload(request)
        if query.scope != "metadata":
            raise SchemaViolation("POST /query takes scope=metadata; "
                                  "counts go to GET /count")
        bh = self.broker.broadcast_query(session, query)
        return self._rs_response(ResultSet(
            query_id=query.query_id, statuses=bh.statuses(),
            handle=bh.handle_id, complete=bh.complete, cursor=0))

    def get_results(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        handle = request.query.get("handle", "")
        max_count = int(request.query.get("max", self.core.config.page_size))
        rs = self.broker.next_results(session, handle, max_count)
        return self._rs_response(rs)

    def get_count(self, request: WireRequest) -> WireResponse:
        session = self._session(request)
        if request.query.get("handle-free") != "1":
            raise SchemaViolation("counts are handle-free; pass handle-free=1")
        query = self._query_payload(request)
        if query.scope != "content-count":
            raise SchemaViolation("GET /count takes scope=content-count")
        return self._rs_response(self.broker.broadcast_count(session, query))

    # --- workspaces -----------------------------------------------------------------

    def get_workspace(self, request: WireRequest, name: str) -> WireResponse:
        session = self._session(request)
        ws = self.core.load_workspace(session, name)
        record = self.core.store.get(session.login)
        uid = replace(record.uid, passwd=None)
        doc = workspace_document(self.sid, uid, ws,
                                 crdate=self.core.clock.stamp())
        return self._xml(serialize_document(doc))

    def put_workspace(self, request: WireRequest, name: str) -> WireResponse:
        session = self._session(request)
        doc = parse_document(request.body)
        if doc.payloads[0].kind != "ws":
            raise SchemaViolation("expected a workspace document")
        ws: Workspace = doc.payloads[0].body
        if ws.name != name:
            raise SchemaViolation(
                f"workspace name '{ws.name}' does not match path '{name}'")
        self.core.save_workspace(session, ws)
        return WireResponse(204, {})

    # --- registry mirror ----------------------------------------------------------------

    def get_servers(self, request: WireRequest) -> WireResponse:
        self._session(request)
        doc = net_document(self.sid, service_uid(self.sid), self.core.mirror,
                           update=self.core.clock.stamp())
        return self._xml(serialize_document(doc))

    def get_status(self, request: WireRequest) -> WireResponse:
        body = (f'<server-status sid="{_esc_attr(self.sid)}" '
                f'degraded="{1 if self.core.degraded else 0}"/>')
        return self._xml(body.encode())

    def post_net_sync(self, request: WireRequest) -> WireResponse:
        doc = parse_document(request.body)
        if doc.payloads[0].kind != "net":
            raise SchemaViolation("expected a net document")
        self.core.sync_mirror(doc.payloads[0].body)
        return WireResponse(204, {})

    # --- resources ------------------------------------------------------------------------

    def _resource_multipart(self, level: int, uri: str) -> WireResponse:
        entry, content = self.core.get_resource(level, uri)
        meta = resultset_document(
            self.sid, service_uid(self.sid),
            ResultSet(query_id="resource", entries=(entry,), total=1),
            crdate=self.core.clock.stamp())
        parts = [
            Part("text/xml", serialize_document(meta), content_id="metadata"),
            Part(entry.content_type or "application/octet-stream", content,
                 content_id="content"),
        ]
        body = encode_multipart(parts, rng=self.core.rng)
        from silmesh.multipart import boundary_of

        ctype = f'multipart/mixed; boundary="{boundary_of(body)}"'
        return WireResponse(200, {"Content-Type": ctype}, body)

    def get_resource(self, request: WireRequest, uri: str) -> WireResponse:
        session = self._session(request)
        owner = request.query.get("sid", self.sid)
        if owner == self.sid:
            return self._resource_multipart(session.level, uri)
        # proxy to the owning server, carrying the caller's identification tag
        url = self.core.server_url(owner)
        if url is None:
            raise SilError(f"no address known for server '{owner}'")
        tag = IdentificationTag(session.login, session.level, self.sid)
        resp = self.transport.request(
            "GET", f"{url.rstrip('/')}/s2s/resource/{urllib.parse.quote(uri, safe='')}",
            {TAG_HEADER: tag.header_value()})
        return WireResponse(resp.status, dict(resp.headers), resp.body)

    def get_s2s_resource(self, request: WireRequest, uri: str) -> WireResponse:
        tag = IdentificationTag.from_header(request.header(TAG_HEADER))
        return self._resource_multipart(tag.level, uri)

    # --- forwarded queries -----------------------------------------------------------------

    def post_s2s_query(self, request: WireRequest) -> WireResponse:
        tag = IdentificationTag.from_header(request.header(TAG_HEADER))
        doc = parse_document(request.body)
        if doc.payloads[0].kind != "ql":
            raise SchemaViolation("expected a query document")
        if (doc.uid.login != tag.user_id or doc.uid.level != tag.level
                or doc.sid != tag.origin_sid):
            raise SchemaViolation("identification tag does not match the "
                                  "document's uid/sid")
        query = doc.payloads[0].body
        if query.scope == "content-count":
            count = self.core.s2s_count(tag.user_id, tag.level, tag.origin_sid,
                                        query)
            return self._rs_response(ResultSet(
                query_id=query.query_id, total=count, complete=True))
        handle, total = self.core.s2s_open(tag.user_id, tag.level,
                                           tag.origin_sid, query)
        return self._rs_response(ResultSet(
            query_id=query.query_id, handle=handle, total=total,
            complete=total == 0))

    def get_s2s_results(self, request: WireRequest) -> WireResponse:
        IdentificationTag.from_header(request.header(TAG_HEADER))
        handle = request.query.get("handle", "")
        max_count = int(request.query.get("max", self.core.config.page_size))
        query_id, page, cursor, done = self.core.s2s_fetch(handle, max_count)
        rs = ResultSet(query_id=query_id, entries=tuple(page), complete=done,
                       cursor=cursor, handle=handle)
        doc = resultset_document(self.sid, service_uid(self.sid), rs,
                                 crdate=self.core.clock.stamp())
        body = encode_multipart([Part("text/xml", serialize_document(doc))],
                                rng=self.core.rng)
        from silmesh.multipart import boundary_of

        ctype = f'multipart/mixed; boundary="{boundary_of(body)}"'
        return WireResponse(200, {"Content-Type": ctype}, body)

    # --- static workspace UI ------------------------------------------------------------------

    def _dispatch(self, request: WireRequest) -> WireResponse:
        if request.method == "GET" and (request.path == "/ui"
                                        or request.path.startswith("/ui/")):
            return self._serve_ui(request.path)
        return super()._dispatch(request)

    def _serve_ui(self, path: str) -> WireResponse:
        root = self.core.config.ui_dir
        if not root:
            return WireResponse(404, {}, b"workspace UI is not installed")
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(root, rel))
        if not full.startswith(os.path.realpath(root) + os.sep):
            return WireResponse(404, {}, b"")
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            return WireResponse(404, {}, b"")
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            return WireResponse(200, {"Content-Type": ctype}, fh.read())
