"""Programmatic client: the machine counterpart of the workspace UI.

A ClientSession talks to exactly one local server over the documented
endpoints; queries fan out from there to the chosen working servers. The
client is deliberately thin: it never holds more than one page of results
at a time (`max_held` proves it), and baskets hold resource pointers,
never content.
"""

from __future__ import annotations

import urllib.parse
from dataclasses import dataclass, field, replace
from typing import Iterator

from silmesh.clock import Clock, WallClock
from silmesh.codec.model import (
    Basket,
    Query,
    QueryClause,
    ResultEntry,
    ResultSet,
    ServerRecord,
    Uid,
    Workspace,
    query_document,
    workspace_document,
)
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import serialize_document
from silmesh.errors import BasketUnknown, ServerUnreachable, SilError
from silmesh.multipart import decode_multipart
from silmesh.transport import (
    HttpTransport,
    Transport,
    TransportError,
    WireResponse,
    raise_for_response,
)

CLIENT_SID = "client"  # envelope sid for client-originated documents


@dataclass
class ClientSession:
    base_url: str
    transport: Transport
    token: str
    login: str
    level: int
    sid: str
    clock: Clock = field(default_factory=WallClock)
    mirror: tuple[ServerRecord, ...] = ()
    workspace: Workspace = field(default_factory=Workspace)
    txn_id: str | None = None
    max_held: int = 0  # peak entries held at once; the thin-client gauge

    @property
    def working_servers(self) -> tuple[str, ...]:
        return self.workspace.servers

    @property
    def page_size(self) -> int:
        return self.workspace.prefs.page_size


def _request(session_or_transport, method: str, url: str, headers=None,
             body: bytes = b"") -> WireResponse:
    transport = getattr(session_or_transport, "transport", session_or_transport)
    try:
        resp = transport.request(method, url, headers or {}, body)
    except TransportError as exc:
        raise ServerUnreachable(str(exc)) from None
    return raise_for_response(resp)


def _call(session: ClientSession, method: str, path: str,
          body: bytes = b"", ctype: str | None = None) -> WireResponse:
    headers = {"X-Session": session.token}
    if body:
        headers["Content-Type"] = ctype or "text/xml"
    return _request(session, method, session.base_url.rstrip("/") + path,
                    headers, body)


def connect(url: str, login: str, passwd: str,
            transport: Transport | None = None,
            clock: Clock | None = None) -> ClientSession:
    """Connect and identify at the one server this user is registered at,
    then mirror the registry so working servers can be chosen."""
    transport = transport or HttpTransport()
    login_doc = serialize_document(
        # envelope carries the login/password pair; the access block is
        # server-side data and stays empty here
        _login_document(login, passwd))
    resp = _request(transport, "POST", url.rstrip("/") + "/session",
                    {"Content-Type": "text/xml"}, login_doc)
    token = resp.header("X-Session")
    profile = parse_document(resp.body)
    session = ClientSession(
        base_url=url, transport=transport, token=token or "",
        login=login, level=profile.uid.level or 0, sid=profile.sid,
        clock=clock or WallClock())
    refresh_servers(session)
    return session


def _login_document(login: str, passwd: str):
    from silmesh.codec.model import UserInfo, user_document

    return user_document(CLIENT_SID, Uid(login=login, passwd=passwd), UserInfo())


def refresh_servers(session: ClientSession) -> tuple[ServerRecord, ...]:
    resp = _call(session, "GET", "/servers")
    session.mirror = parse_document(resp.body).payloads[0].body
    return session.mirror


def choose_servers(session: ClientSession, sids: list[str]) -> None:
    """Edit the working-server list; only servers visible in the local
    server's registry mirror can be chosen."""
    visible = {r.name for r in session.mirror} | {session.sid}
    unknown = [s for s in sids if s not in visible]
    if unknown:
        raise SilError(f"not in the registry mirror: {', '.join(unknown)}")
    session.workspace = replace(session.workspace, servers=tuple(sids))


def open_transaction(session: ClientSession) -> str:
    resp = _call(session, "POST", "/txn/open")
    session.txn_id = _txn_id(resp)
    return session.txn_id


def _txn_id(resp: WireResponse) -> str:
    import xml.etree.ElementTree as ET

    return ET.fromstring(resp.body).get("id", "")


def close_transaction(session: ClientSession) -> None:
    _call(session, "POST", "/txn/close")
    session.txn_id = None


def commit(session: ClientSession) -> None:
    _ensure_txn(session)
    _call(session, "POST", "/txn/commit")


def abort(session: ClientSession) -> None:
    _ensure_txn(session)
    _call(session, "POST", "/txn/abort")


def _ensure_txn(session: ClientSession) -> None:
    if session.txn_id is None:
        open_transaction(session)


def build_query(query_id: str, clauses: list[tuple[str, str, str]],
                scope: str = "metadata",
                max_results: int | None = None) -> Query:
    return Query(query_id=query_id,
                 clauses=tuple(QueryClause(f, o, v) for f, o, v in clauses),
                 scope=scope, max_results=max_results)


class ResultPages:
    """Iterator over result pages; holds one page at a time."""

    def __init__(self, session: ClientSession, handle: str, query_id: str):
        self.session = session
        self.handle = handle
        self.query_id = query_id
        self.statuses = ()
        self.complete = False

    def __iter__(self) -> Iterator[ResultSet]:
        while not self.complete:
            resp = _call(self.session, "GET",
                         f"/results?handle={self.handle}"
                         f"&max={self.session.page_size}")
            rs: ResultSet = parse_document(resp.body).payloads[0].body
            self.statuses = rs.statuses
            self.complete = rs.complete
            self.session.max_held = max(self.session.max_held, len(rs.entries))
            if rs.entries:
                yield rs
            elif self.complete:
                return

    def drain(self) -> list[ResultEntry]:
        out: list[ResultEntry] = []
        for page in self:
            out.extend(page.entries)
        return out


def query(session: ClientSession, q: Query) -> ResultPages:
    """Broadcast a query to the working servers (auto-opens a transaction)."""
    _ensure_txn(session)
    if not q.targets:
        q = replace(q, targets=session.working_servers)
    doc = query_document(CLIENT_SID, Uid(login=session.login), q,
                         crdate=session.clock.stamp())
    resp = _call(session, "POST", "/query", serialize_document(doc))
    rs = parse_document(resp.body).payloads[0].body
    return ResultPages(session, rs.handle, q.query_id)


def count(session: ClientSession, q: Query) -> ResultSet:
    """Distributed count: totals computed at each origin, summed locally."""
    _ensure_txn(session)
    if q.scope != "content-count":
        q = replace(q, scope="content-count")
    if not q.targets:
        q = replace(q, targets=session.working_servers)
    doc = query_document(CLIENT_SID, Uid(login=session.login), q,
                         crdate=session.clock.stamp())
    resp = _call(session, "GET", "/count?handle-free=1",
                 serialize_document(doc))
    return parse_document(resp.body).payloads[0].body


def add_to_basket(session: ClientSession, basket_name: str,
                  uris: list[str]) -> Basket:
    """Add resource pointers to a named basket, deduplicating; the basket
    is created on first use."""
    baskets = dict((b.name, b) for b in session.workspace.baskets)
    basket = baskets.get(basket_name)
    if basket is None:
        basket = Basket(name=basket_name, created=session.clock.stamp())
    items = list(basket.items)
    for uri in uris:
        if uri not in items:
            items.append(uri)
    basket = replace(basket, items=tuple(items))
    baskets[basket_name] = basket
    session.workspace = replace(session.workspace,
                                baskets=tuple(baskets.values()))
    return basket


def remove_basket(session: ClientSession, basket_name: str) -> None:
    names = [b.name for b in session.workspace.baskets]
    if basket_name not in names:
        raise BasketUnknown(f"no basket '{basket_name}'")
    session.workspace = replace(
        session.workspace,
        baskets=tuple(b for b in session.workspace.baskets
                      if b.name != basket_name))


def save(session: ClientSession) -> None:
    """Persist the active workspace (baskets included) and commit."""
    _ensure_txn(session)
    ws = session.workspace
    doc = workspace_document(CLIENT_SID, Uid(login=session.login), ws,
                             crdate=session.clock.stamp())
    _call(session, "PUT",
          f"/workspace/{urllib.parse.quote(ws.name, safe='')}",
          serialize_document(doc))
    commit(session)


def load_workspace(session: ClientSession, name: str = "default") -> Workspace:
    resp = _call(session, "GET",
                 f"/workspace/{urllib.parse.quote(name, safe='')}")
    session.workspace = parse_document(resp.body).payloads[0].body
    return session.workspace


def fetch_resource(session: ClientSession,
                   uri: str) -> tuple[ResultEntry, bytes]:
    """Dereference a resource pointer; metadata and content arrive as one
    multipart stream, level-checked at the owning server."""
    owner = session.sid
    if uri.startswith("sil://"):
        owner = uri[len("sil://"):].split("/", 1)[0]
    path = f"/resource/{urllib.parse.quote(uri, safe='')}"
    if owner != session.sid:
        path += f"?sid={urllib.parse.quote(owner)}"
    resp = _call(session, "GET", path)
    parts = decode_multipart(resp.body)
    meta: ResultSet = parse_document(parts[0].body).payloads[0].body
    return meta.entries[0], parts[1].body
