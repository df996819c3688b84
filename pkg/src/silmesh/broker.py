"""Broker side of a server: fan-out, double cache, distillation.

A client query is broadcast to every selected server (the local one
included) with an identification tag, so each origin can judge the
request's applicability itself. Each origin evaluates into its own
remote cache; this module pulls those caches page by page into a bounded
local cache and distils the union to the client:

  * distillation order is deterministic - origin servers in ascending id
    order, each origin's snapshot order preserved - so a broadcast is
    reproducible regardless of network timing;
  * duplicate resource URIs across origins are suppressed, first
    occurrence wins;
  * local cache occupancy never exceeds the admin-set capacity, and no
    client page exceeds the user's page size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from threading import RLock

from silmesh.codec.model import (
    Query,
    ResultEntry,
    ResultSet,
    ServerStatus,
    Uid,
    query_document,
)
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import serialize_document
from silmesh.errors import (
    AllTargetsFailed,
    EnumerationCancelled,
    SilError,
    UnknownHandle,
    UnknownTarget,
)
from silmesh.multipart import decode_multipart
from silmesh.server.core import ServerCore, Session
from silmesh.transport import Transport, TransportError

TAG_HEADER = "X-Ident-Tag"


@dataclass(frozen=True)
class IdentificationTag:
    """(user id, authorization level, origin server) attached to every
    forwarded request."""

    user_id: str
    level: int
    origin_sid: str

    def header_value(self) -> str:
        return f"{self.user_id};{self.level};{self.origin_sid}"

    @classmethod
    def from_header(cls, value: str | None) -> "IdentificationTag":
        try:
            user_id, level, origin = (value or "").split(";")
            return cls(user_id=user_id, level=int(level), origin_sid=origin)
        except ValueError:
            raise SilError(f"malformed identification tag '{value}'") from None


class SubHandle:
    """Stream state for one origin server."""

    def __init__(self, sid: str, url: str):
        self.sid = sid
        self.url = url
        self.remote_handle: str | None = None
        self.state = "pending"
        self.buffer: deque[ResultEntry] = deque()
        self.total: int | None = None
        self.detail = ""

    def fail(self, detail: str) -> None:
        self.state = "failed"
        self.detail = detail

    @property
    def exhausted(self) -> bool:
        return not self.buffer and self.state in ("done", "failed")


class BroadcastHandle:
    def __init__(self, handle_id: str, query: Query, tag: IdentificationTag,
                 subs: list[SubHandle], page_size: int, cache_capacity: int):
        self.handle_id = handle_id
        self.query = query
        self.tag = tag
        self.subs = sorted(subs, key=lambda s: s.sid)
        self.page_size = page_size
        self.cache_capacity = cache_capacity
        self.seen: set[str] = set()
        self.emitted = 0
        self.occupancy = 0
        self.high_water = 0
        self.cancelled = False
        self.lock = RLock()

    def head(self) -> SubHandle | None:
        for sub in self.subs:
            if sub.buffer or sub.state == "streaming":
                return sub
        return None

    @property
    def complete(self) -> bool:
        return self.head() is None

    def statuses(self) -> tuple[ServerStatus, ...]:
        return tuple(ServerStatus(sid=s.sid, state=s.state, count=s.total,
                                  detail=s.detail or None)
                     for s in self.subs)


class Broker:
    def __init__(self, core: ServerCore, transport: Transport):
        self.core = core
        self.transport = transport
        if core.config.page_size > core.config.cache_capacity:
            raise SilError("page size cannot exceed cache capacity")

    # --- target resolution ----------------------------------------------------

    def _resolve_targets(self, query: Query) -> list[SubHandle]:
        sid = self.core.config.sid
        if query.targets:
            names = list(dict.fromkeys(query.targets))
        else:  # whole network: every online server in the registry mirror
            names = [r.name for r in self.core.mirror if r.status == "online"]
            if not names:
                names = [sid]
        subs = []
        for name in names:
            if name == sid:
                url = self.core.config.self_url or self.core.server_url(name)
            else:
                record = next((r for r in self.core.mirror if r.name == name), None)
                if record is None:
                    raise UnknownTarget(f"'{name}' is not in the registry mirror")
                if record.status != "online":
                    raise UnknownTarget(f"'{name}' is not online (status "
                                        f"{record.status})")
                url = record.url
            if not url:
                raise UnknownTarget(f"no address known for '{name}'")
            subs.append(SubHandle(name, url))
        return subs

    def _tag_for(self, session: Session) -> IdentificationTag:
        return IdentificationTag(user_id=session.login, level=session.level,
                                 origin_sid=self.core.config.sid)

    def _s2s_headers(self, tag: IdentificationTag) -> dict[str, str]:
        return {"Content-Type": "text/xml", TAG_HEADER: tag.header_value()}

    def _forwarded_doc(self, tag: IdentificationTag, query: Query,
                       scope: str) -> bytes:
        forwarded = replace(query, targets=(), scope=scope, max_results=None)
        uid = Uid(login=tag.user_id, level=tag.level)
        return serialize_document(
            query_document(tag.origin_sid, uid, forwarded,
                           crdate=self.core.clock.stamp()))

    # --- broadcast ---------------------------------------------------------------

    def broadcast_query(self, session: Session, query: Query) -> BroadcastHandle:
        txn = self.core.require_open(session)
        tag = self._tag_for(session)
        subs = self._resolve_targets(query)
        body = self._forwarded_doc(tag, query, scope="metadata")
        for sub in subs:
            try:
                resp = self.transport.request(
                    "POST", sub.url.rstrip("/") + "/s2s/query",
                    self._s2s_headers(tag), body)
                if resp.status >= 400:
                    sub.fail(f"status {resp.status}")
                    continue
                rs = parse_document(resp.body).payloads[0].body
                sub.remote_handle = rs.handle
                sub.total = rs.total
                sub.state = "done" if rs.total == 0 else "streaming"
            except (TransportError, SilError) as exc:
                sub.fail(str(exc))
        if all(s.state == "failed" for s in subs):
            raise AllTargetsFailed(
                "; ".join(f"{s.sid}: {s.detail}" for s in subs))
        handle = BroadcastHandle(self.core._next_id("b"), query, tag, subs,
                                 page_size=self.core.config.page_size,
                                 cache_capacity=self.core.config.cache_capacity)
        with self.core._lock:
            txn.broadcasts[handle.handle_id] = handle
            txn.touch(self.core.clock.now())
        with handle.lock:
            self._fill(handle)  # begin pulling remote pages into the local cache
        return handle

    # --- double cache ----------------------------------------------------------------

    def _pull(self, bh: BroadcastHandle, sub: SubHandle) -> None:
        """Fetch at most one page from the origin's remote cache; never
        exceeds the local cache capacity."""
        free = bh.cache_capacity - bh.occupancy
        count = min(bh.page_size, free)
        if count <= 0 or sub.state != "streaming":
            return
        try:
            resp = self.transport.request(
                "GET",
                f"{sub.url.rstrip('/')}/s2s/results"
                f"?handle={sub.remote_handle}&max={count}",
                self._s2s_headers(bh.tag))
            if resp.status >= 400:
                sub.fail(f"status {resp.status}")
                return
            parts = decode_multipart(resp.body)
            rs = parse_document(parts[0].body).payloads[0].body
        except (TransportError, SilError, IndexError) as exc:
            sub.fail(str(exc))
            return
        for entry in rs.entries:
            sub.buffer.append(entry)
            bh.occupancy += 1
        bh.high_water = max(bh.high_water, bh.occupancy)
        if rs.complete:
            sub.state = "done"
        elif not rs.entries:
            sub.fail("origin sent an empty page without completing")

    def _fill(self, bh: BroadcastHandle) -> None:
        """Prefetch in distillation order while a full page fits."""
        while bh.cache_capacity - bh.occupancy >= bh.page_size:
            sub = next((s for s in bh.subs if s.state == "streaming"), None)
            if sub is None:
                return
            before = len(sub.buffer)
            self._pull(bh, sub)
            if sub.state == "streaming" and len(sub.buffer) == before:
                return

    def next_results(self, session: Session, handle_id: str, n: int) -> ResultSet:
        txn = self.core.require_open(session, handle_op=True)
        with self.core._lock:
            bh = txn.broadcasts.get(handle_id)
        if bh is None:
            raise UnknownHandle(f"no broadcast '{handle_id}'")
        if bh.cancelled:
            raise EnumerationCancelled("broadcast cancelled by abort")
        n = max(1, min(n, bh.page_size))
        out: list[ResultEntry] = []
        with bh.lock:
            while len(out) < n:
                head = bh.head()
                if head is None:
                    break
                if not head.buffer:
                    self._pull(bh, head)
                    if not head.buffer:
                        continue  # head finished or failed; advance
                entry = head.buffer.popleft()
                bh.occupancy -= 1
                if entry.resource_uri in bh.seen:
                    continue  # duplicate across origins: first occurrence won
                bh.seen.add(entry.resource_uri)
                out.append(entry)
            bh.emitted += len(out)
            self._fill(bh)
            rs = ResultSet(
                query_id=bh.query.query_id,
                entries=tuple(out),
                statuses=bh.statuses(),
                handle=bh.handle_id,
                complete=bh.complete,
                cursor=bh.emitted,
            )
        with self.core._lock:
            txn.touch(self.core.clock.now())
        return rs

    # --- distributed count --------------------------------------------------------------

    def broadcast_count(self, session: Session, query: Query) -> ResultSet:
        self.core.require_open(session)
        tag = self._tag_for(session)
        subs = self._resolve_targets(query)
        body = self._forwarded_doc(tag, query, scope="content-count")
        statuses: list[ServerStatus] = []
        total = 0
        failures = 0
        for sub in subs:
            try:
                resp = self.transport.request(
                    "POST", sub.url.rstrip("/") + "/s2s/query",
                    self._s2s_headers(tag), body)
                if resp.status >= 400:
                    raise SilError(f"status {resp.status}")
                rs = parse_document(resp.body).payloads[0].body
                if rs.total is None:
                    raise SilError("count response carries no total")
                total += rs.total
                statuses.append(ServerStatus(sid=sub.sid, state="done",
                                             count=rs.total))
            except (TransportError, SilError) as exc:
                failures += 1
                statuses.append(ServerStatus(sid=sub.sid, state="failed",
                                             detail=str(exc)))
        if failures == len(subs):
            raise AllTargetsFailed("every target failed to answer the count")
        return ResultSet(query_id=query.query_id, statuses=tuple(statuses),
                         total=total, complete=True)
