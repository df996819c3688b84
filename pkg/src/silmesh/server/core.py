"""Server core: authentication, transactions, snapshots, registry mirror.

HTTP is stateless, so continuity lives here: an opaque session token binds
requests to a login and an authorization level, and at most one transaction
per session holds result-set snapshots and pending workspace writes until
commit, abort, close, or timeout. Result sets are filtered to the session's
level before they are cached, so nothing above the caller's level ever
leaves the driver layer.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field

from silmesh.clock import Clock, WallClock
from silmesh.codec.model import Query, ResultEntry, ServerRecord, Workspace
from silmesh.errors import (
    EnumerationCancelled,
    LevelDenied,
    NoOpenTransaction,
    SessionExpired,
    TransactionClosed,
    UnknownHandle,
    UnknownTransaction,
)
from silmesh.server.catalog import QueryHandlerDriver
from silmesh.server.users import UserStore
from silmesh.transport import Transport, TransportError

DEFAULT_TIMEOUT_S = 300.0
DEFAULT_SESSION_TTL_S = 3600.0


@dataclass
class ServerConfig:
    sid: str
    self_url: str = ""
    nmu_url: str | None = None
    state_dir: str | None = None
    timeout_s: float = DEFAULT_TIMEOUT_S
    session_ttl_s: float = DEFAULT_SESSION_TTL_S
    page_size: int = 50       # per-page ceiling a client may request
    cache_capacity: int = 1000  # broker-side local cache bound (admin knob)
    levels: dict[str, int] = field(default_factory=dict)
    ui_dir: str | None = None


@dataclass
class Snapshot:
    query_id: str
    entries: tuple[ResultEntry, ...]
    pos: int = 0
    cancelled: bool = False


class Transaction:
    def __init__(self, txn_id: str, now: float):
        self.txn_id = txn_id
        self.state = "open"
        self.opened_at = now
        self.last_touch = now
        self.held: dict[str, Snapshot] = {}
        self.broadcasts: dict[str, object] = {}
        self.pending_ws: dict[str, Workspace] = {}

    def touch(self, now: float) -> None:
        if now > self.last_touch:
            self.last_touch = now

    def release(self) -> None:
        self.state = "closed"
        self.held.clear()
        self.broadcasts.clear()
        self.pending_ws.clear()


@dataclass
class Session:
    token: str
    login: str
    level: int
    expires_at: float
    txn: Transaction | None = None
    origin_sid: str | None = None  # set on sessions opened for forwarded queries


class ServerCore:
    def __init__(self, config: ServerConfig, driver: QueryHandlerDriver,
                 transport: Transport | None = None, clock: Clock | None = None,
                 rng: random.Random | None = None,
                 store: UserStore | None = None):
        self.config = config
        self.driver = driver
        self.transport = transport
        self.clock = clock or WallClock()
        self.rng = rng or random.SystemRandom()
        self.store = store or UserStore(config.sid, config.state_dir, config.levels)
        self._sessions: dict[str, Session] = {}
        self._s2s_handles: dict[str, str] = {}  # handle -> session token
        self._mirror: tuple[ServerRecord, ...] = ()
        self.degraded = False
        self._lock = threading.RLock()
        self._counter = 0

    # --- identifiers -----------------------------------------------------------

    def _next_id(self, prefix: str) -> str:
        with self._lock:
            self._counter += 1
            return f"{prefix}{self._counter:04d}"

    def _new_token(self) -> str:
        return f"{self.rng.getrandbits(128):032x}"

    # --- registry mirror ---------------------------------------------------------

    @property
    def mirror(self) -> tuple[ServerRecord, ...]:
        with self._lock:
            return self._mirror

    def sync_mirror(self, records: tuple[ServerRecord, ...]) -> None:
        with self._lock:
            self._mirror = tuple(sorted(records, key=lambda r: r.name))
            self.degraded = False

    def poll_nmu(self) -> bool:
        """Refresh the mirror from the registry; degraded on failure."""
        if not self.config.nmu_url or self.transport is None:
            self.degraded = True
            return False
        from silmesh.codec.parse import parse_document

        try:
            resp = self.transport.request(
                "GET", self.config.nmu_url.rstrip("/") + "/nmu/servers",
                {"X-Server-Id": self.config.sid})
            if resp.status >= 400:
                self.degraded = True
                return False
            doc = parse_document(resp.body)
            self.sync_mirror(doc.payloads[0].body)
            return True
        except TransportError:
            self.degraded = True
            return False

    def server_url(self, sid: str) -> str | None:
        if sid == self.config.sid and self.config.self_url:
            return self.config.self_url
        for record in self.mirror:
            if record.name == sid:
                return record.url
        return None

    # --- sessions ---------------------------------------------------------------

    def authenticate(self, login: str, passwd: str | None) -> Session:
        record = self.store.verify(login, passwd)
        now = self.clock.now()
        session = Session(token=self._new_token(), login=login,
                          level=record.level,
                          expires_at=now + self.config.session_ttl_s)
        with self._lock:
            self._sessions[session.token] = session
        return session

    def open_s2s_session(self, login: str, level: int, origin_sid: str) -> Session:
        """Session for a forwarded query, authorized by its identification
        tag rather than a password; holds the remote-side cache."""
        now = self.clock.now()
        session = Session(token=self._new_token(), login=login, level=level,
                          expires_at=now + self.config.session_ttl_s,
                          origin_sid=origin_sid)
        with self._lock:
            self._sessions[session.token] = session
        return session

    def session(self, token: str | None) -> Session:
        with self._lock:
            session = self._sessions.get(token or "")
            if session is None:
                raise SessionExpired("no such session")
            if self.clock.now() > session.expires_at:
                del self._sessions[token]
                raise SessionExpired("session expired")
            return session

    # --- transactions --------------------------------------------------------------

    def _expired(self, txn: Transaction) -> bool:
        return self.clock.now() - txn.last_touch > self.config.timeout_s

    def _materialize_timeout(self, txn: Transaction) -> None:
        if txn.state == "open" and self._expired(txn):
            txn.release()

    def open_transaction(self, session: Session) -> Transaction:
        with self._lock:
            if session.txn is not None:
                self._materialize_timeout(session.txn)
                if session.txn.state == "open":
                    session.txn.touch(self.clock.now())
                    return session.txn
            txn = Transaction(self._next_id("t"), self.clock.now())
            session.txn = txn
            return txn

    def _current_txn(self, session: Session, txn_id: str | None) -> Transaction:
        txn = session.txn
        if txn is None or (txn_id is not None and txn.txn_id != txn_id):
            raise UnknownTransaction(f"no transaction '{txn_id or ''}'")
        return txn

    def close_transaction(self, session: Session, txn_id: str | None = None) -> str:
        with self._lock:
            txn = self._current_txn(session, txn_id)
            txn.release()
            return txn.txn_id

    def is_open(self, session: Session, txn_id: str | None = None) -> bool:
        # Pure read: reports the effective state without mutating it.
        with self._lock:
            txn = self._current_txn(session, txn_id)
            return txn.state == "open" and not self._expired(txn)

    def require_open(self, session: Session, handle_op: bool = False) -> Transaction:
        """The session's transaction, required to be effectively open."""
        with self._lock:
            txn = session.txn
            if txn is None:
                raise NoOpenTransaction("no transaction has been opened")
            self._materialize_timeout(txn)
            if txn.state != "open":
                if handle_op:
                    raise UnknownTransaction(
                        f"transaction '{txn.txn_id}' is closed; its result "
                        "sets are released")
                raise NoOpenTransaction(f"transaction '{txn.txn_id}' is closed")
            return txn

    def commit(self, session: Session) -> None:
        with self._lock:
            txn = session.txn
            if txn is None:
                raise TransactionClosed("no transaction to commit")
            self._materialize_timeout(txn)
            if txn.state != "open":
                raise TransactionClosed(f"transaction '{txn.txn_id}' is closed")
            pending = dict(txn.pending_ws)
            txn.pending_ws.clear()
            txn.touch(self.clock.now())
        for ws in pending.values():  # durable writes outside the core lock
            self.store.save_workspace(session.login, ws)

    def abort(self, session: Session) -> None:
        with self._lock:
            txn = session.txn
            if txn is None:
                raise TransactionClosed("no transaction to abort")
            self._materialize_timeout(txn)
            if txn.state != "open":
                raise TransactionClosed(f"transaction '{txn.txn_id}' is closed")
            txn.pending_ws.clear()
            for snapshot in txn.held.values():
                snapshot.cancelled = True
            for bh in txn.broadcasts.values():
                bh.cancelled = True
            txn.touch(self.clock.now())

    def sweep(self) -> None:
        """Release held sets of timed-out transactions and drop dead sessions."""
        now = self.clock.now()
        with self._lock:
            for token in [t for t, s in self._sessions.items()
                          if now > s.expires_at]:
                del self._sessions[token]
            for session in self._sessions.values():
                if session.txn is not None:
                    self._materialize_timeout(session.txn)

    def start_sweeper(self, interval_s: float = 30.0) -> threading.Thread:
        # Real sleep on purpose: with a simulated clock a sleeping sweeper
        # would race logical time forward.
        def loop():
            while True:
                time.sleep(interval_s)
                self.sweep()

        thread = threading.Thread(target=loop, name=f"sweep:{self.config.sid}",
                                  daemon=True)
        thread.start()
        return thread

    # --- queries ------------------------------------------------------------------

    def local_query(self, session: Session, query: Query) -> str:
        txn = self.require_open(session)
        connection = self.driver.open_connection()
        connection.begin()
        try:
            driver_handle = connection.run(query)
            entries: list[ResultEntry] = []
            while not driver_handle.exhausted:
                entries.extend(connection.next(driver_handle, 256))
        finally:
            connection.end()
        # authorization filter happens before anything is cached
        visible = tuple(e for e in entries if e.required_level <= session.level)
        if query.max_results is not None:
            visible = visible[:query.max_results]
        handle = self._next_id("h")
        with self._lock:
            txn.held[handle] = Snapshot(query_id=query.query_id, entries=visible)
            txn.touch(self.clock.now())
        return handle

    def fetch_results(self, session: Session, handle: str,
                      max_count: int) -> tuple[list[ResultEntry], int, bool]:
        txn = self.require_open(session, handle_op=True)
        with self._lock:
            snapshot = txn.held.get(handle)
            if snapshot is None:
                raise UnknownHandle(f"no result set '{handle}'")
            if snapshot.cancelled:
                raise EnumerationCancelled("enumeration cancelled by abort")
            page = list(snapshot.entries[snapshot.pos:snapshot.pos + max_count])
            snapshot.pos += len(page)
            done = snapshot.pos >= len(snapshot.entries)
            txn.touch(self.clock.now())
            return page, snapshot.pos, done

    def snapshot_size(self, session: Session, handle: str) -> int:
        txn = self.require_open(session, handle_op=True)
        with self._lock:
            snapshot = txn.held.get(handle)
            if snapshot is None:
                raise UnknownHandle(f"no result set '{handle}'")
            return len(snapshot.entries)

    def count_query(self, session: Session, query: Query) -> int:
        txn = self.require_open(session)
        handle = self.local_query(session, query)
        with self._lock:
            size = len(txn.held[handle].entries)
            del txn.held[handle]  # count never materializes to the caller
        return size

    # --- workspaces ------------------------------------------------------------------

    def save_workspace(self, session: Session, ws: Workspace) -> None:
        txn = self.require_open(session)
        with self._lock:
            txn.pending_ws[ws.name] = ws
            txn.touch(self.clock.now())

    def load_workspace(self, session: Session, name: str) -> Workspace:
        with self._lock:
            txn = session.txn
            if txn is not None and txn.state == "open" and name in txn.pending_ws:
                return txn.pending_ws[name]
        return self.store.load_workspace(session.login, name)

    # --- resources -------------------------------------------------------------------

    def get_resource(self, level: int, resource_uri: str) -> tuple[ResultEntry, bytes]:
        entry, content = self.driver.get_content(resource_uri)
        if entry.required_level > level:
            raise LevelDenied(
                f"resource requires level {entry.required_level}, caller has {level}")
        return entry, content

    # --- forwarded (server-to-server) queries -------------------------------------------

    def s2s_open(self, login: str, level: int, origin_sid: str,
                 query: Query) -> tuple[str, int]:
        session = self.open_s2s_session(login, level, origin_sid)
        self.open_transaction(session)
        handle = self.local_query(session, query)
        with self._lock:
            self._s2s_handles[handle] = session.token
        return handle, self.snapshot_size(session, handle)

    def s2s_count(self, login: str, level: int, origin_sid: str,
                  query: Query) -> int:
        session = self.open_s2s_session(login, level, origin_sid)
        self.open_transaction(session)
        count = self.count_query(session, query)
        self.close_transaction(session)
        with self._lock:
            self._sessions.pop(session.token, None)
        return count

    def s2s_fetch(self, handle: str,
                  max_count: int) -> tuple[str, list[ResultEntry], int, bool]:
        with self._lock:
            token = self._s2s_handles.get(handle)
        if token is None:
            raise UnknownHandle(f"no forwarded result set '{handle}'")
        session = self.session(token)
        with self._lock:
            snapshot = session.txn.held.get(handle) if session.txn else None
            query_id = snapshot.query_id if snapshot else "fwd"
        page, cursor, done = self.fetch_results(session, handle, max_count)
        if done:
            self.close_transaction(session)
            with self._lock:
                self._s2s_handles.pop(handle, None)
                self._sessions.pop(token, None)
        return query_id, page, cursor, done
