"""Network management unit: the only persistent link between servers.

Holds one record per affiliated server (name, URL, status flag, profile),
answers listing queries from member servers, and pushes the full current
registry to every online server after each committed change. Only
admin-credentialed calls mutate the registry; servers never write here.

State survives restarts through an append-only change log plus a snapshot,
both in the net vocabulary of the interface language.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import queue
import secrets
import threading
from dataclasses import dataclass, field, replace

from silmesh.clock import Clock, WallClock
from silmesh.codec import model
from silmesh.codec.model import ServerProfile, ServerRecord, net_document, service_uid
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import _esc_attr, serialize_document
from silmesh.codec.validate import URL_RE
from silmesh.errors import (
    AdminAuthFailed,
    DuplicateName,
    InvalidChange,
    InvalidUrl,
    SchemaViolation,
    UnknownRequester,
    UnknownServer,
)
from silmesh.transport import (
    Service,
    Transport,
    TransportError,
    WireRequest,
    WireResponse,
)

PUSH_RETRIES = 3
PUSH_RETRY_DELAY_S = 2.0


def hash_secret(secret: str, salt: str | None = None, iterations: int = 50_000) -> str:
    salt = salt or secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac("sha256", secret.encode(), bytes.fromhex(salt),
                                 iterations)
    return f"pbkdf2${iterations}${salt}${digest.hex()}"


def verify_secret(stored: str, secret: str) -> bool:
    try:
        _, iterations, salt, digest = stored.split("$")
        candidate = hashlib.pbkdf2_hmac("sha256", secret.encode(),
                                        bytes.fromhex(salt), int(iterations))
        return hmac.compare_digest(candidate.hex(), digest)
    except (ValueError, AttributeError):
        return False


@dataclass(frozen=True)
class DeliveryReport:
    """Outcome of one full-state push, queryable after the fact."""

    seq: int
    outcomes: tuple[tuple[str, str, str], ...] = ()  # (server, ok|failed, detail)

    def ok(self) -> bool:
        return all(state == "ok" for _, state, _ in self.outcomes)

    def to_xml(self, pending: int) -> bytes:
        rows = "".join(
            f'<target name="{_esc_attr(n)}" outcome="{s}"'
            + (f' detail="{_esc_attr(d)}"' if d else "")
            + "/>"
            for n, s, d in self.outcomes)
        return (f'<push-report seq="{self.seq}" pending="{pending}">{rows}'
                f"</push-report>").encode()


@dataclass
class NmuConfig:
    admin_hash: str
    state_dir: str | None = None
    sid: str = "nmu"
    push_async: bool = True
    retries: int = PUSH_RETRIES
    retry_delay_s: float = PUSH_RETRY_DELAY_S


class NmuRegistry:
    """Registry core: serialized mutations, replayed state, push fan-out."""

    def __init__(self, config: NmuConfig, transport: Transport,
                 clock: Clock | None = None):
        self.config = config
        self.transport = transport
        self.clock = clock or WallClock()
        self._records: dict[str, ServerRecord] = {}
        self._seq = 0
        self._lock = threading.RLock()
        self._last_report: DeliveryReport = DeliveryReport(seq=0)
        self._pending: queue.Queue[int] | None = None
        self._replay()
        if config.push_async:
            self._pending = queue.Queue()
            worker = threading.Thread(target=self._push_loop, name="nmu-push",
                                      daemon=True)
            worker.start()

    # --- credential ---------------------------------------------------------

    def check_admin(self, secret: str | None) -> None:
        if secret is None or not verify_secret(self.config.admin_hash, secret):
            raise AdminAuthFailed("admin credential rejected")

    # --- persistence ----------------------------------------------------------

    def _paths(self) -> tuple[str, str] | None:
        if not self.config.state_dir:
            return None
        os.makedirs(self.config.state_dir, exist_ok=True)
        return (os.path.join(self.config.state_dir, "registry.log"),
                os.path.join(self.config.state_dir, "registry.xml"))

    def _replay(self) -> None:
        paths = self._paths()
        if paths is None:
            return
        log_path, snap_path = paths
        if os.path.exists(snap_path):
            with open(snap_path, "rb") as fh:
                doc = parse_document(fh.read())
            self._seq = doc.net_seq or 0
            self._records = {r.name: r for r in doc.payloads[0].body}
        if os.path.exists(log_path):
            with open(log_path, "rb") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    doc = parse_document(line)
                    if (doc.net_seq or 0) <= self._seq:
                        continue
                    self._apply_logged(doc)
                    self._seq = doc.net_seq or self._seq

    def _apply_logged(self, doc) -> None:
        record = doc.payloads[0].body[0]
        if doc.net_op in ("register", "update", "sync-offline"):
            self._records[record.name] = record
        elif doc.net_op == "disconnect":
            old = self._records.get(record.name)
            if old is not None:
                self._records[record.name] = replace(old, status="disconnected",
                                                     last_update=record.last_update)

    def _commit(self, op: str, record: ServerRecord) -> None:
        self._seq += 1
        self._records[record.name] = record
        paths = self._paths()
        if paths is None:
            return
        log_path, snap_path = paths
        uid = service_uid(self.config.sid)
        entry = net_document(self.config.sid, uid, (record,), op=op, seq=self._seq,
                             update=self.clock.stamp())
        with open(log_path, "ab") as fh:
            fh.write(serialize_document(entry) + b"\n")
        snapshot = net_document(self.config.sid, uid, self.snapshot_records(),
                                seq=self._seq, update=self.clock.stamp())
        tmp = snap_path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(serialize_document(snapshot))
        os.replace(tmp, snap_path)

    # --- queries ---------------------------------------------------------------

    def snapshot_records(self) -> tuple[ServerRecord, ...]:
        with self._lock:
            return tuple(self._records[name] for name in sorted(self._records))

    def list_servers(self, requester_sid: str | None, *, admin: bool = False,
                     include_disconnected: bool = False) -> tuple[ServerRecord, ...]:
        with self._lock:
            if not admin:
                rec = self._records.get(requester_sid or "")
                if rec is None or rec.status == "disconnected":
                    raise UnknownRequester(
                        f"'{requester_sid}' is not an affiliated server")
            records = self.snapshot_records()
        if include_disconnected:
            return records
        return tuple(r for r in records if r.status != "disconnected")

    def last_push_report(self) -> tuple[DeliveryReport, int]:
        with self._lock:
            pending = self._pending.qsize() if self._pending else 0
            return self._last_report, pending

    # --- admin mutations --------------------------------------------------------

    def register_server(self, secret: str | None, name: str, url: str | None,
                        profile: ServerProfile | None) -> ServerRecord:
        self.check_admin(secret)
        if not url or not URL_RE.match(url):
            raise InvalidUrl(f"'{url}' is not a usable server address")
        with self._lock:
            if name in self._records:
                raise DuplicateName(f"server '{name}' is already registered")
            record = ServerRecord(name=name, url=url, status="online",
                                  profile=profile or ServerProfile(),
                                  last_update=self.clock.stamp())
            self._commit("register", record)
        self._schedule_push()
        return record

    def update_server(self, secret: str | None, name: str,
                      changes: dict) -> ServerRecord:
        self.check_admin(secret)
        if "name" in changes:
            raise InvalidChange("a server record cannot be renamed")
        unknown = set(changes) - {"url", "status", "profile"}
        if unknown:
            raise InvalidChange(f"unknown fields: {', '.join(sorted(unknown))}")
        with self._lock:
            old = self._records.get(name)
            if old is None:
                raise UnknownServer(f"no server named '{name}'")
            url = changes.get("url", old.url)
            if not url or not URL_RE.match(url):
                raise InvalidUrl(f"'{url}' is not a usable server address")
            status = changes.get("status", old.status)
            if status not in model.SERVER_STATUSES:
                raise InvalidChange(f"status '{status}' is not allowed")
            record = replace(old, url=url, status=status,
                             profile=changes.get("profile", old.profile),
                             last_update=self.clock.stamp())
            self._commit("update", record)
        self._schedule_push()
        return record

    def disconnect_server(self, secret: str | None, name: str) -> ServerRecord:
        self.check_admin(secret)
        with self._lock:
            old = self._records.get(name)
            if old is None:
                raise UnknownServer(f"no server named '{name}'")
            if old.status == "disconnected":
                return old  # idempotent; record retained for audit
            record = replace(old, status="disconnected",
                             last_update=self.clock.stamp())
            self._commit("disconnect", record)
        self._schedule_push()
        return record

    # --- push -------------------------------------------------------------------

    def _schedule_push(self) -> None:
        if self._pending is not None:
            with self._lock:
                self._pending.put(self._seq)
        else:
            self._execute_push()

    def _push_loop(self) -> None:
        while True:
            self._pending.get()
            try:
                self._execute_push()
            finally:
                self._pending.task_done()

    def flush_pushes(self) -> None:
        """Block until every scheduled push has completed (tests, shutdown)."""
        if self._pending is not None:
            self._pending.join()

    def _execute_push(self) -> None:
        with self._lock:
            seq = self._seq
            targets = [r for r in self.snapshot_records() if r.status == "online"]
            records = self.snapshot_records()
        doc = net_document(self.config.sid, service_uid(self.config.sid), records,
                           seq=seq, update=self.clock.stamp())
        body = serialize_document(doc)
        outcomes = []
        for target in targets:
            detail = ""
            for attempt in range(self.config.retries):
                try:
                    resp = self.transport.request(
                        "POST", target.url.rstrip("/") + "/net/sync",
                        {"Content-Type": "text/xml",
                         "X-Server-Id": self.config.sid}, body)
                    if resp.status < 400:
                        outcomes.append((target.name, "ok", ""))
                        break
                    detail = f"status {resp.status}"
                except TransportError as exc:
                    detail = str(exc)
                if attempt < self.config.retries - 1:
                    self.clock.sleep(self.config.retry_delay_s)
            else:
                outcomes.append((target.name, "failed", detail))
                self._mark_offline(target.name)
        with self._lock:
            self._last_report = DeliveryReport(seq=seq, outcomes=tuple(outcomes))

    def _mark_offline(self, name: str) -> None:
        # A push failure is a sync result: the flag flips without an admin call,
        # and the next push delivers the new state (full-state is self-healing).
        with self._lock:
            old = self._records.get(name)
            if old is None or old.status != "online":
                return
            record = replace(old, status="offline", last_update=self.clock.stamp())
            self._commit("sync-offline", record)


class NmuService(Service):
    """HTTP surface of the registry."""

    ROUTES = [
        ("POST", "/nmu/admin/register", "post_register"),
        ("POST", "/nmu/admin/update", "post_update"),
        ("POST", "/nmu/admin/disconnect", "post_disconnect"),
        ("GET", "/nmu/servers", "get_servers"),
        ("GET", "/nmu/reports/last-push", "get_last_push"),
    ]

    def __init__(self, registry: NmuRegistry):
        self.registry = registry

    def _one_record(self, request: WireRequest) -> ServerRecord:
        doc = parse_document(request.body)
        if doc.doc_type != "net" or len(doc.payloads[0].body) != 1:
            raise SchemaViolation("expected a net document with one server element")
        return doc.payloads[0].body[0]

    def _net_response(self, records: tuple[ServerRecord, ...],
                      status: int = 200) -> WireResponse:
        doc = net_document(self.registry.config.sid,
                           service_uid(self.registry.config.sid), records,
                           update=self.registry.clock.stamp())
        return WireResponse(status, {"Content-Type": "text/xml"},
                            serialize_document(doc))

    def post_register(self, request: WireRequest) -> WireResponse:
        record = self._one_record(request)
        saved = self.registry.register_server(
            request.header("X-NMU-Admin"), record.name, record.url, record.profile)
        return self._net_response((saved,), status=201)

    def post_update(self, request: WireRequest) -> WireResponse:
        record = self._one_record(request)
        changes: dict = {}
        if record.url is not None:
            changes["url"] = record.url
        if record.status is not None:
            changes["status"] = record.status
        if record.profile is not None:
            changes["profile"] = record.profile
        saved = self.registry.update_server(request.header("X-NMU-Admin"),
                                            record.name, changes)
        return self._net_response((saved,))

    def post_disconnect(self, request: WireRequest) -> WireResponse:
        record = self._one_record(request)
        saved = self.registry.disconnect_server(request.header("X-NMU-Admin"),
                                                record.name)
        return self._net_response((saved,))

    def get_servers(self, request: WireRequest) -> WireResponse:
        admin_secret = request.header("X-NMU-Admin")
        admin = False
        if admin_secret is not None:
            self.registry.check_admin(admin_secret)
            admin = True
        records = self.registry.list_servers(
            request.header("X-Server-Id"), admin=admin,
            include_disconnected=request.query.get("include_disconnected") == "1")
        return self._net_response(records)

    def get_last_push(self, request: WireRequest) -> WireResponse:
        self.registry.check_admin(request.header("X-NMU-Admin"))
        report, pending = self.registry.last_push_report()
        return WireResponse(200, {"Content-Type": "text/xml"},
                            report.to_xml(pending))
