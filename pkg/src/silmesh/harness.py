"""Desk-scale mesh harness: deterministic multi-server networks.

Builds a registry plus any number of servers either on the in-memory
carrier or on real loopback HTTP, with one shared simulated clock, seeded
randomness per actor, and a transcript that captures every message crossing
the wire. A scenario script replays a user's session step by step; the same
script with the same seed produces a byte-identical transcript, on either
carrier.
"""

from __future__ import annotations

import random
import shlex
from dataclasses import dataclass

from silmesh import client as sdk
from silmesh.clock import SimClock
from silmesh.codec.model import (
    ServerProfile,
    ServerRecord,
    net_document,
    service_uid,
)
from silmesh.codec.serialize import serialize_document
from silmesh.errors import (
    BindFailed,
    ExpectationFailed,
    NmuUnreachable,
    SilError,
)
from silmesh.nmu import NmuConfig, NmuRegistry, NmuService, hash_secret
from silmesh.server.catalog import CatalogEntry, MemoryCatalogDriver
from silmesh.server.core import ServerConfig, ServerCore
from silmesh.server.service import ServerService
from silmesh.transport import (
    InMemoryHub,
    InMemoryTransport,
    HttpTransport,
    LoopbackServer,
    RecordingTransport,
    Transcript,
    raise_for_response,
)

ADMIN_SECRET = "mesh-admin-secret"
DEFAULT_PORT_BASE = 7310


@dataclass
class ServerUnit:
    sid: str
    url: str
    core: ServerCore
    service: ServerService
    driver: MemoryCatalogDriver


class Mesh:
    """One registry, N servers, any number of clients, one transcript."""

    def __init__(self, transport: str = "memory", seed: int = 0,
                 port_base: int = DEFAULT_PORT_BASE,
                 timeout_s: float = 300.0, page_size: int = 50,
                 cache_capacity: int = 1000):
        self.kind = transport
        self.seed = seed
        self.port_base = port_base
        self.timeout_s = timeout_s
        self.page_size = page_size
        self.cache_capacity = cache_capacity
        self.clock = SimClock()
        self.transcript = Transcript()
        self.hub = InMemoryHub()
        self.nmu: NmuRegistry | None = None
        self.nmu_url = ""
        self.servers: dict[str, ServerUnit] = {}
        self.clients: dict[str, sdk.ClientSession] = {}
        self._loopbacks: list[LoopbackServer] = []
        self._ports = iter(range(port_base, port_base + 64))
        self._actor_seq = 0

    # --- plumbing ---------------------------------------------------------------

    def _rng(self) -> random.Random:
        self._actor_seq += 1
        return random.Random(self.seed * 1009 + self._actor_seq)

    def _transport(self, actor: str) -> RecordingTransport:
        base = (InMemoryTransport(self.hub) if self.kind == "memory"
                else HttpTransport())
        return RecordingTransport(base, self.transcript, actor)

    def _mount(self, name: str, service) -> str:
        if self.kind == "memory":
            url = f"http://127.0.0.1:{next(self._ports)}"
            self.hub.register(url, service)
        else:
            server = LoopbackServer(service, next(self._ports))
            self._loopbacks.append(server)
            url = server.url
        self.transcript.name_address(url, name)
        return url

    def stop(self) -> None:
        for server in self._loopbacks:
            server.stop()
        self._loopbacks.clear()

    # --- booting ---------------------------------------------------------------

    def boot_nmu(self, state_dir: str | None = None) -> None:
        config = NmuConfig(admin_hash=hash_secret(ADMIN_SECRET),
                           state_dir=state_dir, push_async=False)
        self.nmu = NmuRegistry(config, self._transport("nmu"), clock=self.clock)
        self.nmu_url = self._mount("nmu", NmuService(self.nmu))

    def boot_server(self, sid: str, levels: dict[str, int] | None = None,
                    state_dir: str | None = None) -> ServerUnit:
        driver = MemoryCatalogDriver(sid)
        config = ServerConfig(
            sid=sid, nmu_url=self.nmu_url or None, state_dir=state_dir,
            timeout_s=self.timeout_s, page_size=self.page_size,
            cache_capacity=self.cache_capacity, levels=dict(levels or {}))
        core = ServerCore(config, driver, transport=self._transport(sid),
                          clock=self.clock, rng=self._rng())
        service = ServerService(core, core.transport)
        url = self._mount(sid, service)
        core.config.self_url = url
        core.poll_nmu()  # mirror on boot; degraded when the registry is down
        unit = ServerUnit(sid=sid, url=url, core=core, service=service,
                          driver=driver)
        self.servers[sid] = unit
        return unit

    # --- admin operations (over the wire, as the network master) -------------------

    def _admin_call(self, path: str, record: ServerRecord) -> None:
        transport = self._transport("admin")
        doc = net_document("admin", service_uid("admin"), (record,),
                           update=self.clock.stamp())
        resp = transport.request(
            "POST", self.nmu_url + path,
            {"Content-Type": "text/xml", "X-NMU-Admin": ADMIN_SECRET},
            serialize_document(doc))
        raise_for_response(resp)

    def admin_register(self, sid: str,
                       profile: ServerProfile | None = None) -> None:
        unit = self.servers[sid]
        self._admin_call("/nmu/admin/register",
                         ServerRecord(name=sid, url=unit.url, profile=profile))

    def admin_update(self, sid: str, url: str | None = None,
                     status: str | None = None,
                     profile: ServerProfile | None = None) -> None:
        self._admin_call("/nmu/admin/update",
                         ServerRecord(name=sid, url=url, status=status,
                                      profile=profile))

    def admin_disconnect(self, sid: str) -> None:
        self._admin_call("/nmu/admin/disconnect", ServerRecord(name=sid))

    # --- fixtures -----------------------------------------------------------------

    def add_user(self, sid: str, login: str, passwd: str,
                 groups: tuple[str, ...] = (), **kw) -> None:
        self.servers[sid].core.store.add_user(login, passwd, groups, **kw)

    def add_resource(self, sid: str, local_id: str, title: str, language: str,
                     category: str, level: int = 0, content: bytes = b"",
                     content_type: str = "text/plain",
                     uri: str | None = None) -> str:
        uri = uri or f"sil://{sid}/{local_id}"
        self.servers[sid].driver.add(CatalogEntry(
            resource_uri=uri, title=title, language=language,
            category=category, required_level=level,
            content_type=content_type, content=content))
        return uri

    # --- clients ---------------------------------------------------------------------

    def connect(self, label: str, sid: str, login: str,
                passwd: str) -> sdk.ClientSession:
        session = sdk.connect(self.servers[sid].url, login, passwd,
                              transport=self._transport(label),
                              clock=self.clock)
        self.clients[label] = session
        return session


# --- scenario scripts -------------------------------------------------------------


class ScenarioError(SilError):
    pass


class ScenarioRunner:
    """Line-oriented step format: one verb per line, shell-style quoting.

    Replaying the same script with the same seed yields a byte-identical
    transcript; `expect` arguments turn observations into hard assertions.
    """

    def __init__(self, transport: str = "memory", seed: int = 0,
                 port_base: int = DEFAULT_PORT_BASE):
        self.transport = transport
        self.seed = seed
        self.port_base = port_base
        self.mesh: Mesh | None = None
        self._drained: dict[tuple[str, str], list] = {}
        self._wire_cursor = 0

    def run(self, text: str) -> Transcript:
        try:
            for lineno, raw in enumerate(text.splitlines(), start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    self._step(shlex.split(line))
                except ExpectationFailed:
                    raise
                except (BindFailed, NmuUnreachable):
                    raise
                except SilError as exc:
                    raise ScenarioError(f"line {lineno}: {line}: {exc}") from exc
            return self.mesh.transcript if self.mesh else Transcript()
        finally:
            if self.mesh:
                self.mesh.stop()

    def _require_mesh(self) -> Mesh:
        if self.mesh is None:
            self.mesh = Mesh(transport=self.transport, seed=self.seed,
                             port_base=self.port_base)
        return self.mesh

    def _step(self, argv: list[str]) -> None:
        verb, args = argv[0], argv[1:]
        method = getattr(self, f"_v_{verb.replace('-', '_')}", None)
        if method is None:
            raise ScenarioError(f"unknown verb '{verb}'")
        method(args)

    # --- verbs --------------------------------------------------------------

    def _v_seed(self, args):
        self.seed = int(args[0])

    def _v_boot(self, args):
        mesh = self._require_mesh()
        if args[0] == "nmu":
            mesh.boot_nmu()
        elif args[0] == "server":
            mesh.boot_server(args[1])
        else:
            raise ScenarioError(f"boot what? '{args[0]}'")

    def _v_admin(self, args):
        mesh = self._require_mesh()
        if args[0] == "register":
            mesh.admin_register(args[1])
        elif args[0] == "disconnect":
            mesh.admin_disconnect(args[1])
        elif args[0] == "update":
            changes = dict(kv.split("=", 1) for kv in args[2:])
            mesh.admin_update(args[1], **changes)
        else:
            raise ScenarioError(f"unknown admin operation '{args[0]}'")

    def _v_user(self, args):
        sid, login, passwd, *groups = args
        self._require_mesh().add_user(sid, login, passwd, tuple(groups))

    def _v_catalog(self, args):
        sid, local_id, title, lang, cat, level = args[:6]
        content = args[6].encode() if len(args) > 6 else b""
        self._require_mesh().add_resource(sid, local_id, title, lang, cat,
                                          int(level), content)

    def _v_connect(self, args):
        label, sid, login, passwd = args
        self._require_mesh().connect(label, sid, login, passwd)

    def _client(self, label: str) -> sdk.ClientSession:
        return self._require_mesh().clients[label]

    def _v_choose(self, args):
        sdk.choose_servers(self._client(args[0]), list(args[1:]))

    def _v_open(self, args):
        sdk.open_transaction(self._client(args[0]))

    def _v_close(self, args):
        sdk.close_transaction(self._client(args[0]))

    def _v_commit(self, args):
        sdk.commit(self._client(args[0]))

    def _v_abort(self, args):
        sdk.abort(self._client(args[0]))

    def _parse_clauses(self, parts: list[str]):
        if len(parts) % 3:
            raise ScenarioError("clauses come as triplets: field op value")
        return [(parts[i], parts[i + 1], parts[i + 2])
                for i in range(0, len(parts), 3)]

    def _v_query(self, args):
        label, qid, *rest = args
        q = sdk.build_query(qid, self._parse_clauses(rest))
        pages = sdk.query(self._client(label), q)
        self._drained[(label, qid)] = pages.drain()

    def _v_drain(self, args):
        label, qid, kw, expected = args
        if kw != "expect":
            raise ScenarioError("usage: drain <label> <qid> expect <n>")
        got = len(self._drained.get((label, qid), []))
        if got != int(expected):
            raise ExpectationFailed(f"drain {label} {qid}",
                                    f"expected {expected} entries, got {got}")

    def _v_count(self, args):
        label, qid, *rest = args
        expected = None
        if len(rest) >= 2 and rest[-2] == "expect":
            expected = int(rest[-1])
            rest = rest[:-2]
        q = sdk.build_query(qid, self._parse_clauses(rest),
                            scope="content-count")
        rs = sdk.count(self._client(label), q)
        if expected is not None and rs.total != expected:
            raise ExpectationFailed(f"count {label} {qid}",
                                    f"expected total {expected}, got {rs.total}")

    def _v_basket(self, args):
        label, op, name, *uris = args
        if op != "add":
            raise ScenarioError(f"unknown basket operation '{op}'")
        sdk.add_to_basket(self._client(label), name, list(uris))

    def _v_save(self, args):
        sdk.save(self._client(args[0]))

    def _v_load(self, args):
        label = args[0]
        name = args[1] if len(args) > 1 else "default"
        sdk.load_workspace(self._client(label), name)

    def _v_fetch(self, args):
        label, uri, *rest = args
        entry, content = sdk.fetch_resource(self._client(label), uri)
        if rest and rest[0] == "expect-bytes" and len(content) != int(rest[1]):
            raise ExpectationFailed(f"fetch {label} {uri}",
                                    f"expected {rest[1]} bytes, got {len(content)}")

    def _v_advance(self, args):
        self._require_mesh().clock.advance(float(args[0]))

    def _v_txn_status(self, args):
        label, kw, expected = args
        if kw != "expect":
            raise ScenarioError("usage: txn-status <label> expect open|closed")
        session = self._client(label)
        resp = sdk._call(session, "GET", "/txn/status")
        import xml.etree.ElementTree as ET

        state = "open" if ET.fromstring(resp.body).get("open") == "1" else "closed"
        if state != expected:
            raise ExpectationFailed(f"txn-status {label}",
                                    f"expected {expected}, got {state}")

    def _v_expect_wire(self, args):
        method, path, src, dst = args
        transcript = self._require_mesh().transcript
        for msg in transcript.messages[self._wire_cursor:]:
            if (msg.kind == "request" and msg.method == method
                    and msg.target.split("?", 1)[0].startswith(path)
                    and msg.src == src and msg.dst == dst):
                self._wire_cursor = msg.seq
                return
        raise ExpectationFailed(
            f"expect-wire {method} {path} {src} {dst}",
            f"no matching request after message {self._wire_cursor}")

    def _v_down(self, args):
        mesh = self._require_mesh()
        if mesh.kind != "memory":
            raise ScenarioError("down/up steps need the in-memory carrier")
        mesh.hub.set_down(mesh.servers[args[0]].url, True)

    def _v_up(self, args):
        mesh = self._require_mesh()
        mesh.hub.set_down(mesh.servers[args[0]].url, False)


def run_scenario_file(path: str, transport: str = "memory", seed: int = 0,
                      port_base: int = DEFAULT_PORT_BASE) -> Transcript:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return ScenarioRunner(transport=transport, seed=seed,
                          port_base=port_base).run(text)
