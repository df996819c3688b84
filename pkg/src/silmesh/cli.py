"""Command-line entry points.

`silmesh` boots the services and drives the mesh:
    silmesh nmu                  run the registry
    silmesh server               run a specialized server
    silmesh server adduser       manage a server's user database offline
    silmesh admin ...            network-master operations against the NMU
    silmesh client ...           one-shot client operations
    silmesh scenario run FILE    replay a scenario script

`silctl` is the codec toolbox:
    silctl validate FILE         parse and report every violation
    silctl canon FILE            print the canonical byte form
    silctl fuzz --seed N         round-trip and rejection self-check
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from silmesh import client as sdk
from silmesh.codec import corpus
from silmesh.codec.model import ServerProfile, ServerRecord, net_document, service_uid
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import canonicalize, serialize_document
from silmesh.codec.validate import validate
from silmesh.errors import (
    BindFailed,
    ExpectationFailed,
    NmuUnreachable,
    SilError,
    UnknownWorkspace,
)
from silmesh.harness import DEFAULT_PORT_BASE, run_scenario_file
from silmesh.nmu import NmuConfig, NmuRegistry, NmuService, hash_secret
from silmesh.server.catalog import FileCatalogDriver, MemoryCatalogDriver
from silmesh.server.core import ServerConfig, ServerCore
from silmesh.server.service import ServerService
from silmesh.server.users import UserStore
from silmesh.transport import HttpTransport, LoopbackServer, raise_for_response


def _bind(value: str) -> int:
    host, _, port = value.rpartition(":")
    if host not in ("", "127.0.0.1", "localhost", "0.0.0.0"):
        raise SilError(f"can only bind locally, not '{host}'")
    return int(port)


def _load_levels(path: str | None) -> dict[str, int]:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return {str(k): int(v) for k, v in json.load(fh).items()}


# --- silmesh ------------------------------------------------------------------


def _cmd_nmu(args) -> int:
    admin_hash = args.admin_hash or os.environ.get("NMU_ADMIN_HASH")
    if not admin_hash and args.admin_secret:
        admin_hash = hash_secret(args.admin_secret)
    if not admin_hash:
        print("need --admin-hash/--admin-secret or NMU_ADMIN_HASH", file=sys.stderr)
        return 3
    config = NmuConfig(admin_hash=admin_hash, state_dir=args.state_dir)
    registry = NmuRegistry(config, HttpTransport())
    try:
        server = LoopbackServer(NmuService(registry), _bind(args.bind))
    except BindFailed as exc:
        print(f"boot failure: {exc}", file=sys.stderr)
        return 3
    print(f"nmu listening on {server.url} (state: {args.state_dir or 'memory'})", flush=True)
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def _cmd_server(args) -> int:
    levels = _load_levels(args.levels)
    config = ServerConfig(
        sid=args.sid, nmu_url=args.nmu_url, state_dir=args.state_dir,
        timeout_s=args.timeout_s, page_size=args.page_size,
        cache_capacity=args.cache_capacity, levels=levels, ui_dir=args.ui_dir)
    if args.catalog_dir:
        driver = FileCatalogDriver(args.sid, args.catalog_dir)
    else:
        driver = MemoryCatalogDriver(args.sid)
    core = ServerCore(config, driver, transport=HttpTransport())
    service = ServerService(core, core.transport)
    try:
        server = LoopbackServer(service, _bind(args.bind))
    except BindFailed as exc:
        print(f"boot failure: {exc}", file=sys.stderr)
        return 3
    core.config.self_url = server.url
    if core.poll_nmu():
        print(f"{args.sid} listening on {server.url}; registry mirrored", flush=True)
    else:
        print(f"{args.sid} listening on {server.url}; DEGRADED (registry "
              "unreachable, local queries only)", flush=True)
    core.start_sweeper()
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def _cmd_adduser(args) -> int:
    store = UserStore(args.sid, args.state_dir, _load_levels(args.levels))
    store.add_user(args.login, args.passwd, tuple(args.group or ()),
                   default_group=(args.group or [None])[0])
    print(f"user '{args.login}' stored under {args.state_dir}")
    return 0


def _admin_request(args, path: str, record: ServerRecord) -> int:
    secret = args.secret or os.environ.get("NMU_ADMIN_SECRET", "")
    doc = net_document("admin", service_uid("admin"), (record,))
    transport = HttpTransport()
    resp = transport.request(
        "POST", args.nmu_url.rstrip("/") + path,
        {"Content-Type": "text/xml", "X-NMU-Admin": secret},
        serialize_document(doc))
    raise_for_response(resp)
    print(resp.body.decode())
    return 0


def _cmd_admin(args) -> int:
    if args.admin_op == "list":
        secret = args.secret or os.environ.get("NMU_ADMIN_SECRET", "")
        resp = HttpTransport().request(
            "GET", args.nmu_url.rstrip("/") + "/nmu/servers?include_disconnected=1",
            {"X-NMU-Admin": secret})
        raise_for_response(resp)
        for record in parse_document(resp.body).payloads[0].body:
            print(f"{record.name:16} {record.status:12} {record.url}")
        return 0
    profile = None
    if getattr(args, "languages", None) or getattr(args, "categories", None):
        profile = ServerProfile(languages=tuple(args.languages or ()),
                                categories=tuple(args.categories or ()))
    if args.admin_op == "register":
        return _admin_request(args, "/nmu/admin/register",
                              ServerRecord(name=args.name, url=args.url,
                                           profile=profile))
    if args.admin_op == "update":
        return _admin_request(args, "/nmu/admin/update",
                              ServerRecord(name=args.name, url=args.url,
                                           status=args.status, profile=profile))
    return _admin_request(args, "/nmu/admin/disconnect",
                          ServerRecord(name=args.name))


def _client_session(args) -> sdk.ClientSession:
    return sdk.connect(args.server_url, args.login, args.passwd)


def _cmd_client(args) -> int:
    session = _client_session(args)
    if args.client_op == "servers":
        for record in session.mirror:
            print(f"{record.name:16} {record.status:12} {record.url}")
        return 0
    if args.client_op in ("query", "count"):
        clauses = [tuple(c.split(":", 2)) for c in args.clause]
        if args.client_op == "count":
            rs = sdk.count(session, sdk.build_query("cli", clauses,
                                                    scope="content-count"))
            for status in rs.statuses:
                print(f"{status.sid:16} {status.state:8} {status.count}")
            print(f"total {rs.total}")
            return 0
        sdk.choose_servers(session, list(args.targets or ()))
        pages = sdk.query(session, sdk.build_query("cli", clauses))
        for entry in pages.drain():
            print(f"{entry.resource_uri}\t{entry.title}\t{entry.language}"
                  f"\t{entry.category}")
        return 0
    if args.client_op == "fetch":
        entry, content = sdk.fetch_resource(session, args.uri)
        if args.out:
            with open(args.out, "wb") as fh:
                fh.write(content)
            print(f"{entry.resource_uri} -> {args.out} ({len(content)} bytes)")
        else:
            sys.stdout.buffer.write(content)
        return 0
    if args.client_op == "basket":
        try:
            sdk.load_workspace(session, args.workspace)
        except UnknownWorkspace:
            pass  # first save creates it
        sdk.add_to_basket(session, args.basket, args.uri)
        sdk.save(session)
        print(f"basket '{args.basket}' now holds "
              f"{[b for b in session.workspace.baskets if b.name == args.basket][0].items}")
        return 0
    raise SilError(f"unknown client operation {args.client_op}")


def _cmd_scenario(args) -> int:
    path = args.file
    if not os.path.exists(path):
        bundled = os.path.join(os.path.dirname(__file__), "scenarios",
                               f"{path}.steps")
        if os.path.exists(bundled):
            path = bundled
    try:
        transcript = run_scenario_file(path, transport=args.transport,
                                       seed=args.seed, port_base=args.port_base)
    except ExpectationFailed as exc:
        print(f"expectation failed: {exc}", file=sys.stderr)
        return 2
    except (BindFailed, NmuUnreachable) as exc:
        print(f"boot failure: {exc}", file=sys.stderr)
        return 3
    data = transcript.to_xml()
    if args.transcript:
        with open(args.transcript, "wb") as fh:
            fh.write(data)
        print(f"ok: {len(transcript.messages)} messages -> {args.transcript}")
    else:
        sys.stdout.buffer.write(data + b"\n")
    return 0


def silmesh_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="silmesh",
                                     description="federated resource mesh")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("nmu", help="run the network management unit")
    p.add_argument("--bind", default=os.environ.get("NMU_BIND", "127.0.0.1:7300"))
    p.add_argument("--state-dir", default=os.environ.get("NMU_STATE_DIR"))
    p.add_argument("--admin-hash", default=None)
    p.add_argument("--admin-secret", default=None,
                   help="derive the admin hash ad hoc (development)")
    p.set_defaults(func=_cmd_nmu)

    p = sub.add_parser("server", help="run a specialized server")
    server_sub = p.add_subparsers(dest="server_op")
    p.add_argument("--sid", default=os.environ.get("SRV_SID", "srv"))
    p.add_argument("--bind", default=os.environ.get("SRV_BIND", "127.0.0.1:7301"))
    p.add_argument("--nmu-url", default=os.environ.get("SRV_NMU_URL"))
    p.add_argument("--state-dir", default=os.environ.get("SRV_STATE_DIR"))
    p.add_argument("--timeout-s", type=float,
                   default=float(os.environ.get("SRV_TIMEOUT_S", "300")))
    p.add_argument("--page-size", type=int, default=50)
    p.add_argument("--cache-capacity", type=int, default=1000)
    p.add_argument("--levels", default=os.environ.get("SRV_LEVELS_FILE"),
                   help="JSON file mapping group id to authorization level")
    p.add_argument("--catalog-dir", default=None)
    p.add_argument("--ui-dir", default=os.environ.get("SRV_UI_DIR"))
    p.set_defaults(func=_cmd_server)

    pu = server_sub.add_parser("adduser", help="store a user offline")
    pu.add_argument("--sid", default=os.environ.get("SRV_SID", "srv"))
    pu.add_argument("--state-dir", required=True)
    pu.add_argument("--levels", default=None)
    pu.add_argument("login")
    pu.add_argument("passwd")
    pu.add_argument("--group", action="append")
    pu.set_defaults(func=_cmd_adduser)

    p = sub.add_parser("admin", help="network-master operations")
    p.add_argument("--nmu-url", required=True)
    p.add_argument("--secret", default=None)
    admin_sub = p.add_subparsers(dest="admin_op", required=True)
    for op in ("register", "update", "disconnect"):
        pa = admin_sub.add_parser(op)
        pa.add_argument("name")
        if op != "disconnect":
            pa.add_argument("--url", default=None)
            pa.add_argument("--languages", nargs="*")
            pa.add_argument("--categories", nargs="*")
        if op == "update":
            pa.add_argument("--status",
                            choices=("online", "offline", "disconnected"))
        pa.set_defaults(func=_cmd_admin)
    admin_sub.add_parser("list").set_defaults(func=_cmd_admin)

    p = sub.add_parser("client", help="one-shot client operations")
    p.add_argument("--server-url", required=True)
    p.add_argument("--login", required=True)
    p.add_argument("--passwd", required=True)
    client_sub = p.add_subparsers(dest="client_op", required=True)
    client_sub.add_parser("servers").set_defaults(func=_cmd_client)
    pq = client_sub.add_parser("query")
    pq.add_argument("--clause", action="append", required=True,
                    help="field:op:value, e.g. language:eq:fr")
    pq.add_argument("--targets", nargs="*")
    pq.set_defaults(func=_cmd_client)
    pc = client_sub.add_parser("count")
    pc.add_argument("--clause", action="append", required=True)
    pc.set_defaults(func=_cmd_client)
    pf = client_sub.add_parser("fetch")
    pf.add_argument("uri")
    pf.add_argument("--out", default=None)
    pf.set_defaults(func=_cmd_client)
    pb = client_sub.add_parser("basket")
    pb.add_argument("basket")
    pb.add_argument("uri", nargs="+")
    pb.add_argument("--workspace", default="default")
    pb.set_defaults(func=_cmd_client)

    p = sub.add_parser("scenario", help="deterministic scenario replay")
    scen_sub = p.add_subparsers(dest="scenario_op", required=True)
    pr = scen_sub.add_parser("run")
    pr.add_argument("file", help="script path or bundled name (e.g. figure4)")
    pr.add_argument("--transport", choices=("memory", "http"), default="memory")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--port-base", type=int, default=DEFAULT_PORT_BASE)
    pr.add_argument("--transcript", default=None)
    pr.set_defaults(func=_cmd_scenario)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SilError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


# --- silctl -------------------------------------------------------------------


def _ctl_validate(args) -> int:
    with open(args.file, "rb") as fh:
        data = fh.read()
    try:
        doc = parse_document(data)
    except SilError as exc:
        print(f"invalid [{exc.code}]: {exc}")
        return 1
    report = validate(doc)
    if report.ok:
        print("valid")
        return 0
    for violation in report.violations:
        print(f"{violation.path} [{violation.rule}] {violation.message}")
    return 1


def _ctl_canon(args) -> int:
    with open(args.file, "rb") as fh:
        data = fh.read()
    sys.stdout.buffer.write(canonicalize(data) + b"\n")
    return 0


def _ctl_fuzz(args) -> int:
    rng = random.Random(args.seed)
    docs = corpus.corpus(args.seed, args.count)
    bad_round_trips = 0
    silent_accepts = 0
    for i, doc in enumerate(docs):
        data = serialize_document(doc)
        if parse_document(data) != doc:
            bad_round_trips += 1
        mutation = corpus.MUTATIONS[i % len(corpus.MUTATIONS)]
        broken, expected = corpus.mutate(data, rng, mutation)
        try:
            parse_document(broken)
            silent_accepts += 1
        except expected:
            pass
        except SilError:
            silent_accepts += 1  # rejected, but with the wrong class
    print(f"{args.count} documents: {bad_round_trips} round-trip failures, "
          f"{silent_accepts} mutation escapes")
    return 0 if bad_round_trips == 0 and silent_accepts == 0 else 1


def silctl_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="silctl",
                                     description="interface-language toolbox")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", help="check a document, list violations")
    p.add_argument("file")
    p.set_defaults(func=_ctl_validate)

    p = sub.add_parser("canon", help="print the canonical byte form")
    p.add_argument("file")
    p.set_defaults(func=_ctl_canon)

    p = sub.add_parser("fuzz", help="seeded round-trip/rejection self-check")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=200)
    p.set_defaults(func=_ctl_fuzz)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(silmesh_main())
