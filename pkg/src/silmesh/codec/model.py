"""Value types of the interface language.

All types are frozen dataclasses over tuples, so documents compare
structurally and can be shared across threads. The envelope is:

    <sil type=... sid=... version="0.5">
      <uid type=...><login id=.../><passwd>..</passwd><access>..</access></uid>
      one or more payloads: <ws> | <ui> | <ql> | <rs> | <net>
    </sil>

`net` rides on the grammar's extension hooks and carries registry records
between the NMU and servers, so that registry traffic speaks the same
language as everything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

WIRE_VERSION = "0.5"

DOC_TYPES = ("workspace", "user", "query", "resultset", "net")
PAYLOAD_KINDS = ("ws", "ui", "ql", "rs", "net")
UID_KINDS = ("user", "provider", "both")
UID_STATUSES = ("active", "disabled")
QUERY_SCOPES = ("metadata", "content-count")
CLAUSE_FIELDS = ("language", "category", "title", "id", "keyword")
CLAUSE_OPS = ("eq", "contains")
SERVER_STATUSES = ("online", "offline", "disconnected")
STREAM_STATES = ("pending", "streaming", "done", "failed")

# doc type <-> kind of the first payload
TYPE_FOR_KIND = {
    "ws": "workspace",
    "ui": "user",
    "ql": "query",
    "rs": "resultset",
    "net": "net",
}
KIND_FOR_TYPE = {v: k for k, v in TYPE_FOR_KIND.items()}


@dataclass(frozen=True)
class AccessSpec:
    """Default group reference plus the group-id list it must point into."""

    default_group: str | None = None
    groups: tuple[str, ...] = ()


@dataclass(frozen=True)
class Uid:
    """User identification block present in every document.

    `level` and `status` are extension attributes: `level` embeds the
    authorization level of a forwarded request's identification tag, and
    `status` lets a stored account be disabled without deleting it.
    """

    login: str
    kind: str = "user"
    passwd: str | None = None
    access: AccessSpec = field(default_factory=AccessSpec)
    level: int | None = None
    status: str = "active"


@dataclass(frozen=True)
class UserInfo:
    """Profile fields of the ui payload."""

    fullname: str | None = None
    mail: str | None = None
    note: str | None = None


@dataclass(frozen=True)
class QueryClause:
    field: str
    op: str
    value: str


@dataclass(frozen=True)
class Query:
    """Conjunctive metadata filter, optionally scoped to target servers.

    An empty targets tuple means "the whole network" (every working server
    the session has selected).
    """

    query_id: str
    clauses: tuple[QueryClause, ...]
    scope: str = "metadata"
    targets: tuple[str, ...] = ()
    max_results: int | None = None


@dataclass(frozen=True)
class ResultEntry:
    resource_uri: str
    sid: str
    title: str
    language: str
    category: str
    required_level: int = 0
    content_type: str | None = None  # extension attr; set on resource metadata


@dataclass(frozen=True)
class ServerStatus:
    """Per-origin-server delivery state inside a result-set document."""

    sid: str
    state: str
    count: int | None = None
    detail: str | None = None


@dataclass(frozen=True)
class ResultSet:
    query_id: str
    entries: tuple[ResultEntry, ...] = ()
    statuses: tuple[ServerStatus, ...] = ()
    handle: str | None = None
    total: int | None = None
    complete: bool = True
    cursor: int | None = None


@dataclass(frozen=True)
class Preferences:
    page_size: int = 50
    lang: str | None = None


@dataclass(frozen=True)
class Basket:
    """Named list of resource pointers; items are URIs, never content."""

    name: str
    items: tuple[str, ...] = ()
    created: str | None = None


@dataclass(frozen=True)
class Workspace:
    name: str = "default"
    servers: tuple[str, ...] = ()
    queries: tuple[Query, ...] = ()
    baskets: tuple[Basket, ...] = ()
    prefs: Preferences = field(default_factory=Preferences)


@dataclass(frozen=True)
class ServerProfile:
    languages: tuple[str, ...] = ()
    categories: tuple[str, ...] = ()
    description: str | None = None


@dataclass(frozen=True)
class ServerRecord:
    """Registry entry: name, address, status flag, and general profile.

    `status` is None on partial-update requests (meaning "unchanged"); the
    registry itself always stores a concrete value.
    """

    name: str
    url: str | None = None
    status: str | None = None
    profile: ServerProfile | None = None
    last_update: str | None = None


@dataclass(frozen=True)
class Payload:
    """One module element; body structure must match the kind."""

    kind: str
    body: Workspace | UserInfo | Query | ResultSet | tuple[ServerRecord, ...]


@dataclass(frozen=True)
class SilDocument:
    doc_type: str
    sid: str
    uid: Uid
    payloads: tuple[Payload, ...]
    version: str = WIRE_VERSION
    lang: str | None = None
    crdate: str | None = None
    update: str | None = None
    # net extension attributes used by the registry change log
    net_op: str | None = None
    net_seq: int | None = None


def _envelope(doc_type: str, sid: str, uid: Uid, payloads: tuple[Payload, ...],
              **attrs) -> SilDocument:
    return SilDocument(doc_type=doc_type, sid=sid, uid=uid, payloads=payloads, **attrs)


def user_document(sid: str, uid: Uid, info: UserInfo | None = None, **attrs) -> SilDocument:
    return _envelope("user", sid, uid, (Payload("ui", info or UserInfo()),), **attrs)


def query_document(sid: str, uid: Uid, query: Query, **attrs) -> SilDocument:
    return _envelope("query", sid, uid, (Payload("ql", query),), **attrs)


def resultset_document(sid: str, uid: Uid, rs: ResultSet, **attrs) -> SilDocument:
    return _envelope("resultset", sid, uid, (Payload("rs", rs),), **attrs)


def workspace_document(sid: str, uid: Uid, ws: Workspace, **attrs) -> SilDocument:
    return _envelope("workspace", sid, uid, (Payload("ws", ws),), **attrs)


def net_document(sid: str, uid: Uid, records: tuple[ServerRecord, ...],
                 op: str | None = None, seq: int | None = None, **attrs) -> SilDocument:
    return _envelope("net", sid, uid, (Payload("net", records),),
                     net_op=op, net_seq=seq, **attrs)


def service_uid(sid: str) -> Uid:
    """Identification block a service signs its own documents with."""
    return Uid(login=sid, kind="provider")
