"""Canonical serializer: one valid document value, one byte sequence.

Canonical form: UTF-8, no XML declaration, no insignificant whitespace,
fixed attribute order per element (sil: type, crdate, update, lang, sid,
version), empty elements collapsed, and newline/tab/carriage-return escaped
inside attribute values so parsing never normalizes them away.
"""

from __future__ import annotations

from silmesh.codec.model import (
    Payload,
    Preferences,
    Query,
    ResultSet,
    ServerRecord,
    SilDocument,
    Uid,
    UserInfo,
    Workspace,
)
from silmesh.codec.validate import validate
from silmesh.errors import InvariantViolation

# \n and \r escaped even in text content: canonical documents are single-line,
# which lets change logs and transcripts frame them by newline.
_TEXT = {"&": "&amp;", "<": "&lt;", ">": "&gt;", "\n": "&#10;", "\r": "&#13;"}
_ATTR = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;",
         "\n": "&#10;", "\r": "&#13;", "\t": "&#9;"}


def _esc_text(s: str) -> str:
    return "".join(_TEXT.get(ch, ch) for ch in s)


def _esc_attr(s: str) -> str:
    return "".join(_ATTR.get(ch, ch) for ch in s)


def _tag(name: str, attrs: list[tuple[str, str | None]], body: str = "") -> str:
    parts = [name]
    for key, value in attrs:
        if value is not None:
            parts.append(f'{key}="{_esc_attr(value)}"')
    head = " ".join(parts)
    if body:
        return f"<{head}>{body}</{name}>"
    return f"<{head}/>"


def _text_el(name: str, value: str | None) -> str:
    if value is None:
        return ""
    return f"<{name}>{_esc_text(value)}</{name}>"


def _uid(uid: Uid) -> str:
    access = _tag("default", [("group", uid.access.default_group)])
    access += "".join(_tag("group", [("id", g)]) for g in uid.access.groups)
    body = _tag("login", [("id", uid.login)])
    body += _text_el("passwd", uid.passwd) or "<passwd/>"
    body += _tag("access", [], access)
    return _tag("uid", [
        ("type", uid.kind),
        ("level", str(uid.level) if uid.level is not None else None),
        ("status", uid.status if uid.status != "active" else None),
    ], body)


def _server_refs(wrapper: str, refs: tuple[str, ...]) -> str:
    if not refs:
        return ""
    body = "".join(_tag("server", [("ref", r)]) for r in refs)
    return _tag(wrapper, [], body)


def _ql(q: Query) -> str:
    body = "".join(
        _tag("clause", [("field", c.field), ("op", c.op), ("value", c.value)])
        for c in q.clauses)
    body += _server_refs("targets", q.targets)
    return _tag("ql", [
        ("id", q.query_id),
        ("scope", q.scope),
        ("max", str(q.max_results) if q.max_results is not None else None),
    ], body)


def _rs(rs: ResultSet) -> str:
    body = "".join(_tag("status", [
        ("sid", s.sid),
        ("state", s.state),
        ("count", str(s.count) if s.count is not None else None),
        ("detail", s.detail),
    ]) for s in rs.statuses)
    body += "".join(_tag("entry", [
        ("uri", e.resource_uri),
        ("sid", e.sid),
        ("title", e.title),
        ("lang", e.language),
        ("cat", e.category),
        ("level", str(e.required_level)),
        ("ctype", e.content_type),
    ]) for e in rs.entries)
    return _tag("rs", [
        ("query", rs.query_id),
        ("handle", rs.handle),
        ("total", str(rs.total) if rs.total is not None else None),
        ("complete", "1" if rs.complete else "0"),
        ("cursor", str(rs.cursor) if rs.cursor is not None else None),
    ], body)


def _prefs(p: Preferences) -> str:
    return _tag("prefs", [("size", str(p.page_size)), ("lang", p.lang)])


def _ws(ws: Workspace) -> str:
    body = _server_refs("servers", ws.servers)
    if ws.queries:
        body += _tag("queries", [], "".join(_ql(q) for q in ws.queries))
    if ws.baskets:
        baskets = "".join(_tag(
            "basket", [("name", b.name), ("crdate", b.created)],
            "".join(_tag("item", [("uri", uri)]) for uri in b.items),
        ) for b in ws.baskets)
        body += _tag("baskets", [], baskets)
    body += _prefs(ws.prefs)
    return _tag("ws", [("name", ws.name)], body)


def _ui(ui: UserInfo) -> str:
    body = _text_el("name", ui.fullname) + _text_el("mail", ui.mail) + _text_el("note", ui.note)
    return _tag("ui", [], body)


def _net(records: tuple[ServerRecord, ...]) -> str:
    body = ""
    for r in records:
        profile = ""
        if r.profile is not None:
            inner = "".join(_tag("lang", [("code", lg)]) for lg in r.profile.languages)
            inner += "".join(_tag("cat", [("name", c)]) for c in r.profile.categories)
            inner += _text_el("desc", r.profile.description)
            profile = _tag("profile", [], inner)
        body += _tag("server", [
            ("name", r.name),
            ("url", r.url),
            ("status", r.status),
            ("update", r.last_update),
        ], profile)
    return _tag("net", [], body)


def _payload(p: Payload) -> str:
    if p.kind == "ws":
        return _ws(p.body)
    if p.kind == "ui":
        return _ui(p.body)
    if p.kind == "ql":
        return _ql(p.body)
    if p.kind == "rs":
        return _rs(p.body)
    return _net(p.body)


def serialize_document(doc: SilDocument) -> bytes:
    """Emit canonical octets; refuses documents that fail their invariants."""
    report = validate(doc)
    if report:
        first = report.violations[0]
        raise InvariantViolation(f"{first.path}: [{first.rule}] {first.message}")
    body = _uid(doc.uid) + "".join(_payload(p) for p in doc.payloads)
    text = _tag("sil", [
        ("type", doc.doc_type),
        ("crdate", doc.crdate),
        ("update", doc.update),
        ("lang", doc.lang),
        ("sid", doc.sid),
        ("version", doc.version),
        ("op", doc.net_op),
        ("seq", str(doc.net_seq) if doc.net_seq is not None else None),
    ], body)
    return text.encode("utf-8")


def canonicalize(data: bytes | str) -> bytes:
    """Normalize any valid document to its canonical byte form."""
    from silmesh.codec.parse import parse_document

    return serialize_document(parse_document(data))
