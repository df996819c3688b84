"""Value-level validation of interface-language documents.

validate() never raises: violations are data, each carrying the element
path and a stable rule id. parse and serialize both funnel through it, so
there is exactly one place where the vocabulary's value rules live.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from silmesh.codec import model
from silmesh.codec.model import (
    Preferences,
    Query,
    ResultSet,
    ServerRecord,
    SilDocument,
    Uid,
    UserInfo,
    Workspace,
)

NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9._-]*$")
LANG_RE = re.compile(r"^[A-Za-z]{1,8}(-[A-Za-z0-9]{1,8})*$")
STAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")
URL_RE = re.compile(r"^[a-z][a-z0-9+.-]*://\S+$")
MEDIA_RE = re.compile(r"^[!#$%&'*+.^_`|~0-9A-Za-z-]+/[!#$%&'*+.^_`|~0-9A-Za-z-]+$")


def xml_encodable(s: str) -> bool:
    """True when every character is legal in XML 1.0."""
    for ch in s:
        o = ord(ch)
        if o in (0x9, 0xA, 0xD):
            continue
        if 0x20 <= o <= 0xD7FF or 0xE000 <= o <= 0xFFFD or 0x10000 <= o <= 0x10FFFF:
            continue
        return False
    return True


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy when there ARE violations
        return bool(self.violations)

    def summary(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(f"{v.path} [{v.rule}] {v.message}" for v in self.violations)


class _Checker:
    def __init__(self):
        self.violations: list[Violation] = []

    def flag(self, path: str, rule: str, message: str) -> None:
        self.violations.append(Violation(path, rule, message))

    # small shared predicates -------------------------------------------

    def enum(self, path: str, rule: str, value: str, allowed: tuple[str, ...]) -> None:
        if value not in allowed:
            self.flag(path, rule, f"'{value}' not in {{{', '.join(allowed)}}}")

    def name(self, path: str, rule: str, value: str) -> None:
        if not NAME_RE.match(value or ""):
            self.flag(path, rule, f"'{value}' is not a name token")

    def lang(self, path: str, rule: str, value: str) -> None:
        if not LANG_RE.match(value or ""):
            self.flag(path, rule, f"'{value}' is not a language tag")

    def stamp(self, path: str, rule: str, value: str) -> None:
        if not STAMP_RE.match(value or ""):
            self.flag(path, rule, f"'{value}' is not a UTC timestamp")

    def text(self, path: str, rule: str, value: str, allow_empty: bool = False) -> None:
        if value is None or (not allow_empty and value == ""):
            self.flag(path, rule, "empty value")
        elif not xml_encodable(value):
            self.flag(path, rule, "value contains characters XML cannot carry")

    # element checkers ----------------------------------------------------

    def uid(self, path: str, uid: Uid) -> None:
        self.enum(path, "uid.type", uid.kind, model.UID_KINDS)
        self.name(f"{path}/login", "uid.login", uid.login)
        if uid.passwd is not None:
            self.text(f"{path}/passwd", "uid.passwd", uid.passwd)
        if uid.level is not None and uid.level < 0:
            self.flag(path, "uid.level", f"level {uid.level} is negative")
        self.enum(path, "uid.status", uid.status, model.UID_STATUSES)
        apath = f"{path}/access"
        seen: set[str] = set()
        for g in uid.access.groups:
            self.name(f"{apath}/group", "access.group", g)
            if g in seen:
                self.flag(f"{apath}/group", "access.group-dup", f"group '{g}' repeated")
            seen.add(g)
        dg = uid.access.default_group
        if dg is not None and dg not in uid.access.groups:
            self.flag(f"{apath}/default", "access.xref",
                      f"default references group '{dg}' absent from the group list")

    def query(self, path: str, q: Query) -> None:
        self.name(path, "ql.id", q.query_id)
        self.enum(path, "ql.scope", q.scope, model.QUERY_SCOPES)
        if not q.clauses:
            self.flag(path, "ql.clauses", "query has no clauses")
        for c in q.clauses:
            cpath = f"{path}/clause"
            self.enum(cpath, "clause.field", c.field, model.CLAUSE_FIELDS)
            self.enum(cpath, "clause.op", c.op, model.CLAUSE_OPS)
            self.text(cpath, "clause.value", c.value)
        for t in q.targets:
            self.name(f"{path}/targets/server", "ql.target", t)
        if q.max_results is not None and q.max_results < 1:
            self.flag(path, "ql.max", f"max_results {q.max_results} < 1")

    def resultset(self, path: str, rs: ResultSet) -> None:
        self.name(path, "rs.query", rs.query_id)
        if rs.handle is not None:
            self.name(path, "rs.handle", rs.handle)
        if rs.total is not None and rs.total < 0:
            self.flag(path, "rs.total", "negative total")
        if rs.cursor is not None and rs.cursor < 0:
            self.flag(path, "rs.cursor", "negative cursor")
        for s in rs.statuses:
            spath = f"{path}/status"
            self.name(spath, "status.sid", s.sid)
            self.enum(spath, "status.state", s.state, model.STREAM_STATES)
            if s.count is not None and s.count < 0:
                self.flag(spath, "status.count", "negative count")
            if s.detail is not None:
                self.text(spath, "status.detail", s.detail)
        seen: set[str] = set()
        for e in rs.entries:
            epath = f"{path}/entry"
            self.text(epath, "entry.uri", e.resource_uri)
            if e.resource_uri in seen:
                self.flag(epath, "rs.entry-dup", f"duplicate uri '{e.resource_uri}'")
            seen.add(e.resource_uri)
            self.name(epath, "entry.sid", e.sid)
            self.text(epath, "entry.title", e.title, allow_empty=True)
            self.lang(epath, "entry.lang", e.language)
            self.text(epath, "entry.cat", e.category)
            if e.required_level < 0:
                self.flag(epath, "entry.level", "negative level")
            if e.content_type is not None and not MEDIA_RE.match(e.content_type):
                self.flag(epath, "entry.ctype",
                          f"'{e.content_type}' is not a media type")

    def workspace(self, path: str, ws: Workspace) -> None:
        self.text(path, "ws.name", ws.name)
        for s in ws.servers:
            self.name(f"{path}/servers/server", "ws.server", s)
        for q in ws.queries:
            self.query(f"{path}/queries/ql", q)
        names: set[str] = set()
        for b in ws.baskets:
            bpath = f"{path}/baskets/basket"
            self.text(bpath, "basket.name", b.name)
            if b.name in names:
                self.flag(bpath, "ws.basket-dup", f"basket '{b.name}' repeated")
            names.add(b.name)
            if b.created is not None:
                self.stamp(bpath, "basket.crdate", b.created)
            items: set[str] = set()
            for uri in b.items:
                self.text(f"{bpath}/item", "basket.item", uri)
                if uri in items:
                    self.flag(f"{bpath}/item", "basket.item-dup", f"'{uri}' repeated")
                items.add(uri)
        self.prefs(f"{path}/prefs", ws.prefs)

    def prefs(self, path: str, p: Preferences) -> None:
        if p.page_size < 1:
            self.flag(path, "prefs.size", f"page size {p.page_size} < 1")
        if p.lang is not None:
            self.lang(path, "prefs.lang", p.lang)

    def userinfo(self, path: str, ui: UserInfo) -> None:
        for fname, value in (("name", ui.fullname), ("mail", ui.mail), ("note", ui.note)):
            if value is not None:
                self.text(f"{path}/{fname}", f"ui.{fname}", value)

    def records(self, path: str, records: tuple[ServerRecord, ...]) -> None:
        seen: set[str] = set()
        for r in records:
            rpath = f"{path}/server"
            self.name(rpath, "server.name", r.name)
            if r.name in seen:
                self.flag(rpath, "net.server-dup", f"server '{r.name}' repeated")
            seen.add(r.name)
            if r.url is not None and not URL_RE.match(r.url):
                self.flag(rpath, "server.url", f"'{r.url}' is not a URL")
            if r.status is not None:
                self.enum(rpath, "server.status", r.status, model.SERVER_STATUSES)
            if r.last_update is not None:
                self.stamp(rpath, "server.update", r.last_update)
            if r.profile is not None:
                ppath = f"{rpath}/profile"
                for lg in r.profile.languages:
                    self.lang(f"{ppath}/lang", "profile.lang", lg)
                for cat in r.profile.categories:
                    self.text(f"{ppath}/cat", "profile.cat", cat)
                if r.profile.description is not None:
                    self.text(f"{ppath}/desc", "profile.desc", r.profile.description)


_BODY_TYPES = {
    "ws": Workspace,
    "ui": UserInfo,
    "ql": Query,
    "rs": ResultSet,
}


def validate(doc: SilDocument) -> ValidationReport:
    """Check every value rule; returns a report, empty iff the doc is valid."""
    c = _Checker()

    if doc.version != model.WIRE_VERSION:
        c.flag("sil", "sil.version",
               f"version '{doc.version}' is not '{model.WIRE_VERSION}'")
    if not doc.sid:
        c.flag("sil", "sil.sid", "sid is empty")
    else:
        c.name("sil", "sil.sid-name", doc.sid)
    c.enum("sil", "sil.type", doc.doc_type, model.DOC_TYPES)
    if doc.lang is not None:
        c.lang("sil", "sil.lang", doc.lang)
    if doc.crdate is not None:
        c.stamp("sil", "sil.crdate", doc.crdate)
    if doc.update is not None:
        c.stamp("sil", "sil.update", doc.update)
    if doc.net_seq is not None and doc.net_seq < 0:
        c.flag("sil", "net.seq", "negative sequence number")

    c.uid("sil/uid", doc.uid)

    if not doc.payloads:
        c.flag("sil", "sil.payloads", "document carries no payload")
    else:
        first = doc.payloads[0]
        expected = model.KIND_FOR_TYPE.get(doc.doc_type)
        if expected is not None and first.kind != expected:
            c.flag("sil", "sil.type-payload",
                   f"type '{doc.doc_type}' requires first payload '{expected}', "
                   f"found '{first.kind}'")

    for p in doc.payloads:
        path = f"sil/{p.kind}"
        if p.kind not in model.PAYLOAD_KINDS:
            c.flag(path, "payload.kind",
                   f"'{p.kind}' is not one of the module elements "
                   f"({' | '.join(model.PAYLOAD_KINDS)})")
            continue
        if p.kind == "net":
            if not isinstance(p.body, tuple) or not all(
                    isinstance(r, ServerRecord) for r in p.body):
                c.flag(path, "payload.body", "net payload must hold server records")
            else:
                c.records(path, p.body)
            continue
        if not isinstance(p.body, _BODY_TYPES[p.kind]):
            c.flag(path, "payload.body",
                   f"payload body {type(p.body).__name__} does not match kind '{p.kind}'")
            continue
        if p.kind == "ws":
            c.workspace(path, p.body)
        elif p.kind == "ui":
            c.userinfo(path, p.body)
        elif p.kind == "ql":
            c.query(path, p.body)
        elif p.kind == "rs":
            c.resultset(path, p.body)

    return ValidationReport(tuple(c.violations))
