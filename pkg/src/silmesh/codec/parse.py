"""Strict parser: XML octets in, validated document values out.

The vocabulary is closed and small, so parsing is a hand-rolled walk that
rejects with the offending element path instead of repairing. Non-canonical
but valid input (insignificant whitespace, reordered attributes) is
accepted; serialize_document normalizes it.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from silmesh.codec import model
from silmesh.codec.model import (
    AccessSpec,
    Basket,
    Payload,
    Preferences,
    Query,
    QueryClause,
    ResultEntry,
    ResultSet,
    ServerProfile,
    ServerRecord,
    ServerStatus,
    SilDocument,
    Uid,
    UserInfo,
    Workspace,
)
from silmesh.codec.validate import validate
from silmesh.errors import MissingSid, NotWellFormed, SchemaViolation, VersionMismatch


def _fail(path: str, message: str) -> SchemaViolation:
    return SchemaViolation(f"{path}: {message}")


def _attrs(elem: ET.Element, path: str, required: tuple[str, ...],
           optional: tuple[str, ...] = ()) -> dict[str, str]:
    got = dict(elem.attrib)
    for name in got:
        if name not in required and name not in optional:
            raise _fail(path, f"unknown attribute '{name}'")
    for name in required:
        if name not in got:
            raise _fail(path, f"missing required attribute '{name}'")
    return got


def _no_text(elem: ET.Element, path: str) -> None:
    if elem.text and elem.text.strip():
        raise _fail(path, "unexpected character data")
    for child in elem:
        if child.tail and child.tail.strip():
            raise _fail(path, "unexpected character data after child element")


def _leaf_text(elem: ET.Element, path: str) -> str | None:
    if len(elem):
        raise _fail(path, f"unexpected child element '{elem[0].tag}'")
    return elem.text if elem.text else None


def _int(value: str, path: str, attr: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise _fail(path, f"attribute '{attr}' must be an integer, got '{value}'") from None


def _only(elem: ET.Element, path: str, allowed: tuple[str, ...]) -> list[ET.Element]:
    _no_text(elem, path)
    for child in elem:
        if child.tag not in allowed:
            raise _fail(f"{path}/{child.tag}",
                        f"element not allowed here (expected {' | '.join(allowed)})")
    return list(elem)


def _server_refs(elem: ET.Element, path: str) -> tuple[str, ...]:
    refs = []
    for child in _only(elem, path, ("server",)):
        attrs = _attrs(child, f"{path}/server", ("ref",))
        refs.append(attrs["ref"])
    return tuple(refs)


def _parse_uid(elem: ET.Element, path: str) -> Uid:
    attrs = _attrs(elem, path, (), ("type", "level", "status"))
    _no_text(elem, path)
    tags = [c.tag for c in elem]
    if tags != ["login", "passwd", "access"]:
        raise _fail(path, f"content must be (login, passwd, access), found ({', '.join(tags)})")
    login_el, passwd_el, access_el = list(elem)

    login_attrs = _attrs(login_el, f"{path}/login", ("id",))
    if len(login_el) or (login_el.text and login_el.text.strip()):
        raise _fail(f"{path}/login", "login is an empty element")
    passwd = _leaf_text(passwd_el, f"{path}/passwd")
    _attrs(passwd_el, f"{path}/passwd", ())

    _attrs(access_el, f"{path}/access", ())
    apath = f"{path}/access"
    children = _only(access_el, apath, ("default", "group"))
    if not children or children[0].tag != "default":
        raise _fail(apath, "content must be (default, group*)")
    default_el, group_els = children[0], children[1:]
    if any(g.tag != "group" for g in group_els):
        raise _fail(apath, "content must be (default, group*)")
    d_attrs = _attrs(default_el, f"{apath}/default", (), ("group",))
    groups = []
    for g in group_els:
        g_attrs = _attrs(g, f"{apath}/group", ("id",))
        groups.append(g_attrs["id"])

    level = attrs.get("level")
    return Uid(
        login=login_attrs["id"],
        kind=attrs.get("type", "user"),
        passwd=passwd,
        access=AccessSpec(default_group=d_attrs.get("group"), groups=tuple(groups)),
        level=_int(level, path, "level") if level is not None else None,
        status=attrs.get("status", "active"),
    )


def _parse_clause(elem: ET.Element, path: str) -> QueryClause:
    attrs = _attrs(elem, path, ("field", "op", "value"))
    _no_text(elem, path)
    if len(elem):
        raise _fail(path, "clause is an empty element")
    return QueryClause(field=attrs["field"], op=attrs["op"], value=attrs["value"])


def _parse_ql(elem: ET.Element, path: str) -> Query:
    attrs = _attrs(elem, path, ("id",), ("scope", "max"))
    children = _only(elem, path, ("clause", "targets"))
    clauses: list[QueryClause] = []
    targets: tuple[str, ...] = ()
    seen_targets = False
    for child in children:
        if child.tag == "clause":
            if seen_targets:
                raise _fail(path, "content must be (clause+, targets?)")
            clauses.append(_parse_clause(child, f"{path}/clause"))
        else:
            if seen_targets:
                raise _fail(path, "at most one targets element")
            seen_targets = True
            _attrs(child, f"{path}/targets", ())
            targets = _server_refs(child, f"{path}/targets")
    mx = attrs.get("max")
    return Query(
        query_id=attrs["id"],
        clauses=tuple(clauses),
        scope=attrs.get("scope", "metadata"),
        targets=targets,
        max_results=_int(mx, path, "max") if mx is not None else None,
    )


def _parse_rs(elem: ET.Element, path: str) -> ResultSet:
    attrs = _attrs(elem, path, ("query",), ("handle", "total", "complete", "cursor"))
    children = _only(elem, path, ("status", "entry"))
    statuses: list[ServerStatus] = []
    entries: list[ResultEntry] = []
    for child in children:
        if child.tag == "status":
            if entries:
                raise _fail(path, "content must be (status*, entry*)")
            s_attrs = _attrs(child, f"{path}/status", ("sid", "state"), ("count", "detail"))
            _no_text(child, f"{path}/status")
            cnt = s_attrs.get("count")
            statuses.append(ServerStatus(
                sid=s_attrs["sid"],
                state=s_attrs["state"],
                count=_int(cnt, f"{path}/status", "count") if cnt is not None else None,
                detail=s_attrs.get("detail"),
            ))
        else:
            e_attrs = _attrs(child, f"{path}/entry",
                             ("uri", "sid", "title", "lang", "cat", "level"),
                             ("ctype",))
            _no_text(child, f"{path}/entry")
            entries.append(ResultEntry(
                resource_uri=e_attrs["uri"],
                sid=e_attrs["sid"],
                title=e_attrs["title"],
                language=e_attrs["lang"],
                category=e_attrs["cat"],
                required_level=_int(e_attrs["level"], f"{path}/entry", "level"),
                content_type=e_attrs.get("ctype"),
            ))
    total = attrs.get("total")
    cursor = attrs.get("cursor")
    complete = attrs.get("complete", "1")
    if complete not in ("0", "1"):
        raise _fail(path, f"attribute 'complete' must be 0 or 1, got '{complete}'")
    return ResultSet(
        query_id=attrs["query"],
        entries=tuple(entries),
        statuses=tuple(statuses),
        handle=attrs.get("handle"),
        total=_int(total, path, "total") if total is not None else None,
        complete=complete == "1",
        cursor=_int(cursor, path, "cursor") if cursor is not None else None,
    )


def _parse_ws(elem: ET.Element, path: str) -> Workspace:
    attrs = _attrs(elem, path, (), ("name",))
    children = _only(elem, path, ("servers", "queries", "baskets", "prefs"))
    order = ("servers", "queries", "baskets", "prefs")
    last = -1
    seen: dict[str, ET.Element] = {}
    for child in children:
        idx = order.index(child.tag)
        if idx <= last:
            raise _fail(path, "content must be (servers?, queries?, baskets?, prefs?)")
        last = idx
        seen[child.tag] = child

    servers: tuple[str, ...] = ()
    if "servers" in seen:
        _attrs(seen["servers"], f"{path}/servers", ())
        servers = _server_refs(seen["servers"], f"{path}/servers")

    queries: list[Query] = []
    if "queries" in seen:
        _attrs(seen["queries"], f"{path}/queries", ())
        for q in _only(seen["queries"], f"{path}/queries", ("ql",)):
            queries.append(_parse_ql(q, f"{path}/queries/ql"))

    baskets: list[Basket] = []
    if "baskets" in seen:
        _attrs(seen["baskets"], f"{path}/baskets", ())
        for b in _only(seen["baskets"], f"{path}/baskets", ("basket",)):
            b_attrs = _attrs(b, f"{path}/baskets/basket", ("name",), ("crdate",))
            items = []
            for item in _only(b, f"{path}/baskets/basket", ("item",)):
                i_attrs = _attrs(item, f"{path}/baskets/basket/item", ("uri",))
                items.append(i_attrs["uri"])
            baskets.append(Basket(name=b_attrs["name"], items=tuple(items),
                                  created=b_attrs.get("crdate")))

    prefs = Preferences()
    if "prefs" in seen:
        p_attrs = _attrs(seen["prefs"], f"{path}/prefs", (), ("size", "lang"))
        _no_text(seen["prefs"], f"{path}/prefs")
        if len(seen["prefs"]):
            raise _fail(f"{path}/prefs", "prefs is an empty element")
        size = p_attrs.get("size")
        prefs = Preferences(
            page_size=_int(size, f"{path}/prefs", "size") if size is not None else 50,
            lang=p_attrs.get("lang"),
        )

    return Workspace(name=attrs.get("name", "default"), servers=servers,
                     queries=tuple(queries), baskets=tuple(baskets), prefs=prefs)


def _parse_ui(elem: ET.Element, path: str) -> UserInfo:
    _attrs(elem, path, ())
    children = _only(elem, path, ("name", "mail", "note"))
    fields: dict[str, str | None] = {"name": None, "mail": None, "note": None}
    seen: set[str] = set()
    for child in children:
        if child.tag in seen:
            raise _fail(f"{path}/{child.tag}", "element repeated")
        seen.add(child.tag)
        _attrs(child, f"{path}/{child.tag}", ())
        fields[child.tag] = _leaf_text(child, f"{path}/{child.tag}")
    return UserInfo(fullname=fields["name"], mail=fields["mail"], note=fields["note"])


def _parse_net(elem: ET.Element, path: str) -> tuple[ServerRecord, ...]:
    records = []
    for child in _only(elem, path, ("server",)):
        spath = f"{path}/server"
        s_attrs = _attrs(child, spath, ("name",), ("url", "status", "update"))
        profile: ServerProfile | None = None
        kids = _only(child, spath, ("profile",))
        if len(kids) > 1:
            raise _fail(spath, "at most one profile element")
        if kids:
            ppath = f"{spath}/profile"
            _attrs(kids[0], ppath, ())
            langs: list[str] = []
            cats: list[str] = []
            desc: str | None = None
            for p in _only(kids[0], ppath, ("lang", "cat", "desc")):
                if p.tag == "lang":
                    if cats or desc is not None:
                        raise _fail(ppath, "content must be (lang*, cat*, desc?)")
                    langs.append(_attrs(p, f"{ppath}/lang", ("code",))["code"])
                elif p.tag == "cat":
                    if desc is not None:
                        raise _fail(ppath, "content must be (lang*, cat*, desc?)")
                    cats.append(_attrs(p, f"{ppath}/cat", ("name",))["name"])
                else:
                    if desc is not None:
                        raise _fail(f"{ppath}/desc", "element repeated")
                    _attrs(p, f"{ppath}/desc", ())
                    desc = _leaf_text(p, f"{ppath}/desc")
            profile = ServerProfile(languages=tuple(langs), categories=tuple(cats),
                                    description=desc)
        records.append(ServerRecord(
            name=s_attrs["name"],
            url=s_attrs.get("url"),
            status=s_attrs.get("status"),
            profile=profile,
            last_update=s_attrs.get("update"),
        ))
    return tuple(records)


_PAYLOAD_PARSERS = {
    "ws": _parse_ws,
    "ui": _parse_ui,
    "ql": _parse_ql,
    "rs": _parse_rs,
    "net": _parse_net,
}


def parse_document(data: bytes | str) -> SilDocument:
    """Parse and validate one document; raises instead of repairing.

    Raises NotWellFormed, MissingSid, VersionMismatch, or SchemaViolation.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from None

    if root.tag != "sil":
        raise _fail(root.tag, "root element must be 'sil'")
    attrs = dict(root.attrib)
    for name in attrs:
        if name not in ("type", "crdate", "update", "lang", "sid", "version", "op", "seq"):
            raise _fail("sil", f"unknown attribute '{name}'")
    if "sid" not in attrs or not attrs["sid"]:
        raise MissingSid("sil: required attribute 'sid' is missing or empty")
    version = attrs.get("version", model.WIRE_VERSION)
    if version != model.WIRE_VERSION:
        raise VersionMismatch(
            f"sil: version '{version}' does not match fixed '{model.WIRE_VERSION}'")

    _no_text(root, "sil")
    children = list(root)
    if not children or children[0].tag != "uid":
        raise _fail("sil", "content must be (uid, payload+)")
    uid = _parse_uid(children[0], "sil/uid")

    payloads: list[Payload] = []
    for child in children[1:]:
        parser = _PAYLOAD_PARSERS.get(child.tag)
        if parser is None:
            raise _fail(
                f"sil/{child.tag}",
                f"'{child.tag}' is not one of the module elements "
                f"({' | '.join(model.PAYLOAD_KINDS)})")
        payloads.append(Payload(child.tag, parser(child, f"sil/{child.tag}")))
    if not payloads:
        raise _fail("sil", "content must be (uid, payload+): no payload element")

    seq = attrs.get("seq")
    doc = SilDocument(
        doc_type=attrs.get("type", "workspace"),
        sid=attrs["sid"],
        uid=uid,
        payloads=tuple(payloads),
        version=version,
        lang=attrs.get("lang"),
        crdate=attrs.get("crdate"),
        update=attrs.get("update"),
        net_op=attrs.get("op"),
        net_seq=_int(seq, "sil", "seq") if seq is not None else None,
    )

    report = validate(doc)
    if report:
        first = report.violations[0]
        raise _fail(first.path, f"[{first.rule}] {first.message}")
    return doc
