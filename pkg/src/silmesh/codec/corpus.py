"""Seeded generator of valid documents plus single-field breakers.

Backs `silctl fuzz` and the codec soundness gate: every generated document
must survive a parse/serialize round trip, and every mutation must be
rejected with the expected error class.
"""

from __future__ import annotations

import random
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
from silmesh.errors import MissingSid, SchemaViolation, SilError, VersionMismatch

_WORDS = ("lettres", "songs", "plays", "atlas", "petit", "prince", "nord",
          "hiver", "corpus", "fables", "contes", "récits", "molière", "東京",
          'quo "vadis"', "a&b", "x<y>z", "line\nbreak", "tab\tstop")
_GROUPS = ("inalf", "lingua", "telri", "parole", "atilf")
_LANGS = ("fr", "de", "en", "fr-CA", "it", "es", "pt-BR", "el")
_CATS = ("prose", "verse", "theatre", "press", "lexicon", "dialogue")
_SIDS = ("srvA", "srvB", "srvC", "nmu")


def _name(rng: random.Random, prefix: str) -> str:
    return f"{prefix}{rng.randrange(10000)}"


def _stamp(rng: random.Random) -> str:
    return (f"{rng.randrange(1999, 2027):04d}-{rng.randrange(1, 13):02d}-"
            f"{rng.randrange(1, 29):02d}T{rng.randrange(24):02d}:"
            f"{rng.randrange(60):02d}:{rng.randrange(60):02d}Z")


def _uid(rng: random.Random) -> Uid:
    groups = tuple(rng.sample(_GROUPS, rng.randrange(0, 4)))
    default = rng.choice(groups) if groups and rng.random() < 0.7 else None
    return Uid(
        login=_name(rng, "user"),
        kind=rng.choice(model.UID_KINDS),
        passwd=rng.choice(_WORDS) if rng.random() < 0.6 else None,
        access=AccessSpec(default_group=default, groups=groups),
        level=rng.randrange(6) if rng.random() < 0.3 else None,
        status="disabled" if rng.random() < 0.05 else "active",
    )


def _query(rng: random.Random) -> Query:
    clauses = tuple(
        QueryClause(field=rng.choice(model.CLAUSE_FIELDS),
                    op=rng.choice(model.CLAUSE_OPS),
                    value=rng.choice(_WORDS + _LANGS))
        for _ in range(rng.randrange(1, 4)))
    return Query(
        query_id=_name(rng, "q"),
        clauses=clauses,
        scope=rng.choice(model.QUERY_SCOPES),
        targets=tuple(rng.sample(_SIDS, rng.randrange(0, 3))),
        max_results=rng.randrange(1, 500) if rng.random() < 0.4 else None,
    )


def _entry(rng: random.Random, n: int) -> ResultEntry:
    sid = rng.choice(_SIDS)
    return ResultEntry(
        resource_uri=f"sil://{sid}/r{n}",
        sid=sid,
        title=rng.choice(_WORDS),
        language=rng.choice(_LANGS),
        category=rng.choice(_CATS),
        required_level=rng.randrange(6),
    )


def _resultset(rng: random.Random) -> ResultSet:
    entries = tuple(_entry(rng, i) for i in range(rng.randrange(0, 6)))
    statuses = tuple(
        ServerStatus(sid=sid, state=rng.choice(model.STREAM_STATES),
                     count=rng.randrange(20) if rng.random() < 0.5 else None)
        for sid in rng.sample(_SIDS, rng.randrange(0, 3)))
    return ResultSet(
        query_id=_name(rng, "q"),
        entries=entries,
        statuses=statuses,
        handle=_name(rng, "h") if rng.random() < 0.5 else None,
        total=len(entries) if rng.random() < 0.5 else None,
        complete=rng.random() < 0.5,
        cursor=rng.randrange(100) if rng.random() < 0.3 else None,
    )


def _workspace(rng: random.Random) -> Workspace:
    basket_names = rng.sample(["b-read", "b-cite", "b-later", "b-misc"],
                              rng.randrange(0, 3))
    baskets = tuple(
        Basket(name=n,
               items=tuple(f"sil://{rng.choice(_SIDS)}/r{i}"
                           for i in rng.sample(range(50), rng.randrange(0, 4))),
               created=_stamp(rng) if rng.random() < 0.5 else None)
        for n in basket_names)
    return Workspace(
        name=rng.choice(("default", "thesis", "corpus-fr")),
        servers=tuple(rng.sample(_SIDS, rng.randrange(0, 3))),
        queries=tuple(_query(rng) for _ in range(rng.randrange(0, 3))),
        baskets=baskets,
        prefs=Preferences(page_size=rng.choice((10, 25, 50, 100)),
                          lang=rng.choice(_LANGS) if rng.random() < 0.4 else None),
    )


def _userinfo(rng: random.Random) -> UserInfo:
    return UserInfo(
        fullname=rng.choice(_WORDS) if rng.random() < 0.7 else None,
        mail=f"{_name(rng, 'u')}@example.org" if rng.random() < 0.5 else None,
        note=rng.choice(_WORDS) if rng.random() < 0.3 else None,
    )


def _records(rng: random.Random) -> tuple[ServerRecord, ...]:
    names = rng.sample(_SIDS, rng.randrange(0, 4))
    return tuple(
        ServerRecord(
            name=n,
            url=f"http://{n}.example:70{rng.randrange(10):02d}",
            status=rng.choice(model.SERVER_STATUSES),
            profile=ServerProfile(
                languages=tuple(rng.sample(_LANGS, rng.randrange(0, 3))),
                categories=tuple(rng.sample(_CATS, rng.randrange(0, 3))),
                description=rng.choice(_WORDS) if rng.random() < 0.4 else None,
            ) if rng.random() < 0.8 else None,
            last_update=_stamp(rng) if rng.random() < 0.6 else None,
        ) for n in names)


_BUILDERS = {
    "ws": _workspace,
    "ui": _userinfo,
    "ql": _query,
    "rs": _resultset,
    "net": _records,
}


def random_document(rng: random.Random) -> SilDocument:
    kind = rng.choice(model.PAYLOAD_KINDS)
    payloads = [Payload(kind, _BUILDERS[kind](rng))]
    while rng.random() < 0.25 and len(payloads) < 3:
        extra = rng.choice(model.PAYLOAD_KINDS)
        payloads.append(Payload(extra, _BUILDERS[extra](rng)))
    return SilDocument(
        doc_type=model.TYPE_FOR_KIND[kind],
        sid=rng.choice(_SIDS),
        uid=_uid(rng),
        payloads=tuple(payloads),
        lang=rng.choice(_LANGS) if rng.random() < 0.3 else None,
        crdate=_stamp(rng) if rng.random() < 0.5 else None,
        update=_stamp(rng) if rng.random() < 0.3 else None,
    )


def corpus(seed: int, count: int) -> list[SilDocument]:
    rng = random.Random(seed)
    return [random_document(rng) for _ in range(count)]


# --- mutations --------------------------------------------------------------
#
# Each mutation takes a parsed element tree of a VALID document, applies one
# schema-breaking change, and names the error class parse must raise.

def _m_version(root: ET.Element, rng: random.Random):
    root.set("version", rng.choice(("0.4", "1.0", "0.50", "")))
    return VersionMismatch


def _m_missing_sid(root: ET.Element, rng: random.Random):
    del root.attrib["sid"]
    return MissingSid


def _m_group_xref(root: ET.Element, rng: random.Random):
    default = root.find("uid/access/default")
    default.set("group", "ghost-group")
    return SchemaViolation


def _m_unknown_payload(root: ET.Element, rng: random.Random):
    root.append(ET.Element("zz"))
    return SchemaViolation


def _m_no_payload(root: ET.Element, rng: random.Random):
    for child in list(root):
        if child.tag != "uid":
            root.remove(child)
    return SchemaViolation


def _m_login_id(root: ET.Element, rng: random.Random):
    login = root.find("uid/login")
    del login.attrib["id"]
    return SchemaViolation


def _m_uid_order(root: ET.Element, rng: random.Random):
    uid = root.find("uid")
    children = list(uid)
    for child in children:
        uid.remove(child)
    for child in reversed(children):
        uid.append(child)
    return SchemaViolation


def _m_bad_enum(root: ET.Element, rng: random.Random):
    root.find("uid").set("type", "admin")
    return SchemaViolation


def _m_stray_attr(root: ET.Element, rng: random.Random):
    root.find("uid").set("color", "blue")
    return SchemaViolation


def _m_type_clash(root: ET.Element, rng: random.Random):
    first = next(c for c in root if c.tag != "uid")
    other = {"ws": "user", "ui": "query", "ql": "resultset",
             "rs": "net", "net": "workspace"}[first.tag]
    root.set("type", other)
    return SchemaViolation


MUTATIONS = (
    _m_version,
    _m_missing_sid,
    _m_group_xref,
    _m_unknown_payload,
    _m_no_payload,
    _m_login_id,
    _m_uid_order,
    _m_bad_enum,
    _m_stray_attr,
    _m_type_clash,
)


def mutate(data: bytes, rng: random.Random,
           mutation=None) -> tuple[bytes, type[SilError]]:
    """Break one rule of a valid document; returns (octets, expected error)."""
    root = ET.fromstring(data)
    mutation = mutation or rng.choice(MUTATIONS)
    expected = mutation(root, rng)
    return ET.tostring(root, encoding="utf-8"), expected
