"""Codec contract tests: envelope grammar, canonical form, rejection."""

import random

import pytest

from silmesh.codec import (
    AccessSpec,
    Basket,
    Payload,
    Preferences,
    Query,
    QueryClause,
    ResultEntry,
    ResultSet,
    SilDocument,
    Uid,
    UserInfo,
    Workspace,
    canonicalize,
    parse_document,
    serialize_document,
    validate,
)
from silmesh.codec import corpus
from silmesh.errors import (
    InvariantViolation,
    MissingSid,
    NotWellFormed,
    SchemaViolation,
    VersionMismatch,
)

MINIMAL = (
    b'<sil type="user" sid="S1" version="0.5">'
    b'<uid type="user"><login id="alice"/><passwd>x</passwd>'
    b'<access><default group="lingua"/><group id="lingua"/></access></uid>'
    b'<ui/></sil>'
)


def test_parse_minimal_document():
    doc = parse_document(MINIMAL)
    assert doc.doc_type == "user"
    assert doc.sid == "S1"
    assert doc.version == "0.5"
    assert doc.uid.login == "alice"
    assert doc.uid.passwd == "x"
    assert doc.uid.access.default_group == "lingua"
    assert doc.uid.access.groups == ("lingua",)
    assert len(doc.payloads) == 1
    assert doc.payloads[0].kind == "ui"


def test_parse_rejects_wrong_version():
    with pytest.raises(VersionMismatch):
        parse_document(MINIMAL.replace(b'version="0.5"', b'version="0.4"'))


def test_parse_accepts_absent_version_as_fixed_default():
    doc = parse_document(MINIMAL.replace(b' version="0.5"', b''))
    assert doc.version == "0.5"


def test_parse_rejects_missing_sid():
    with pytest.raises(MissingSid):
        parse_document(MINIMAL.replace(b' sid="S1"', b''))


def test_parse_rejects_broken_xml():
    with pytest.raises(NotWellFormed):
        parse_document(b"<sil><uid>")


def test_parse_rejects_unknown_payload_element():
    data = MINIMAL.replace(b"<ui/>", b"<ui/><zz/>")
    with pytest.raises(SchemaViolation) as err:
        parse_document(data)
    assert "zz" in str(err.value)
    assert "ws | ui | ql | rs | net" in str(err.value)


def test_parse_rejects_swapped_uid_content():
    data = MINIMAL.replace(
        b"<login id=\"alice\"/><passwd>x</passwd>",
        b"<passwd>x</passwd><login id=\"alice\"/>")
    with pytest.raises(SchemaViolation):
        parse_document(data)


def test_minimal_round_trip_is_identity():
    doc = parse_document(MINIMAL)
    assert parse_document(serialize_document(doc)) == doc


def test_canonicalize_is_idempotent():
    canon = canonicalize(MINIMAL)
    assert canonicalize(canon) == canon


def test_serializer_is_deterministic():
    doc = parse_document(MINIMAL)
    assert serialize_document(doc) == serialize_document(doc)


def test_non_canonical_whitespace_is_accepted_and_normalized():
    spaced = (b'<sil type="user" sid="S1" version="0.5">\n'
              b'  <uid type="user">\n    <login id="alice"/>\n'
              b'    <passwd>x</passwd>\n'
              b'    <access><default/></access>\n  </uid>\n  <ui/>\n</sil>')
    assert canonicalize(spaced) == canonicalize(canonicalize(spaced))
    assert parse_document(spaced).uid.login == "alice"


def _valid_doc() -> SilDocument:
    return parse_document(MINIMAL)


def test_validate_reports_broken_group_crossref():
    doc = _valid_doc()
    bad_uid = Uid(login="alice", passwd="x",
                  access=AccessSpec(default_group="inalf", groups=("lingua",)))
    report = validate(SilDocument(
        doc_type=doc.doc_type, sid=doc.sid, uid=bad_uid, payloads=doc.payloads))
    assert not report.ok
    v = report.violations[0]
    assert v.path == "sil/uid/access/default"
    assert v.rule == "access.xref"


def test_validate_empty_report_for_valid_doc():
    assert validate(_valid_doc()).ok


def test_validate_flags_unknown_payload_kind_citing_module_set():
    doc = _valid_doc()
    report = validate(SilDocument(
        doc_type=doc.doc_type, sid=doc.sid, uid=doc.uid,
        payloads=doc.payloads + (Payload("zz", UserInfo()),)))
    violation = next(v for v in report.violations if v.rule == "payload.kind")
    assert "ws | ui | ql | rs | net" in violation.message


def test_serialize_refuses_empty_payloads():
    doc = _valid_doc()
    with pytest.raises(InvariantViolation):
        serialize_document(SilDocument(
            doc_type=doc.doc_type, sid=doc.sid, uid=doc.uid, payloads=()))


def test_serialize_refuses_type_payload_clash():
    doc = _valid_doc()
    rs = ResultSet(query_id="q1")
    with pytest.raises(InvariantViolation):
        serialize_document(SilDocument(
            doc_type="query", sid=doc.sid, uid=doc.uid,
            payloads=(Payload("rs", rs),)))


def test_attribute_order_is_canonical():
    reordered = (b'<sil version="0.5" sid="S1" type="user">'
                 b'<uid type="user"><login id="alice"/><passwd>x</passwd>'
                 b'<access><default group="lingua"/><group id="lingua"/></access></uid>'
                 b'<ui/></sil>')
    canon = canonicalize(reordered)
    assert canon.startswith(b'<sil type="user" sid="S1" version="0.5">')


def test_awkward_characters_survive_round_trip():
    ws = Workspace(
        name='plan "A" <draft>',
        baskets=(Basket(name="b&b", items=("sil://srvA/x y\nz",)),),
        prefs=Preferences(page_size=10, lang="fr"),
    )
    doc = SilDocument(
        doc_type="workspace", sid="srvA",
        uid=Uid(login="alice", passwd="s&; <p>\ttab"),
        payloads=(Payload("ws", ws),))
    assert parse_document(serialize_document(doc)) == doc


def test_multi_payload_document_round_trips():
    q = Query(query_id="q1", clauses=(QueryClause("language", "eq", "fr"),))
    doc = SilDocument(
        doc_type="query", sid="srvA", uid=Uid(login="alice"),
        payloads=(Payload("ql", q), Payload("ui", UserInfo(fullname="Alice"))))
    assert parse_document(serialize_document(doc)) == doc


def test_entry_uri_must_be_unique_within_resultset():
    e = ResultEntry("sil://srvA/r1", "srvA", "t", "fr", "prose", 0)
    rs = ResultSet(query_id="q1", entries=(e, e))
    report = validate(SilDocument(
        doc_type="resultset", sid="srvA", uid=Uid(login="a"),
        payloads=(Payload("rs", rs),)))
    assert any(v.rule == "rs.entry-dup" for v in report.violations)


class TestGeneratedCorpus:
    def test_round_trip_500_documents(self):
        docs = corpus.corpus(seed=7, count=500)
        for doc in docs:
            data = serialize_document(doc)
            assert parse_document(data) == doc

    def test_single_mutation_corpus_is_rejected(self):
        rng = random.Random(11)
        docs = corpus.corpus(seed=11, count=60)
        for i, doc in enumerate(docs):
            data = serialize_document(doc)
            mutation = corpus.MUTATIONS[i % len(corpus.MUTATIONS)]
            broken, expected = corpus.mutate(data, rng, mutation)
            with pytest.raises(expected):
                parse_document(broken)
