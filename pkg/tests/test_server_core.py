"""Server core: authentication, transaction lifecycle, snapshots, drivers.

The query oracle here is a deliberately naive reimplementation of clause
matching, independent of the production matcher.
"""

import random

import pytest

from silmesh.clock import SimClock
from silmesh.codec.model import Basket, Query, QueryClause, Workspace
from silmesh.codec.serialize import serialize_document
from silmesh.errors import (
    AccountDisabled,
    AuthFailed,
    EnumerationCancelled,
    NoOpenTransaction,
    SessionExpired,
    TransactionClosed,
    UnknownHandle,
    UnknownTransaction,
    UnknownWorkspace,
)
from silmesh.server.catalog import CatalogEntry, FileCatalogDriver, MemoryCatalogDriver
from silmesh.server.core import ServerConfig, ServerCore

TIMEOUT = 300.0


def naive_match(entry: CatalogEntry, clauses) -> bool:
    """Independent oracle: straightforward per-clause predicates."""
    for c in clauses:
        if c.field == "language":
            value = entry.language
            ok = (value.lower() == c.value.lower() if c.op == "eq"
                  else c.value.lower() in value.lower())
        elif c.field == "keyword":
            pool = [entry.title, entry.category, entry.resource_uri]
            ok = (any(v == c.value for v in pool) if c.op == "eq"
                  else any(c.value.lower() in v.lower() for v in pool))
        else:
            value = {"category": entry.category, "title": entry.title,
                     "id": entry.resource_uri}[c.field]
            ok = value == c.value if c.op == "eq" else c.value.lower() in value.lower()
        if not ok:
            return False
    return True


FIXTURE = [
    CatalogEntry("sil://s/1", "Lettres persanes", "fr", "prose", 0),
    CatalogEntry("sil://s/2", "Chansons", "fr", "verse", 0),
    CatalogEntry("sil://s/3", "Pensées", "fr", "prose", 1),
    CatalogEntry("sil://s/4", "Faust", "de", "prose", 0),
    CatalogEntry("sil://s/5", "Die Leiden", "de", "prose", 5),
]


def make_core(entries=None, levels=None, timeout=TIMEOUT):
    clock = SimClock()
    driver = MemoryCatalogDriver("s", list(FIXTURE if entries is None else entries))
    config = ServerConfig(sid="s", timeout_s=timeout,
                          levels=levels or {"lingua": 1, "inalf": 5})
    core = ServerCore(config, driver, clock=clock, rng=random.Random(3))
    core.store.add_user("alice", "pw", ("lingua",))
    core.store.add_user("root", "pw", ("inalf",))
    core.store.add_user("ghost", "pw", (), disabled=True)
    return core


def login(core, user="alice"):
    return core.authenticate(user, "pw")


def q(*clauses, qid="q1", **kw):
    return Query(query_id=qid,
                 clauses=tuple(QueryClause(f, o, v) for f, o, v in clauses), **kw)


class TestAuthentication:
    def test_valid_credentials_yield_working_token(self):
        core = make_core()
        session = login(core)
        assert core.session(session.token) is session
        assert session.level == 1

    def test_wrong_password_and_unknown_login_are_uniform(self):
        core = make_core()
        with pytest.raises(AuthFailed) as wrong:
            core.authenticate("alice", "nope")
        with pytest.raises(AuthFailed) as unknown:
            core.authenticate("nobody", "nope")
        assert str(wrong.value) == str(unknown.value)

    def test_disabled_account(self):
        core = make_core()
        with pytest.raises(AccountDisabled):
            core.authenticate("ghost", "pw")

    def test_expired_session_is_rejected_on_use(self):
        core = make_core()
        session = login(core)
        core.clock.advance(core.config.session_ttl_s + 1)
        with pytest.raises(SessionExpired):
            core.session(session.token)

    def test_level_is_max_over_groups(self):
        core = make_core()
        core.store.add_user("both", "pw", ("lingua", "inalf"))
        assert core.authenticate("both", "pw").level == 5


class TestTransactionLifecycle:
    def test_open_then_is_open(self):
        core = make_core()
        session = login(core)
        txn = core.open_transaction(session)
        assert core.is_open(session, txn.txn_id) is True

    def test_open_is_idempotent_per_session(self):
        core = make_core()
        session = login(core)
        assert core.open_transaction(session) is core.open_transaction(session)

    def test_timeout_closes_and_releases(self):
        core = make_core()
        session = login(core)
        txn = core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "fr")))
        core.clock.advance(TIMEOUT + 1)
        assert core.is_open(session, txn.txn_id) is False
        with pytest.raises(UnknownTransaction):
            core.fetch_results(session, handle, 10)

    def test_touch_keeps_transaction_alive(self):
        core = make_core()
        session = login(core)
        txn = core.open_transaction(session)
        for _ in range(3):
            core.clock.advance(TIMEOUT - 10)
            core.local_query(session, q(("language", "eq", "fr")))
        assert core.is_open(session, txn.txn_id) is True

    def test_close_then_fetch_is_unknown_transaction(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "fr")))
        core.close_transaction(session)
        with pytest.raises(UnknownTransaction):
            core.fetch_results(session, handle, 10)

    def test_query_without_transaction(self):
        core = make_core()
        session = login(core)
        with pytest.raises(NoOpenTransaction):
            core.local_query(session, q(("language", "eq", "fr")))

    def test_commit_and_abort_require_open_transaction(self):
        core = make_core()
        session = login(core)
        with pytest.raises(TransactionClosed):
            core.commit(session)
        core.open_transaction(session)
        core.close_transaction(session)
        with pytest.raises(TransactionClosed):
            core.abort(session)

    def test_unknown_transaction_id(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        with pytest.raises(UnknownTransaction):
            core.is_open(session, "t9999")

    def test_abort_cancels_enumeration(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "fr")))
        core.abort(session)
        with pytest.raises(EnumerationCancelled):
            core.fetch_results(session, handle, 10)


class TestWorkspaceDurability:
    WS = Workspace(name="default", servers=("s",),
                   baskets=(Basket(name="b", items=("sil://s/1",)),))

    def test_commit_makes_workspace_durable(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        core.save_workspace(session, self.WS)
        core.commit(session)
        relogin = login(core)
        assert core.load_workspace(relogin, "default") == self.WS

    def test_abort_discards_workspace(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        core.save_workspace(session, self.WS)
        core.abort(session)
        relogin = login(core)
        with pytest.raises(UnknownWorkspace):
            core.load_workspace(relogin, "default")

    def test_pending_write_visible_inside_transaction(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        core.save_workspace(session, self.WS)
        assert core.load_workspace(session, "default") == self.WS

    def test_workspaces_are_per_user(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        core.save_workspace(session, self.WS)
        core.commit(session)
        other = login(core, "root")
        with pytest.raises(UnknownWorkspace):
            core.load_workspace(other, "default")

    def test_file_store_round_trip(self, tmp_path):
        clock = SimClock()
        config = ServerConfig(sid="s", state_dir=str(tmp_path),
                              levels={"lingua": 1})
        core = ServerCore(config, MemoryCatalogDriver("s"), clock=clock,
                          rng=random.Random(1))
        core.store.add_user("alice", "pw", ("lingua",))
        session = core.authenticate("alice", "pw")
        core.open_transaction(session)
        core.save_workspace(session, self.WS)
        core.commit(session)

        core2 = ServerCore(config, MemoryCatalogDriver("s"), clock=clock,
                           rng=random.Random(2))
        session2 = core2.authenticate("alice", "pw")
        assert core2.load_workspace(session2, "default") == self.WS


class TestQueries:
    def test_snapshot_matches_brute_force_oracle(self):
        core = make_core()
        session = login(core, "root")  # level 5 sees everything
        core.open_transaction(session)
        cases = [
            q(("language", "eq", "fr"), ("category", "eq", "prose")),
            q(("language", "eq", "de")),
            q(("keyword", "contains", "le")),
            q(("title", "contains", "chanson")),
            q(("id", "eq", "sil://s/4")),
        ]
        for query in cases:
            expected = [e.resource_uri for e in FIXTURE
                        if naive_match(e, query.clauses)]
            handle = core.local_query(session, query)
            page, _, _ = core.fetch_results(session, handle, 100)
            assert [e.resource_uri for e in page] == expected

    def test_level_filter_applies_before_caching(self):
        core = make_core()
        session = login(core)  # level 1
        core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "de")))
        page, _, _ = core.fetch_results(session, handle, 100)
        # the level-5 resource is absent from the snapshot itself
        assert [e.resource_uri for e in page] == ["sil://s/4"]

    def test_pagination_partitions_snapshot(self):
        entries = [CatalogEntry(f"sil://s/r{i}", f"t{i}", "fr", "prose", 0)
                   for i in range(120)]
        core = make_core(entries=entries)
        session = login(core)
        core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "fr")))
        sizes = []
        collected = []
        done = False
        while not done:
            page, _, done = core.fetch_results(session, handle, 50)
            sizes.append(len(page))
            collected.extend(e.resource_uri for e in page)
        assert sizes == [50, 50, 20]
        assert collected == [e.resource_uri for e in entries]

    def test_short_final_page_sets_done(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "fr")))
        page, _, done = core.fetch_results(session, handle, 100)
        assert done and len(page) == 3

    def test_snapshot_is_stable_under_catalog_mutation(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        handle = core.local_query(session, q(("language", "eq", "fr")))
        core.driver.add(CatalogEntry("sil://s/new", "Nouveau", "fr", "prose", 0))
        core.driver.remove("sil://s/1")
        page, _, _ = core.fetch_results(session, handle, 100)
        assert [e.resource_uri for e in page] == ["sil://s/1", "sil://s/2",
                                                  "sil://s/3"]

    def test_unknown_handle(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        with pytest.raises(UnknownHandle):
            core.fetch_results(session, "h9999", 1)

    def test_count_equals_fetch_length(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        for query in (q(("language", "eq", "fr")),
                      q(("language", "eq", "nl")),
                      q(("keyword", "contains", "a"))):
            count = core.count_query(session, query)
            handle = core.local_query(session, query)
            page, _, _ = core.fetch_results(session, handle, 1000)
            assert count == len(page)

    def test_max_results_truncates_snapshot(self):
        core = make_core()
        session = login(core)
        core.open_transaction(session)
        handle = core.local_query(
            session, q(("language", "eq", "fr"), max_results=2))
        page, _, done = core.fetch_results(session, handle, 100)
        assert len(page) == 2 and done

    def test_authorization_monotonicity(self):
        rng = random.Random(17)
        entries = [CatalogEntry(f"sil://s/m{i}", f"t{i}",
                                rng.choice(("fr", "de")),
                                rng.choice(("prose", "verse")),
                                rng.randrange(6))
                   for i in range(60)]
        core = make_core(entries=entries)
        low = login(core)    # level 1
        high = login(core, "root")  # level 5
        core.open_transaction(low)
        core.open_transaction(high)
        query = q(("keyword", "contains", "t"))
        low_page, _, _ = core.fetch_results(low, core.local_query(low, query), 1000)
        high_page, _, _ = core.fetch_results(high, core.local_query(high, query), 1000)
        assert set(e.resource_uri for e in low_page) <= set(
            e.resource_uri for e in high_page)


class TestDriverEquivalence:
    def test_memory_and_file_drivers_agree(self, tmp_path):
        from silmesh.codec.model import ResultSet, Uid, resultset_document

        for i, entry in enumerate(FIXTURE):
            doc = resultset_document(
                "s", Uid(login="s", kind="provider"),
                ResultSet(query_id="catalog",
                          entries=(entry.to_result("s"),), total=1))
            (tmp_path / f"r{i}.xml").write_bytes(serialize_document(doc))
            (tmp_path / f"r{i}.dat").write_bytes(b"payload")
        memory = MemoryCatalogDriver("s", list(FIXTURE))
        filed = FileCatalogDriver("s", str(tmp_path))
        for query in (q(("language", "eq", "fr")),
                      q(("category", "eq", "prose")),
                      q(("keyword", "contains", "en"))):
            m = memory.open_connection()
            f = filed.open_connection()
            m.begin(), f.begin()
            got_m = m.next(m.run(query), 100)
            got_f = f.next(f.run(query), 100)
            m.end(), f.end()
            assert sorted(e.resource_uri for e in got_m) == sorted(
                e.resource_uri for e in got_f)
