"""Client SDK: the four-step scenario and workspace/basket behavior."""

import pytest

from silmesh import client as sdk
from silmesh.errors import (
    AuthFailed,
    LevelDenied,
    ResourceGone,
    ServerUnreachable,
    SilError,
)


class TestConnect:
    def test_connect_lists_choosable_servers(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        assert {r.name for r in session.mirror} == {"srvA", "srvB"}
        assert session.level == 1

    def test_registration_is_per_site(self, small_mesh):
        with pytest.raises(AuthFailed):
            small_mesh.connect("C2", "srvB", "alice", "pw")

    def test_unreachable_server(self, small_mesh):
        small_mesh.hub.set_down(small_mesh.servers["srvA"].url, True)
        with pytest.raises(ServerUnreachable):
            small_mesh.connect("C3", "srvA", "alice", "pw")

    def test_choosing_unknown_server_is_refused(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        with pytest.raises(SilError):
            sdk.choose_servers(session, ["srvZ"])


class TestIterativeRestriction:
    def test_adding_a_clause_narrows_results(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        sdk.choose_servers(session, ["srvA", "srvB"])
        broad = sdk.query(session, sdk.build_query(
            "q1", [("language", "eq", "fr")])).drain()
        narrow = sdk.query(session, sdk.build_query(
            "q2", [("language", "eq", "fr"), ("category", "eq", "prose")])).drain()
        broad_uris = {e.resource_uri for e in broad}
        narrow_uris = {e.resource_uri for e in narrow}
        assert narrow_uris <= broad_uris
        assert narrow_uris == {"sil://srvA/a1"}

    def test_query_scopes_to_working_servers(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        sdk.choose_servers(session, ["srvA"])
        drained = sdk.query(session, sdk.build_query(
            "q1", [("language", "eq", "fr")])).drain()
        assert {e.sid for e in drained} == {"srvA"}

    def test_thin_client_holds_at_most_one_page(self, small_mesh):
        mesh = small_mesh
        for i in range(40):
            mesh.add_resource("srvA", f"bulk{i}", f"t{i}", "it", "prose", 0)
        session = mesh.connect("C1", "srvA", "alice", "pw")
        sdk.choose_servers(session, ["srvA"])
        import dataclasses

        session.workspace = dataclasses.replace(
            session.workspace,
            prefs=dataclasses.replace(session.workspace.prefs, page_size=7))
        drained = sdk.query(session, sdk.build_query(
            "q1", [("language", "eq", "it")])).drain()
        assert len(drained) == 40
        assert session.max_held <= 7


class TestBasketsAndWorkspace:
    def test_add_same_uri_twice_keeps_one_copy(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        sdk.add_to_basket(session, "b1", ["sil://srvA/a1"])
        sdk.add_to_basket(session, "b1", ["sil://srvA/a1", "sil://srvB/b1"])
        basket = session.workspace.baskets[0]
        assert basket.items == ("sil://srvA/a1", "sil://srvB/b1")

    def test_save_reconnect_load_restores_state(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        sdk.choose_servers(session, ["srvA", "srvB"])
        drained = sdk.query(session, sdk.build_query(
            "q1", [("language", "eq", "fr")])).drain()
        sdk.add_to_basket(session, "keep", [drained[0].resource_uri])
        sdk.add_to_basket(session, "later", [drained[-1].resource_uri])
        saved = session.workspace
        sdk.save(session)

        fresh = small_mesh.connect("C2", "srvA", "alice", "pw")
        restored = sdk.load_workspace(fresh, "default")
        assert restored == saved
        assert fresh.working_servers == ("srvA", "srvB")

    def test_stale_pointer_tolerance(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        sdk.add_to_basket(session, "b1", ["sil://srvA/a1"])
        sdk.save(session)
        small_mesh.servers["srvA"].driver.remove("sil://srvA/a1")

        fresh = small_mesh.connect("C2", "srvA", "alice", "pw")
        ws = sdk.load_workspace(fresh, "default")  # loads fine
        assert ws.baskets[0].items == ("sil://srvA/a1",)
        with pytest.raises(ResourceGone):
            sdk.fetch_resource(fresh, "sil://srvA/a1")


class TestResourceFetch:
    def test_local_fetch_returns_metadata_and_content(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        entry, content = sdk.fetch_resource(session, "sil://srvA/a1")
        assert entry.title == "Lettres persanes"
        assert content == b"one"

    def test_remote_fetch_proxies_through_local_server(self, small_mesh):
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        entry, _ = sdk.fetch_resource(session, "sil://srvB/b1")
        assert entry.sid == "srvB"
        proxied = small_mesh.transcript.requests(path="/s2s/resource",
                                                 src="srvA", dst="srvB")
        assert len(proxied) == 1

    def test_remote_level_enforcement(self, small_mesh):
        small_mesh.add_resource("srvB", "top", "classified", "fr", "prose",
                                level=5)
        session = small_mesh.connect("C1", "srvA", "alice", "pw")
        with pytest.raises(LevelDenied):
            sdk.fetch_resource(session, "sil://srvB/top")
