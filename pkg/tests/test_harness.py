"""Harness: deterministic replay, carrier equivalence, boots and failures."""

import os

import pytest

from silmesh import client as sdk
from silmesh.cli import silctl_main, silmesh_main
from silmesh.errors import BindFailed, ExpectationFailed
from silmesh.harness import Mesh, ScenarioRunner, run_scenario_file
from silmesh.transport import LoopbackServer

FIGURE4 = os.path.join(os.path.dirname(__file__), "..", "src", "silmesh",
                       "scenarios", "figure4.steps")


class TestBooting:
    def test_mirrors_equal_registry_after_boot_and_register(self, small_mesh):
        state = small_mesh.nmu.snapshot_records()
        for unit in small_mesh.servers.values():
            assert unit.core.mirror == state

    def test_server_without_nmu_runs_degraded(self, mesh):
        unit = mesh.boot_server("lonely")
        assert unit.core.degraded is True
        mesh.add_user("lonely", "alice", "pw", ())
        mesh.add_resource("lonely", "r1", "solo", "fr", "prose", 0)
        session = mesh.connect("C1", "lonely", "alice", "pw")
        drained = sdk.query(session, sdk.build_query(
            "q1", [("language", "eq", "fr")])).drain()
        assert [e.resource_uri for e in drained] == ["sil://lonely/r1"]

    def test_port_collision_is_bind_failed(self, small_mesh):
        server = LoopbackServer(small_mesh.servers["srvA"].service, 0)
        port = int(server.url.rsplit(":", 1)[1])
        with pytest.raises(BindFailed):
            LoopbackServer(small_mesh.servers["srvA"].service, port)
        server.stop()


class TestScenarioRunner:
    def test_figure4_runs_with_expected_wire_shape(self):
        transcript = run_scenario_file(FIGURE4, transport="memory", seed=42)
        assert transcript.requests(method="POST", path="/query")
        assert len(transcript.requests(method="POST", path="/s2s/query")) == 2
        assert len(transcript.requests(method="GET", path="/s2s/results")) == 2

    def test_reruns_are_byte_identical(self):
        one = run_scenario_file(FIGURE4, transport="memory", seed=42)
        two = run_scenario_file(FIGURE4, transport="memory", seed=42)
        assert one.to_xml() == two.to_xml()

    def test_memory_and_loopback_transcripts_match(self):
        mem = run_scenario_file(FIGURE4, transport="memory", seed=42,
                                port_base=7510)
        http = run_scenario_file(FIGURE4, transport="http", seed=42,
                                 port_base=7510)
        assert mem.to_xml() == http.to_xml()

    def test_timeout_scenario_under_simulated_clock(self):
        script = """
        boot nmu
        boot server srvA
        admin register srvA
        user srvA alice pw
        connect C1 srvA alice pw
        open C1
        txn-status C1 expect open
        advance 301
        txn-status C1 expect closed
        """
        ScenarioRunner(transport="memory", seed=1).run(script)

    def test_failed_expectation_raises_with_step_and_diff(self):
        script = """
        boot nmu
        boot server srvA
        admin register srvA
        user srvA alice pw
        catalog srvA r1 "One" fr prose 0
        connect C1 srvA alice pw
        choose C1 srvA
        query C1 Q1 language eq fr
        drain C1 Q1 expect 5
        """
        with pytest.raises(ExpectationFailed) as err:
            ScenarioRunner(transport="memory", seed=1).run(script)
        assert "drain C1 Q1" in str(err.value)
        assert "got 1" in str(err.value)

    def test_down_step_flags_partial_failure(self):
        script = """
        boot nmu
        boot server srvA
        boot server srvB
        admin register srvA
        admin register srvB
        user srvA alice pw
        catalog srvA r1 "One" fr prose 0
        catalog srvB r2 "Two" fr prose 0
        connect C1 srvA alice pw
        choose C1 srvA srvB
        down srvB
        query C1 Q1 language eq fr
        drain C1 Q1 expect 1
        """
        ScenarioRunner(transport="memory", seed=1).run(script)


class TestCliExitCodes:
    def test_scenario_ok_is_zero(self, tmp_path, capsys):
        out = tmp_path / "t.xml"
        code = silmesh_main(["scenario", "run", FIGURE4, "--seed", "42",
                             "--transcript", str(out)])
        assert code == 0
        assert out.read_bytes().startswith(b"<transcript ")

    def test_bundled_scenario_name_resolves(self, tmp_path):
        out = tmp_path / "t.xml"
        assert silmesh_main(["scenario", "run", "figure4",
                             "--transcript", str(out)]) == 0

    def test_expectation_failure_is_two(self, tmp_path):
        bad = tmp_path / "bad.steps"
        bad.write_text(FAILING_SCRIPT)
        assert silmesh_main(["scenario", "run", str(bad)]) == 2

    def test_boot_failure_is_three(self, tmp_path):
        # occupy the port the scenario will ask for
        probe = Mesh(transport="memory")
        probe.boot_nmu()
        blocker = LoopbackServer(None, 7610)
        try:
            script = tmp_path / "boot.steps"
            script.write_text("boot nmu\n")
            code = silmesh_main(["scenario", "run", str(script),
                                 "--transport", "http",
                                 "--port-base", "7610"])
            assert code == 3
        finally:
            blocker.stop()
            probe.stop()


FAILING_SCRIPT = """
boot nmu
boot server srvA
admin register srvA
user srvA alice pw
catalog srvA r1 "One" fr prose 0
connect C1 srvA alice pw
choose C1 srvA
query C1 Q1 language eq fr
drain C1 Q1 expect 99
"""


class TestSilctl:
    def test_validate_and_canon(self, tmp_path, capsys):
        doc = tmp_path / "doc.xml"
        doc.write_bytes(
            b'<sil type="user" sid="S1" version="0.5"><uid type="user">'
            b'<login id="alice"/><passwd>x</passwd><access><default/></access>'
            b'</uid><ui/></sil>')
        assert silctl_main(["validate", str(doc)]) == 0
        assert "valid" in capsys.readouterr().out
        assert silctl_main(["canon", str(doc)]) == 0
        assert capsys.readouterr().out.startswith('<sil type="user"')

    def test_validate_reports_violation(self, tmp_path, capsys):
        doc = tmp_path / "doc.xml"
        doc.write_bytes(
            b'<sil type="user" sid="S1" version="0.4"><uid type="user">'
            b'<login id="alice"/><passwd>x</passwd><access><default/></access>'
            b'</uid><ui/></sil>')
        assert silctl_main(["validate", str(doc)]) == 1
        assert "VersionMismatch" in capsys.readouterr().out

    def test_fuzz_self_check(self, capsys):
        assert silctl_main(["fuzz", "--seed", "3", "--count", "60"]) == 0
        out = capsys.readouterr().out
        assert "0 round-trip failures" in out
        assert "0 mutation escapes" in out
