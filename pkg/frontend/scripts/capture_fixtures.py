"""Capture real wire documents from a scripted mesh run and freeze them
as fixtures for the frontend tests. Rerun after protocol changes:

    python3 frontend/scripts/capture_fixtures.py
"""

import os

from silmesh import client as sdk
from silmesh.codec.model import ServerProfile
from silmesh.harness import Mesh

OUT = os.path.join(os.path.dirname(__file__), "..", "test", "fixtures")


def capture() -> None:
    mesh = Mesh(transport="memory", seed=2026)
    mesh.boot_nmu()
    mesh.boot_server("srvA", levels={"lingua": 1})
    mesh.boot_server("srvB", levels={"lingua": 1})
    mesh.admin_register("srvA", profile=ServerProfile(
        languages=("fr",), categories=("prose", "verse")))
    mesh.admin_register("srvB", profile=ServerProfile(
        languages=("fr", "de"), categories=("theatre",)))
    mesh.add_user("srvA", "alice", "pw", ("lingua",))
    mesh.add_resource("srvA", "a1", "Lettres persanes", "fr", "prose", 0, b"x")
    mesh.add_resource("srvA", "a2", "Chansons", "fr", "verse", 0)
    mesh.add_resource("srvB", "b1", "Le Misanthrope", "fr", "theatre", 0)

    session = mesh.connect("C1", "srvA", "alice", "pw")
    sdk.choose_servers(session, ["srvA", "srvB"])
    pages = sdk.query(session, sdk.build_query(
        "q1", [("language", "eq", "fr")]))
    pages.drain()
    sdk.count(session, sdk.build_query("q2", [("language", "eq", "fr")],
                                       scope="content-count"))
    sdk.add_to_basket(session, "reading", ["sil://srvA/a1", "sil://srvB/b1"])
    sdk.save(session)
    sdk.load_workspace(session, "default")

    wanted = {
        "login-response.xml": ("response", "POST", "/session"),
        "servers.xml": ("response", "GET", "/servers"),
        "query-response.xml": ("response", "POST", "/query"),
        "results-page.xml": ("response", "GET", "/results"),
        "count-response.xml": ("response", "GET", "/count"),
        "workspace.xml": ("response", "GET", "/workspace/default"),
    }
    os.makedirs(OUT, exist_ok=True)
    for fname, (kind, method, path) in wanted.items():
        msg = next(m for m in mesh.transcript.messages
                   if m.kind == kind and m.method == method
                   and m.target.split("?")[0] == path and m.status == 200)
        with open(os.path.join(OUT, fname), "wb") as fh:
            fh.write(msg.body)
        print(f"{fname}: {len(msg.body)} bytes")
    mesh.stop()


if __name__ == "__main__":
    capture()
