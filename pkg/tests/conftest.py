import pytest

from silmesh.harness import Mesh


@pytest.fixture
def mesh():
    m = Mesh(transport="memory", seed=1234)
    yield m
    m.stop()


@pytest.fixture
def small_mesh(mesh):
    """Registry, two servers, one user, a tiny bilingual catalog."""
    mesh.boot_nmu()
    mesh.boot_server("srvA", levels={"lingua": 1, "inalf": 5})
    mesh.boot_server("srvB", levels={"lingua": 1})
    mesh.admin_register("srvA")
    mesh.admin_register("srvB")
    mesh.add_user("srvA", "alice", "pw", ("lingua",))
    mesh.add_resource("srvA", "a1", "Lettres persanes", "fr", "prose", 0,
                      b"one")
    mesh.add_resource("srvA", "a2", "Chansons", "fr", "verse", 0, b"two")
    mesh.add_resource("srvA", "a3", "Die Leiden", "de", "prose", 0)
    mesh.add_resource("srvB", "b1", "Le Misanthrope", "fr", "theatre", 0)
    mesh.add_resource("srvB", "b2", "Faust", "de", "theatre", 0)
    return mesh
