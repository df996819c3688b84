"""silmesh: a federated resource-sharing mesh.

Autonomous servers hold their own users and resource catalogs, a central
registry (the NMU) is the only persistent link between them, and every byte
on the wire is a document of the SIL interface language (version 0.5).
Servers double as brokers: a query fans out to the user's working servers
and the results stream back through a bounded double cache.
"""

__version__ = "0.5.0"

WIRE_VERSION = "0.5"
