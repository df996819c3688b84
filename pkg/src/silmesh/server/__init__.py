"""An autonomous specialized server: users, catalog, sessions, transactions."""

from silmesh.server.catalog import (
    CatalogEntry,
    Connection,
    FileCatalogDriver,
    MemoryCatalogDriver,
    QueryHandlerDriver,
    match_entry,
)
from silmesh.server.core import ServerConfig, ServerCore
from silmesh.server.service import ServerService
from silmesh.server.users import UserStore

__all__ = [
    "CatalogEntry",
    "Connection",
    "FileCatalogDriver",
    "MemoryCatalogDriver",
    "QueryHandlerDriver",
    "ServerConfig",
    "ServerCore",
    "ServerService",
    "UserStore",
    "match_entry",
]
