"""Codec for the SIL interface language, wire version 0.5.

Every message in the mesh is a `sil` envelope carrying a user identification
block and one or more module payloads (ws, ui, ql, rs, or the net extension).
This package parses, validates, and canonically serializes those documents;
the grammar is frozen in docs/wire-protocol.md.
"""

from silmesh.codec.model import (
    WIRE_VERSION,
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
    net_document,
    query_document,
    resultset_document,
    user_document,
    workspace_document,
)
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import canonicalize, serialize_document
from silmesh.codec.validate import ValidationReport, Violation, validate

__all__ = [
    "WIRE_VERSION",
    "AccessSpec",
    "Basket",
    "Payload",
    "Preferences",
    "Query",
    "QueryClause",
    "ResultEntry",
    "ResultSet",
    "ServerProfile",
    "ServerRecord",
    "ServerStatus",
    "SilDocument",
    "Uid",
    "UserInfo",
    "Workspace",
    "ValidationReport",
    "Violation",
    "canonicalize",
    "net_document",
    "parse_document",
    "query_document",
    "resultset_document",
    "serialize_document",
    "user_document",
    "validate",
    "workspace_document",
]
