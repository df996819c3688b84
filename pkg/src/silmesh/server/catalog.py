"""Resource catalog and the pluggable query-handler driver interface.

A native database is plugged into a server by providing a driver that
implements QueryHandlerDriver: connection/transaction scope, read-only
query evaluation, and forward-only enumeration of the resulting set. Two
drivers ship here: an in-memory one for fixtures and a file-backed one
reading a directory of resource metadata documents.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

from silmesh.codec.model import Query, QueryClause, ResultEntry
from silmesh.codec.parse import parse_document
from silmesh.errors import DriverError, ResourceGone


@dataclass(frozen=True)
class CatalogEntry:
    resource_uri: str
    title: str
    language: str
    category: str
    required_level: int = 0
    content_type: str = "application/octet-stream"
    content: bytes = b""

    def to_result(self, sid: str) -> ResultEntry:
        return ResultEntry(
            resource_uri=self.resource_uri,
            sid=sid,
            title=self.title,
            language=self.language,
            category=self.category,
            required_level=self.required_level,
            content_type=self.content_type,
        )


def _clause_hit(clause: QueryClause, value: str, fold: bool) -> bool:
    if clause.op == "contains":
        return clause.value.lower() in value.lower()
    if fold:
        return clause.value.lower() == value.lower()
    return clause.value == value


def match_entry(entry: CatalogEntry, clauses: tuple[QueryClause, ...]) -> bool:
    """Conjunction of clauses; language compares case-insensitively,
    keyword searches title, category, and uri."""
    for clause in clauses:
        if clause.field == "language":
            hit = _clause_hit(clause, entry.language, fold=True)
        elif clause.field == "category":
            hit = _clause_hit(clause, entry.category, fold=False)
        elif clause.field == "title":
            hit = _clause_hit(clause, entry.title, fold=False)
        elif clause.field == "id":
            hit = _clause_hit(clause, entry.resource_uri, fold=False)
        else:  # keyword
            hit = any(_clause_hit(clause, v, fold=False)
                      for v in (entry.title, entry.category, entry.resource_uri))
        if not hit:
            return False
    return True


class ResultSetHandle:
    """Forward-only enumeration over one evaluated query."""

    def __init__(self, entries: list[ResultEntry]):
        self._entries = entries
        self._pos = 0

    def next(self, n: int) -> list[ResultEntry]:
        page = self._entries[self._pos:self._pos + n]
        self._pos += len(page)
        return page

    @property
    def exhausted(self) -> bool:
        return self._pos >= len(self._entries)


class Connection:
    """Driver connection; queries are legal only inside begin()/end()."""

    def __init__(self, driver: "QueryHandlerDriver"):
        self._driver = driver
        self._active = False

    def begin(self) -> None:
        self._active = True

    def end(self) -> None:
        self._active = False

    def run(self, query: Query) -> ResultSetHandle:
        if not self._active:
            raise DriverError("run() outside begin()/end()")
        return ResultSetHandle(self._driver._evaluate(query))

    def next(self, handle: ResultSetHandle, n: int) -> list[ResultEntry]:
        if not self._active:
            raise DriverError("next() outside begin()/end()")
        return handle.next(n)


class QueryHandlerDriver:
    """Extension point for plugging a native catalog store into a server."""

    sid: str

    def open_connection(self) -> Connection:
        return Connection(self)

    def _evaluate(self, query: Query) -> list[ResultEntry]:
        """Read-only scan; subclasses return matches in catalog order."""
        raise NotImplementedError

    def get_content(self, resource_uri: str) -> tuple[ResultEntry, bytes]:
        raise NotImplementedError


class MemoryCatalogDriver(QueryHandlerDriver):
    def __init__(self, sid: str, entries: list[CatalogEntry] | None = None):
        self.sid = sid
        self._entries: list[CatalogEntry] = list(entries or [])
        self._lock = threading.Lock()

    def add(self, entry: CatalogEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    def remove(self, resource_uri: str) -> None:
        with self._lock:
            self._entries = [e for e in self._entries
                             if e.resource_uri != resource_uri]

    def _evaluate(self, query: Query) -> list[ResultEntry]:
        with self._lock:
            snapshot = list(self._entries)
        return [e.to_result(self.sid) for e in snapshot
                if match_entry(e, query.clauses)]

    def get_content(self, resource_uri: str) -> tuple[ResultEntry, bytes]:
        with self._lock:
            for e in self._entries:
                if e.resource_uri == resource_uri:
                    return e.to_result(self.sid), e.content
        raise ResourceGone(f"no resource '{resource_uri}'")


class FileCatalogDriver(QueryHandlerDriver):
    """Catalog read from a directory: `<id>.xml` metadata (a one-entry
    resultset document) plus optional `<id>.dat` content alongside."""

    def __init__(self, sid: str, directory: str):
        self.sid = sid
        self.directory = directory
        self._lock = threading.Lock()

    def _scan(self) -> list[tuple[str, CatalogEntry]]:
        items: list[tuple[str, CatalogEntry]] = []
        if not os.path.isdir(self.directory):
            return items
        for fname in sorted(os.listdir(self.directory)):
            if not fname.endswith(".xml"):
                continue
            path = os.path.join(self.directory, fname)
            try:
                with open(path, "rb") as fh:
                    doc = parse_document(fh.read())
                rs = doc.payloads[0].body
                entry = rs.entries[0]
            except Exception as exc:
                raise DriverError(f"unreadable catalog file {fname}: {exc}") from None
            items.append((fname[:-4], CatalogEntry(
                resource_uri=entry.resource_uri,
                title=entry.title,
                language=entry.language,
                category=entry.category,
                required_level=entry.required_level,
                content_type=entry.content_type or "application/octet-stream",
            )))
        return items

    def _evaluate(self, query: Query) -> list[ResultEntry]:
        return [e.to_result(self.sid) for _, e in self._scan()
                if match_entry(e, query.clauses)]

    def get_content(self, resource_uri: str) -> tuple[ResultEntry, bytes]:
        for stem, entry in self._scan():
            if entry.resource_uri == resource_uri:
                data = b""
                dat = os.path.join(self.directory, stem + ".dat")
                if os.path.exists(dat):
                    with open(dat, "rb") as fh:
                        data = fh.read()
                return entry.to_result(self.sid), data
        raise ResourceGone(f"no resource '{resource_uri}'")
