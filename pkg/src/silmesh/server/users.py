"""Per-server user database: identification documents plus workspaces.

Users are stored as user documents of the interface language, one file per
login; the wire carries the password in clear inside the login document,
but storage keeps only a salted hash. Workspaces are stored verbatim as
workspace documents under the owning login, so a load returns exactly what
was saved.
"""

from __future__ import annotations

import os
import threading
import urllib.parse
from dataclasses import dataclass, replace

from silmesh.codec.model import (
    AccessSpec,
    SilDocument,
    Uid,
    UserInfo,
    Workspace,
    user_document,
    workspace_document,
)
from silmesh.codec.parse import parse_document
from silmesh.codec.serialize import serialize_document
from silmesh.errors import AccountDisabled, AuthFailed, UnknownWorkspace
from silmesh.nmu import hash_secret, verify_secret

_DUMMY_HASH = hash_secret("decoy", salt="00" * 8)


@dataclass(frozen=True)
class UserRecord:
    uid: Uid  # passwd field holds the salted hash, never the clear text
    info: UserInfo
    level: int


class UserStore:
    """File-backed when given a directory, memory-only otherwise."""

    def __init__(self, sid: str, state_dir: str | None = None,
                 levels: dict[str, int] | None = None):
        self.sid = sid
        self.state_dir = state_dir
        self.levels = dict(levels or {})
        self._users: dict[str, SilDocument] = {}
        self._workspaces: dict[tuple[str, str], SilDocument] = {}
        self._lock = threading.RLock()
        self._user_locks: dict[str, threading.Lock] = {}
        if state_dir:
            os.makedirs(os.path.join(state_dir, "users"), exist_ok=True)
            os.makedirs(os.path.join(state_dir, "workspaces"), exist_ok=True)
            self._load()

    def _load(self) -> None:
        users_dir = os.path.join(self.state_dir, "users")
        for fname in sorted(os.listdir(users_dir)):
            if fname.endswith(".xml"):
                with open(os.path.join(users_dir, fname), "rb") as fh:
                    doc = parse_document(fh.read())
                self._users[doc.uid.login] = doc
        ws_root = os.path.join(self.state_dir, "workspaces")
        for login in sorted(os.listdir(ws_root)):
            login_dir = os.path.join(ws_root, login)
            for fname in sorted(os.listdir(login_dir)):
                with open(os.path.join(login_dir, fname), "rb") as fh:
                    doc = parse_document(fh.read())
                self._workspaces[(login, doc.payloads[0].body.name)] = doc

    def _write(self, relpath: str, data: bytes) -> None:
        if not self.state_dir:
            return
        path = os.path.join(self.state_dir, relpath)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)

    def user_lock(self, login: str) -> threading.Lock:
        with self._lock:
            return self._user_locks.setdefault(login, threading.Lock())

    # --- accounts ------------------------------------------------------------

    def add_user(self, login: str, passwd: str, groups: tuple[str, ...] = (),
                 default_group: str | None = None, info: UserInfo | None = None,
                 disabled: bool = False) -> None:
        uid = Uid(login=login, passwd=hash_secret(passwd),
                  access=AccessSpec(default_group=default_group,
                                    groups=tuple(groups)),
                  status="disabled" if disabled else "active")
        doc = user_document(self.sid, uid, info or UserInfo())
        with self._lock:
            self._users[login] = doc
        self._write(os.path.join("users", f"{login}.xml"),
                    serialize_document(doc))

    def effective_level(self, uid: Uid) -> int:
        return max((self.levels.get(g, 0) for g in uid.access.groups), default=0)

    def verify(self, login: str, passwd: str | None) -> UserRecord:
        """Constant-time credential check; unknown login and wrong password
        are indistinguishable."""
        with self._lock:
            doc = self._users.get(login)
        stored = doc.uid.passwd if doc is not None else _DUMMY_HASH
        ok = verify_secret(stored or _DUMMY_HASH, passwd or "")
        if doc is None or not ok:
            raise AuthFailed("unknown login or wrong password")
        if doc.uid.status == "disabled":
            raise AccountDisabled(f"account '{login}' is disabled")
        info = doc.payloads[0].body
        return UserRecord(uid=doc.uid, info=info,
                          level=self.effective_level(doc.uid))

    def get(self, login: str) -> UserRecord | None:
        with self._lock:
            doc = self._users.get(login)
        if doc is None:
            return None
        return UserRecord(uid=doc.uid, info=doc.payloads[0].body,
                          level=self.effective_level(doc.uid))

    # --- workspaces ------------------------------------------------------------

    def save_workspace(self, login: str, ws: Workspace) -> None:
        rec = self.get(login)
        owner_uid = replace(rec.uid, passwd=None) if rec else Uid(login=login)
        doc = workspace_document(self.sid, owner_uid, ws)
        with self.user_lock(login):
            with self._lock:
                self._workspaces[(login, ws.name)] = doc
            self._write(self._ws_path(login, ws.name), serialize_document(doc))

    def load_workspace(self, login: str, name: str) -> Workspace:
        with self._lock:
            doc = self._workspaces.get((login, name))
        if doc is None:
            raise UnknownWorkspace(f"no workspace '{name}' for '{login}'")
        return doc.payloads[0].body

    def list_workspaces(self, login: str) -> tuple[str, ...]:
        with self._lock:
            return tuple(sorted(n for (lg, n) in self._workspaces if lg == login))

    def _ws_path(self, login: str, name: str) -> str:
        safe = urllib.parse.quote(name, safe="")
        return os.path.join("workspaces", login, f"{safe}.xml")
