"""Single-file SQLite store plus a content-addressed file repository.

One directory holds everything a profile owns: ``graph.db`` (nodes,
links, reachability index, checkpoints, and the work queue the daemon
workers share) and ``repo/`` with file payloads keyed by sha256. All
writes go through short IMMEDIATE transactions so several OS processes
can use the same profile concurrently; repository blobs are written
before the referencing row commits, which keeps a crash from ever
leaving a committed node pointing at a missing file.
"""

from __future__ import annotations

import json
import os
import sqlite3
import threading
import time
import uuid as _uuid
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Optional, Sequence

from provflow.caching.hashing import compute_node_hash, sha256_hex
from provflow.exceptions import (
    AlreadyStoredError,
    CheckpointNotFoundError,
    ImmutableError,
    InvalidValueError,
    LinkViolationError,
    NodeNotFoundError,
    StoreError,
)
from provflow.graph.links import DATA_PROVENANCE_TYPES, Link, LinkType, validate_link
from provflow.graph.nodes import Node
from provflow.graph.values import (
    canonical_json,
    delete_path,
    set_path,
    validate_document,
    validate_value,
)

SCHEMA_VERSION = 1

# 16 MiB default ceiling for one attributes/extras document
DOC_LIMIT = 16 * 1024 * 1024

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS nodes (
    id          INTEGER PRIMARY KEY AUTOINCREMENT,
    uuid        TEXT NOT NULL UNIQUE,
    kind        TEXT NOT NULL,
    label       TEXT NOT NULL DEFAULT '',
    description TEXT NOT NULL DEFAULT '',
    ctime       REAL NOT NULL,
    mtime       REAL NOT NULL,
    computer    TEXT,
    attributes  TEXT NOT NULL,
    extras      TEXT NOT NULL,
    repo        TEXT NOT NULL,
    hash        TEXT
);
CREATE INDEX IF NOT EXISTS ix_nodes_kind ON nodes(kind);
CREATE INDEX IF NOT EXISTS ix_nodes_hash ON nodes(hash);

CREATE TABLE IF NOT EXISTS links (
    id     INTEGER PRIMARY KEY AUTOINCREMENT,
    source TEXT NOT NULL,
    target TEXT NOT NULL,
    type   TEXT NOT NULL,
    label  TEXT NOT NULL,
    UNIQUE(source, target, type, label)
);
CREATE INDEX IF NOT EXISTS ix_links_source ON links(source);
CREATE INDEX IF NOT EXISTS ix_links_target ON links(target);

-- reachability over {input_calc, create}, min hop count per pair
CREATE TABLE IF NOT EXISTS tc (
    ancestor   TEXT NOT NULL,
    descendant TEXT NOT NULL,
    depth      INTEGER NOT NULL,
    PRIMARY KEY (ancestor, descendant)
) WITHOUT ROWID;
CREATE INDEX IF NOT EXISTS ix_tc_descendant ON tc(descendant);

CREATE TABLE IF NOT EXISTS checkpoints (
    process_uuid TEXT PRIMARY KEY,
    version      INTEGER NOT NULL,
    payload      BLOB NOT NULL,
    mtime        REAL NOT NULL
);

-- durable work queue -------------------------------------------------

CREATE TABLE IF NOT EXISTS tasks (
    id             INTEGER PRIMARY KEY AUTOINCREMENT,
    process_uuid   TEXT NOT NULL UNIQUE,
    state          TEXT NOT NULL DEFAULT 'pending',
    worker_id      TEXT,
    enqueue_time   REAL NOT NULL,
    claim_time     REAL,
    delivery_count INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS ix_tasks_state ON tasks(state);

CREATE TABLE IF NOT EXISTS workers (
    worker_id      TEXT PRIMARY KEY,
    pid            INTEGER NOT NULL,
    started        REAL NOT NULL,
    last_heartbeat REAL NOT NULL
);

CREATE TABLE IF NOT EXISTS rpc (
    id          INTEGER PRIMARY KEY AUTOINCREMENT,
    target_uuid TEXT NOT NULL,
    action      TEXT NOT NULL,
    argument    TEXT,
    created     REAL NOT NULL,
    state       TEXT NOT NULL DEFAULT 'pending',
    reply       TEXT
);
CREATE INDEX IF NOT EXISTS ix_rpc_state ON rpc(state);

CREATE TABLE IF NOT EXISTS events (
    seq          INTEGER PRIMARY KEY AUTOINCREMENT,
    process_uuid TEXT NOT NULL,
    kind         TEXT NOT NULL,
    payload      TEXT,
    time         REAL NOT NULL
);

-- append-only audit of step executions and task assignments, used to
-- prove exactly-once execution under worker crashes
CREATE TABLE IF NOT EXISTS steplog (
    id           INTEGER PRIMARY KEY AUTOINCREMENT,
    process_uuid TEXT NOT NULL,
    step         TEXT NOT NULL,
    worker_id    TEXT NOT NULL,
    time         REAL NOT NULL
);

CREATE TABLE IF NOT EXISTS assignment_log (
    id           INTEGER PRIMARY KEY AUTOINCREMENT,
    process_uuid TEXT NOT NULL,
    worker_id    TEXT NOT NULL,
    claimed      REAL NOT NULL,
    released     REAL,
    outcome      TEXT
);

-- simulated batch scheduler + transport bookkeeping ------------------

CREATE TABLE IF NOT EXISTS sched_jobs (
    job_id      TEXT PRIMARY KEY,
    computer    TEXT NOT NULL,
    workdir     TEXT NOT NULL,
    script      TEXT NOT NULL,
    directives  TEXT NOT NULL,
    submit_time REAL NOT NULL,
    rc          INTEGER,
    killed      INTEGER NOT NULL DEFAULT 0,
    queue_delay REAL NOT NULL DEFAULT 0,
    run_delay   REAL NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS sched_status_cache (
    computer TEXT PRIMARY KEY,
    fetched  REAL NOT NULL,
    states   TEXT NOT NULL,
    refreshes INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS transport_opens (
    id       INTEGER PRIMARY KEY AUTOINCREMENT,
    computer TEXT NOT NULL,
    owner    TEXT NOT NULL,
    time     REAL NOT NULL
);

-- every actual external execution (script run) lands here; cache hits do not
CREATE TABLE IF NOT EXISTS exec_log (
    id   INTEGER PRIMARY KEY AUTOINCREMENT,
    kind TEXT NOT NULL,
    ref  TEXT NOT NULL,
    time REAL NOT NULL
);

CREATE TABLE IF NOT EXISTS computers (
    name   TEXT PRIMARY KEY,
    config TEXT NOT NULL
);
"""

_NODE_COLUMNS = (
    "id, uuid, kind, label, description, ctime, mtime, computer, "
    "attributes, extras, repo, hash"
)


class Store:
    """Handle on one profile directory.

    A Store instance is cheap to create; each OS process (or thread that
    wants its own transactions) should open its own.
    """

    def __init__(
        self,
        path: str | Path,
        tc_mode: str = "table",
        hash_policy: Optional[dict] = None,
        doc_limit: int = DOC_LIMIT,
    ):
        if tc_mode not in ("otf", "table"):
            raise StoreError(f"unknown tc_mode {tc_mode!r}")
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.repo_dir = self.path / "repo"
        self.repo_dir.mkdir(exist_ok=True)
        self.tc_mode = tc_mode
        self.hash_policy = hash_policy
        self.doc_limit = doc_limit
        self._txn_depth = 0
        self._lock = threading.RLock()

        self.db = sqlite3.connect(
            self.path / "graph.db",
            isolation_level=None,  # explicit BEGIN, no implicit txns
            check_same_thread=False,
            timeout=60.0,
        )
        self.db.row_factory = sqlite3.Row
        self.db.execute("PRAGMA journal_mode=WAL")
        self.db.execute("PRAGMA synchronous=NORMAL")
        self.db.execute("PRAGMA busy_timeout=60000")
        self.db.execute("PRAGMA foreign_keys=ON")
        # executescript force-commits any open transaction, so the schema
        # runs in autocommit mode; every statement is idempotent.
        self.db.executescript(_SCHEMA)
        self.db.execute(
            "INSERT OR IGNORE INTO meta(key, value) VALUES ('schema_version', ?)",
            (str(SCHEMA_VERSION),),
        )

    def close(self) -> None:
        self.db.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- transactions --------------------------------------------------

    @contextmanager
    def transaction(self, immediate: bool = True):
        """Run the block atomically; nesting joins the outer transaction."""
        with self._lock:
            if self._txn_depth:
                self._txn_depth += 1
                try:
                    yield
                finally:
                    self._txn_depth -= 1
                return
            try:
                self.db.execute("BEGIN IMMEDIATE" if immediate else "BEGIN")
            except sqlite3.OperationalError as exc:
                raise StoreError(f"could not begin transaction: {exc}") from exc
            self._txn_depth = 1
            try:
                yield
            except BaseException:
                self.db.execute("ROLLBACK")
                raise
            finally:
                self._txn_depth = 0
            self.db.execute("COMMIT")

    # -- repository blobs ----------------------------------------------

    def _blob_path(self, key: str) -> Path:
        return self.repo_dir / key[:2] / key[2:4] / key

    def write_blob(self, content: bytes) -> str:
        """Store content under its sha256; idempotent."""
        key = sha256_hex(content)
        final = self._blob_path(key)
        if final.exists():
            return key
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.with_name(final.name + "." + _uuid.uuid4().hex)
        tmp.write_bytes(content)
        os.replace(tmp, final)
        return key

    def read_blob(self, key: str) -> bytes:
        try:
            return self._blob_path(key).read_bytes()
        except FileNotFoundError:
            raise StoreError(f"missing repository blob {key}")

    # -- nodes -----------------------------------------------------------

    def store_node(self, node: Node, incoming: Sequence = ()) -> Node:
        """Persist a node and, atomically with it, its incoming links.

        ``incoming`` items are Link objects targeting the node, or
        ``(source_uuid, link_type, label)`` triples. The content hash is
        computed here, after the repository files are final, so it can
        include input hashes for calculation nodes.
        """
        if node.stored:
            raise AlreadyStoredError(f"node {node.uuid} is already stored")
        self._check_doc(node.attributes, "attributes")
        self._check_doc(node.extras, "extras")

        links = []
        for item in incoming:
            if isinstance(item, Link):
                link = item
            else:
                source, ltype, label = item
                link = Link(source, node.uuid, ltype, label)
            if link.target != node.uuid:
                raise StoreError("incoming link does not target the node being stored")
            links.append(link)

        manifest = {path: self.write_blob(content) for path, content in node.repo.items()}
        now = time.time()

        with self.transaction():
            if self.kind_of(node.uuid) is not None:
                raise AlreadyStoredError(f"uuid {node.uuid} already present")
            input_hashes = []
            for link in links:
                if link.type == LinkType.INPUT_CALC:
                    row = self.db.execute(
                        "SELECT hash FROM nodes WHERE uuid=?", (link.source,)
                    ).fetchone()
                    if row is not None and row["hash"]:
                        input_hashes.append((link.label, row["hash"]))
            node.hash = compute_node_hash(
                node.kind, node.attributes, manifest, input_hashes, self.hash_policy
            )
            cursor = self.db.execute(
                "INSERT INTO nodes (uuid, kind, label, description, ctime, mtime,"
                " computer, attributes, extras, repo, hash)"
                " VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (
                    node.uuid,
                    node.kind,
                    node.label,
                    node.description,
                    now,
                    now,
                    node.computer,
                    canonical_json(node.attributes),
                    canonical_json(node.extras),
                    canonical_json(manifest),
                    node.hash,
                ),
            )
            node.id = cursor.lastrowid
            for link in links:
                self.insert_link(link)

        node.ctime = node.mtime = now
        node.repo_keys = manifest
        node.stored = True
        return node

    def duplicate_node(self, uuid: str) -> Node:
        """Copy a stored node's frozen content under a fresh uuid.

        Attributes, repository manifest and hash carry over; extras start
        empty and timestamps are new. Links are not copied.
        """
        row = self.db.execute(
            f"SELECT {_NODE_COLUMNS} FROM nodes WHERE uuid=?", (uuid,)
        ).fetchone()
        if row is None:
            raise NodeNotFoundError(uuid)
        now = time.time()
        fresh = _uuid.uuid4()
        with self.transaction():
            cursor = self.db.execute(
                "INSERT INTO nodes (uuid, kind, label, description, ctime, mtime,"
                " computer, attributes, extras, repo, hash)"
                " VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                (
                    str(fresh),
                    row["kind"],
                    row["label"],
                    row["description"],
                    now,
                    now,
                    row["computer"],
                    row["attributes"],
                    canonical_json({}),
                    row["repo"],
                    row["hash"],
                ),
            )
            node_id = cursor.lastrowid
        return self.get(node_id)

    def _check_doc(self, doc: dict, what: str) -> None:
        validate_document(doc, what)
        encoded = canonical_json(doc)
        if len(encoded.encode("utf-8")) > self.doc_limit:
            raise InvalidValueError(f"{what} document exceeds {self.doc_limit} bytes")

    def _row_to_node(self, row: sqlite3.Row) -> Node:
        node = Node(
            kind=row["kind"],
            uuid=row["uuid"],
            id=row["id"],
            label=row["label"],
            description=row["description"],
            ctime=row["ctime"],
            mtime=row["mtime"],
            computer=row["computer"],
            attributes=json.loads(row["attributes"]),
            extras=json.loads(row["extras"]),
            repo_keys=json.loads(row["repo"]),
            hash=row["hash"],
        )
        node.stored = True
        return node

    def get(self, ref) -> Node:
        """Fetch by uuid (str) or numeric id (int)."""
        if isinstance(ref, int):
            row = self.db.execute(
                f"SELECT {_NODE_COLUMNS} FROM nodes WHERE id=?", (ref,)
            ).fetchone()
        else:
            row = self.db.execute(
                f"SELECT {_NODE_COLUMNS} FROM nodes WHERE uuid=?", (ref,)
            ).fetchone()
        if row is None:
            raise NodeNotFoundError(str(ref))
        return self._row_to_node(row)

    def has(self, uuid: str) -> bool:
        return self.kind_of(uuid) is not None

    def count_nodes(self) -> int:
        return self.db.execute("SELECT COUNT(*) FROM nodes").fetchone()[0]

    def count_links(self) -> int:
        return self.db.execute("SELECT COUNT(*) FROM links").fetchone()[0]

    def node_records(self, kind_prefix: Optional[str] = None) -> list[dict]:
        """Raw rows (attributes/extras parsed) for query evaluation."""
        sql = f"SELECT {_NODE_COLUMNS} FROM nodes"
        args: tuple = ()
        if kind_prefix:
            sql += " WHERE kind = ? OR kind LIKE ?"
            args = (kind_prefix, kind_prefix + ".%")
        sql += " ORDER BY id"
        return [_parse_record(row) for row in self.db.execute(sql, args)]

    def node_record(self, uuid: str) -> dict:
        """Parsed row for a single node; raises when the uuid is unknown."""
        row = self.db.execute(
            f"SELECT {_NODE_COLUMNS} FROM nodes WHERE uuid=?", (uuid,)
        ).fetchone()
        if row is None:
            raise NodeNotFoundError(uuid)
        return _parse_record(row)

    # -- graph view (shared with the link validator) -------------------

    def kind_of(self, uuid: str) -> Optional[str]:
        row = self.db.execute("SELECT kind FROM nodes WHERE uuid=?", (uuid,)).fetchone()
        return None if row is None else row["kind"]

    @staticmethod
    def _links_sql(column: str, types) -> tuple[str, list]:
        sql = f"SELECT source, target, type, label FROM links WHERE {column}=?"
        args: list = []
        if types is not None:
            wanted = [LinkType(t).value for t in types]
            if not wanted:
                return sql + " AND 1=0", args
            sql += f" AND type IN ({','.join('?' * len(wanted))})"
            args = wanted
        return sql + " ORDER BY id", args

    def links_from(self, uuid: str, types=None) -> list[Link]:
        sql, args = self._links_sql("source", types)
        rows = self.db.execute(sql, [uuid] + args)
        return [Link(r["source"], r["target"], r["type"], r["label"]) for r in rows]

    def links_to(self, uuid: str, types=None) -> list[Link]:
        sql, args = self._links_sql("target", types)
        rows = self.db.execute(sql, [uuid] + args)
        return [Link(r["source"], r["target"], r["type"], r["label"]) for r in rows]

    def all_links(self) -> list[Link]:
        rows = self.db.execute(
            "SELECT source, target, type, label FROM links ORDER BY id"
        )
        return [Link(r["source"], r["target"], r["type"], r["label"]) for r in rows]

    # -- links ----------------------------------------------------------

    def insert_link(self, link: Link) -> None:
        """Validate and insert one link atomically.

        In table mode the reachability index is extended in the same
        transaction: new pairs are (ancestors(s) + s) x (descendants(t)
        + t) at depth d_a + 1 + d_d, keeping the per-pair minimum.
        """
        with self.transaction():
            violation = validate_link(self, link)
            if violation is not None:
                raise LinkViolationError(violation.rule, violation.message)
            self.db.execute(
                "INSERT INTO links (source, target, type, label) VALUES (?,?,?,?)",
                (link.source, link.target, link.type.value, link.label),
            )
            if self.tc_mode == "table" and link.type in DATA_PROVENANCE_TYPES:
                self._tc_extend(link.source, link.target)

    def _tc_extend(self, source: str, target: str) -> None:
        self.db.execute(
            """
            INSERT INTO tc (ancestor, descendant, depth)
            SELECT a.n, d.n, a.d + 1 + d.d
            FROM (SELECT ancestor AS n, depth AS d FROM tc WHERE descendant = :s
                  UNION ALL SELECT :s, 0) AS a,
                 (SELECT descendant AS n, depth AS d FROM tc WHERE ancestor = :t
                  UNION ALL SELECT :t, 0) AS d
            WHERE true
            ON CONFLICT (ancestor, descendant)
            DO UPDATE SET depth = excluded.depth WHERE excluded.depth < depth
            """,
            {"s": source, "t": target},
        )

    def rebuild_tc(self) -> int:
        """Drop and recompute the reachability index; returns row count."""
        edges: dict[str, list[str]] = {}
        for link in self.all_links():
            if link.type in DATA_PROVENANCE_TYPES:
                edges.setdefault(link.source, []).append(link.target)
        with self.transaction():
            self.db.execute("DELETE FROM tc")
            rows = 0
            for start in list(edges):
                depth = {start: 0}
                frontier = [start]
                while frontier:
                    nxt = []
                    for node in frontier:
                        for child in edges.get(node, ()):
                            if child not in depth:
                                depth[child] = depth[node] + 1
                                nxt.append(child)
                    frontier = nxt
                depth.pop(start)
                for desc, d in depth.items():
                    self.db.execute(
                        "INSERT INTO tc (ancestor, descendant, depth) VALUES (?,?,?)",
                        (start, desc, d),
                    )
                    rows += 1
        return rows

    def tc_descendants(self, uuid: str) -> dict[str, int]:
        rows = self.db.execute(
            "SELECT descendant, depth FROM tc WHERE ancestor=?", (uuid,)
        )
        return {r["descendant"]: r["depth"] for r in rows}

    def tc_ancestors(self, uuid: str) -> dict[str, int]:
        rows = self.db.execute(
            "SELECT ancestor, depth FROM tc WHERE descendant=?", (uuid,)
        )
        return {r["ancestor"]: r["depth"] for r in rows}

    def tc_count(self) -> int:
        return self.db.execute("SELECT COUNT(*) FROM tc").fetchone()[0]

    # -- extras (the one mutable document) ------------------------------

    def set_extra(self, uuid: str, dotted: str, value) -> None:
        if dotted.split(".")[0] == "attributes":
            raise ImmutableError("extras key 'attributes' is reserved")
        validate_value(value, dotted)
        with self.transaction():
            extras = self._extras_for_update(uuid)
            set_path(extras, dotted, value)
            self._write_extras(uuid, extras)

    def delete_extra(self, uuid: str, dotted: str) -> bool:
        with self.transaction():
            extras = self._extras_for_update(uuid)
            if not delete_path(extras, dotted):
                return False
            self._write_extras(uuid, extras)
            return True

    def get_extras(self, uuid: str) -> dict:
        row = self.db.execute("SELECT extras FROM nodes WHERE uuid=?", (uuid,)).fetchone()
        if row is None:
            raise NodeNotFoundError(uuid)
        return json.loads(row["extras"])

    def get_attributes(self, uuid: str) -> dict:
        row = self.db.execute(
            "SELECT attributes FROM nodes WHERE uuid=?", (uuid,)
        ).fetchone()
        if row is None:
            raise NodeNotFoundError(uuid)
        return json.loads(row["attributes"])

    def _extras_for_update(self, uuid: str) -> dict:
        row = self.db.execute("SELECT extras FROM nodes WHERE uuid=?", (uuid,)).fetchone()
        if row is None:
            raise NodeNotFoundError(uuid)
        return json.loads(row["extras"])

    def _write_extras(self, uuid: str, extras: dict) -> None:
        self._check_doc(extras, "extras")
        self.db.execute(
            "UPDATE nodes SET extras=?, mtime=? WHERE uuid=?",
            (canonical_json(extras), time.time(), uuid),
        )

    # -- repository access ----------------------------------------------

    def repo_list(self, uuid: str) -> list[str]:
        return sorted(self._repo_manifest(uuid))

    def repo_get(self, uuid: str, path: str) -> bytes:
        manifest = self._repo_manifest(uuid)
        if path not in manifest:
            raise StoreError(f"node {uuid} has no repository file {path!r}")
        return self.read_blob(manifest[path])

    def _repo_manifest(self, uuid: str) -> dict[str, str]:
        row = self.db.execute("SELECT repo FROM nodes WHERE uuid=?", (uuid,)).fetchone()
        if row is None:
            raise NodeNotFoundError(uuid)
        return json.loads(row["repo"])

    # -- checkpoints -----------------------------------------------------

    def save_checkpoint(self, process_uuid: str, payload: bytes) -> int:
        """Last writer wins; returns the new version number."""
        with self.transaction():
            row = self.db.execute(
                "SELECT version FROM checkpoints WHERE process_uuid=?", (process_uuid,)
            ).fetchone()
            version = 1 if row is None else row["version"] + 1
            self.db.execute(
                "INSERT INTO checkpoints (process_uuid, version, payload, mtime)"
                " VALUES (?,?,?,?)"
                " ON CONFLICT (process_uuid)"
                " DO UPDATE SET version=excluded.version, payload=excluded.payload,"
                " mtime=excluded.mtime",
                (process_uuid, version, payload, time.time()),
            )
        return version

    def load_checkpoint(self, process_uuid: str) -> tuple[int, bytes]:
        row = self.db.execute(
            "SELECT version, payload FROM checkpoints WHERE process_uuid=?",
            (process_uuid,),
        ).fetchone()
        if row is None:
            raise CheckpointNotFoundError(process_uuid)
        return row["version"], bytes(row["payload"])

    def delete_checkpoint(self, process_uuid: str) -> None:
        self.db.execute("DELETE FROM checkpoints WHERE process_uuid=?", (process_uuid,))

    # -- execution audit --------------------------------------------------

    def record_execution(self, kind: str, ref: str) -> None:
        self.db.execute(
            "INSERT INTO exec_log (kind, ref, time) VALUES (?,?,?)",
            (kind, ref, time.time()),
        )

    def execution_count(self, kind: Optional[str] = None) -> int:
        if kind is None:
            return self.db.execute("SELECT COUNT(*) FROM exec_log").fetchone()[0]
        return self.db.execute(
            "SELECT COUNT(*) FROM exec_log WHERE kind=?", (kind,)
        ).fetchone()[0]


def _parse_record(row: sqlite3.Row) -> dict:
    rec = dict(row)
    rec["attributes"] = json.loads(rec["attributes"])
    rec["extras"] = json.loads(rec["extras"])
    rec["repo"] = json.loads(rec["repo"])
    return rec


def iter_links(store_or_graph) -> Iterable[Link]:
    """Uniform link iteration over a Store or an in-memory graph."""
    if hasattr(store_or_graph, "all_links"):
        return store_or_graph.all_links()
    return list(store_or_graph.links)
