"""Export a graph to a portable zip and read it back.

The archive is deterministic: a fixed manifest layout (nodes sorted by
uuid, links sorted by their full tuple), fixed zip entry timestamps and
entry order, so two exports of equal graphs are byte-identical and the
file can be checksummed or diffed.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

from provflow.exceptions import ArchiveError, LinkViolationError
from provflow.graph.links import Link
from provflow.graph.values import canonical_json
from provflow.store.store import Store

FORMAT_VERSION = 1

_EPOCH = (2020, 1, 1, 0, 0, 0)  # fixed zip timestamps


def export_archive(store: Store, path: str | Path) -> Path:
    path = Path(path)
    records = store.node_records()
    records.sort(key=lambda r: r["uuid"])
    nodes = []
    blob_keys = set()
    for rec in records:
        blob_keys.update(rec["repo"].values())
        nodes.append(
            {
                "uuid": rec["uuid"],
                "kind": rec["kind"],
                "label": rec["label"],
                "description": rec["description"],
                "ctime": rec["ctime"],
                "mtime": rec["mtime"],
                "computer": rec["computer"],
                "attributes": rec["attributes"],
                "extras": rec["extras"],
                "repo": rec["repo"],
                "hash": rec["hash"],
            }
        )
    links = sorted(
        [l.source, l.target, l.type.value, l.label] for l in store.all_links()
    )
    manifest = {"format": FORMAT_VERSION, "nodes": nodes, "links": links}

    with zipfile.ZipFile(path, "w") as zf:
        _write(zf, "manifest.json", canonical_json(manifest).encode("utf-8"))
        for key in sorted(blob_keys):
            _write(zf, f"repo/{key}", store.read_blob(key))
    return path


def _write(zf: zipfile.ZipFile, name: str, content: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, content, compresslevel=6)


def import_archive(store: Store, path: str | Path) -> dict:
    """Load an archive into the store.

    Nodes whose uuid already exists are skipped (their links too), which
    makes importing the same archive twice a no-op. Returns counts of
    what was added.
    """
    path = Path(path)
    try:
        zf = zipfile.ZipFile(path)
    except (FileNotFoundError, zipfile.BadZipFile) as exc:
        raise ArchiveError(f"cannot open archive {path}: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise ArchiveError("archive has no manifest.json")
        if manifest.get("format") != FORMAT_VERSION:
            raise ArchiveError(f"unsupported archive format {manifest.get('format')!r}")

        blobs = {}
        for name in zf.namelist():
            if name.startswith("repo/"):
                blobs[name[len("repo/"):]] = zf.read(name)

        added_nodes = 0
        added_links = 0
        with store.transaction():
            skip = set()
            for rec in manifest["nodes"]:
                if store.has(rec["uuid"]):
                    skip.add(rec["uuid"])
                    continue
                manifest_repo = rec["repo"]
                for key in manifest_repo.values():
                    if key not in blobs:
                        raise ArchiveError(f"archive is missing repository blob {key}")
                    store.write_blob(blobs[key])
                store.db.execute(
                    "INSERT INTO nodes (uuid, kind, label, description, ctime,"
                    " mtime, computer, attributes, extras, repo, hash)"
                    " VALUES (?,?,?,?,?,?,?,?,?,?,?)",
                    (
                        rec["uuid"],
                        rec["kind"],
                        rec["label"],
                        rec["description"],
                        rec["ctime"],
                        rec["mtime"],
                        rec["computer"],
                        canonical_json(rec["attributes"]),
                        canonical_json(rec["extras"]),
                        canonical_json(manifest_repo),
                        rec["hash"],
                    ),
                )
                added_nodes += 1
            for source, target, ltype, label in manifest["links"]:
                if source in skip or target in skip:
                    continue
                try:
                    store.insert_link(Link(source, target, ltype, label))
                except LinkViolationError as exc:
                    if exc.rule == "duplicate-link":
                        continue
                    raise ArchiveError(f"archive link rejected: {exc}") from exc
                added_links += 1
        return {"nodes": added_nodes, "links": added_links}
