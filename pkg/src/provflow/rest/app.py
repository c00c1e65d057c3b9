"""HTTP facade over one profile.

Read endpoints expose nodes, their properties, links and repository
files; filters in the query string compile to the same FilterExpr
objects the query module uses, so HTTP results match library results
by construction. The process-action POST and the daemon status
endpoint go beyond read-only browsing (they steer the engine) and can
be switched off wholesale with ``read_only=True``.

Every request opens its own store handle: SQLite in WAL mode gives
each one a consistent snapshot, and handles are cheap.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from provflow.engine import daemon as daemon_mod
from provflow.engine import client as engine_client
from provflow.engine import queue as taskq
from provflow.exceptions import (
    DaemonNotRunning,
    NodeNotFoundError,
    RpcRejected,
    RpcUnreachable,
    StoreError,
)
from provflow.query.plan import evaluate, resolve_path
from provflow.rest import models
from provflow.rest.filters import FilterSyntaxError, UnknownFilterPath, parse_filters
from provflow.rest.report import build_report
from provflow.store import Store

DEFAULT_PORT = 5000
MAX_LIMIT = 400
DEFAULT_LIMIT = 20

API = "/api/v1"


def create_app(profile, cors_origins=None, read_only: bool = False) -> FastAPI:
    app = FastAPI(title="provflow", version="1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins) if cors_origins else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def dep_store():
        store = Store(profile)
        try:
            yield store
        finally:
            store.close()

    def record_or_404(store: Store, uuid: str) -> dict:
        try:
            return store.node_record(uuid)
        except NodeNotFoundError:
            raise HTTPException(404, f"no node with uuid {uuid}")

    def process_record_or_404(store: Store, uuid: str) -> dict:
        rec = record_or_404(store, uuid)
        if not rec["kind"].startswith("process"):
            raise HTTPException(404, f"{uuid} is not a process node")
        return rec

    @app.get(API + "/nodes", response_model=models.Page)
    def list_nodes(
        filters: str = Query(""),
        limit: int = Query(DEFAULT_LIMIT, ge=1),
        offset: int = Query(0, ge=0),
        store: Store = Depends(dep_store),
    ):
        try:
            exprs = parse_filters(filters)
        except UnknownFilterPath as exc:
            raise HTTPException(422, str(exc))
        except FilterSyntaxError as exc:
            raise HTTPException(400, str(exc))
        limit = min(limit, MAX_LIMIT)
        matched = [
            rec
            for rec in store.node_records()
            if all(evaluate(f.op, resolve_path(rec, f.path), f.value) for f in exprs)
        ]
        total = len(matched)
        window = matched[offset : offset + limit]
        return models.Page(
            items=[models.NodeSummary.from_record(r) for r in window],
            total=total,
            limit=limit,
            offset=offset,
            next=offset + limit if offset + limit < total else None,
            prev=max(offset - limit, 0) if offset > 0 else None,
        )

    @app.get(API + "/nodes/{uuid}", response_model=models.NodeDetail)
    def get_node(uuid: str, store: Store = Depends(dep_store)):
        return models.NodeDetail.from_record(record_or_404(store, uuid))

    @app.get(API + "/nodes/{uuid}/attributes")
    def get_attributes(uuid: str, store: Store = Depends(dep_store)):
        return record_or_404(store, uuid)["attributes"]

    @app.get(API + "/nodes/{uuid}/extras")
    def get_extras(uuid: str, store: Store = Depends(dep_store)):
        return record_or_404(store, uuid)["extras"]

    def link_listing(store, uuid, links, peer_of):
        out = []
        for link in links:
            peer = store.node_record(peer_of(link))
            out.append(
                models.LinkInfo(
                    type=link.type.value,
                    label=link.label,
                    peer=models.NodeSummary.from_record(peer),
                )
            )
        return out

    @app.get(API + "/nodes/{uuid}/links/incoming", response_model=list[models.LinkInfo])
    def links_incoming(uuid: str, store: Store = Depends(dep_store)):
        record_or_404(store, uuid)
        return link_listing(store, uuid, store.links_to(uuid), lambda l: l.source)

    @app.get(API + "/nodes/{uuid}/links/outgoing", response_model=list[models.LinkInfo])
    def links_outgoing(uuid: str, store: Store = Depends(dep_store)):
        record_or_404(store, uuid)
        return link_listing(store, uuid, store.links_from(uuid), lambda l: l.target)

    @app.get(API + "/nodes/{uuid}/repo/list", response_model=list[str])
    def repo_list(uuid: str, store: Store = Depends(dep_store)):
        record_or_404(store, uuid)
        return store.repo_list(uuid)

    @app.get(API + "/nodes/{uuid}/repo/contents")
    def repo_contents(uuid: str, path: str = Query(...), store: Store = Depends(dep_store)):
        record_or_404(store, uuid)
        try:
            content = store.repo_get(uuid, path)
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        return Response(content=content, media_type="application/octet-stream")

    @app.get(API + "/processes/{uuid}/report", response_model=models.ProcessReport)
    def process_report(uuid: str, store: Store = Depends(dep_store)):
        process_record_or_404(store, uuid)
        return build_report(store, uuid)

    @app.post(API + "/processes/{uuid}/action", response_model=models.ActionResult)
    def process_action(
        uuid: str, body: models.ActionRequest, store: Store = Depends(dep_store)
    ):
        if read_only:
            raise HTTPException(403, "service is running in read-only mode")
        process_record_or_404(store, uuid)
        try:
            state = engine_client.action(store, uuid, body.action, reason=body.reason)
        except NodeNotFoundError:
            raise HTTPException(404, f"no node with uuid {uuid}")
        except RpcRejected as exc:
            raise HTTPException(409, str(exc))
        except (RpcUnreachable, DaemonNotRunning) as exc:
            raise HTTPException(503, str(exc))
        return models.ActionResult(uuid=uuid, action=body.action, state=state)

    @app.get(API + "/daemon/status", response_model=models.DaemonStatus)
    def daemon_status(store: Store = Depends(dep_store)):
        try:
            reply = daemon_mod.daemon_status(profile)
        except DaemonNotRunning:
            return models.DaemonStatus(
                running=False, queue=taskq.queue_stats(store)
            )
        return models.DaemonStatus(
            running=True,
            pid=reply.get("pid"),
            target=reply.get("target"),
            mode=reply.get("mode"),
            workers=[models.WorkerInfo(**w) for w in reply.get("workers", [])],
            queue=reply.get("queue", {}),
        )

    return app


def serve(profile, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
          cors_origins=None, read_only: bool = False) -> None:
    """Run the service under uvicorn; blocks until interrupted."""
    import uvicorn

    uvicorn.run(
        create_app(profile, cors_origins=cors_origins, read_only=read_only),
        host=host,
        port=port,
        log_level="warning",
    )
