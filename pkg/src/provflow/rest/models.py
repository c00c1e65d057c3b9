"""Response and request bodies for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from provflow import states


class NodeSummary(BaseModel):
    id: int
    uuid: str
    kind: str
    label: str = ""
    description: str = ""
    ctime: float
    mtime: float
    computer: Optional[str] = None
    hash: Optional[str] = None
    # process nodes carry their lifecycle state; plain data nodes do not
    state: Optional[str] = None

    @classmethod
    def from_record(cls, rec: dict) -> "NodeSummary":
        state = None
        if rec["kind"].startswith("process"):
            state = rec["extras"].get(states.K_STATE, states.CREATED)
        return cls(
            id=rec["id"],
            uuid=rec["uuid"],
            kind=rec["kind"],
            label=rec["label"],
            description=rec["description"],
            ctime=rec["ctime"],
            mtime=rec["mtime"],
            computer=rec["computer"],
            hash=rec["hash"],
            state=state,
        )


class NodeDetail(NodeSummary):
    attributes: dict = Field(default_factory=dict)
    extras: dict = Field(default_factory=dict)
    repo: list[str] = Field(default_factory=list)

    @classmethod
    def from_record(cls, rec: dict) -> "NodeDetail":
        base = NodeSummary.from_record(rec)
        return cls(
            **base.model_dump(),
            attributes=rec["attributes"],
            extras=rec["extras"],
            repo=sorted(rec["repo"]),
        )


class Page(BaseModel):
    items: list[NodeSummary]
    total: int
    limit: int
    offset: int
    # offsets of the neighbouring pages, None at either end
    next: Optional[int] = None
    prev: Optional[int] = None


class LinkInfo(BaseModel):
    type: str
    label: str
    peer: NodeSummary


class RetryRecord(BaseModel):
    attempt: int
    delay: float
    error: str
    time: float


class StateChange(BaseModel):
    # None on the birth event
    old: Optional[str] = None
    new: str
    exit_code: Optional[int] = None
    time: float


class StepRecord(BaseModel):
    step: str
    worker_id: str
    time: float


class ProcessReport(BaseModel):
    uuid: str
    kind: str
    state: str
    exit_code: Optional[int] = None
    exception: Optional[str] = None
    pause_reason: Optional[str] = None
    retries: int = 0
    retry_log: list[RetryRecord] = Field(default_factory=list)
    history: list[StateChange] = Field(default_factory=list)
    steps: list[StepRecord] = Field(default_factory=list)
    checkpoint_version: Optional[int] = None


class ActionRequest(BaseModel):
    action: Literal["pause", "play", "kill"]
    reason: Optional[str] = None


class ActionResult(BaseModel):
    uuid: str
    action: str
    state: str


class WorkerInfo(BaseModel):
    worker_id: str
    pid: int
    started: float
    last_heartbeat: float
    heartbeat_age: float


class DaemonStatus(BaseModel):
    running: bool
    pid: Optional[int] = None
    target: Optional[int] = None
    mode: Optional[str] = None
    workers: list[WorkerInfo] = Field(default_factory=list)
    queue: dict = Field(default_factory=dict)
