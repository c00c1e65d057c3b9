"""Calculations that run as scheduler jobs on a registered computer.

A job moves through fixed stages: upload the input files, submit the
script, poll until the scheduler reports it finished, retrieve the
requested files, parse them into outputs. Each stage does its external
work first and only then commits the stage transition, so a crash
between the two repeats the external step (harmless: uploads overwrite,
a duplicate scheduler submission orphans the older job) but never skips
or doubles a graph effect.

Transient faults during a stage are retried with exponential backoff;
when the retry budget runs out the process pauses instead of failing,
so an operator can fix the machine and resume it.
"""

from __future__ import annotations

import json
import posixpath
import time
import traceback

from provflow import states
from provflow.engine.backoff import PAUSE_REASON_MAX_RETRIES, with_backoff
from provflow.exceptions import (
    CheckpointNotFoundError,
    MaxRetriesExceeded,
    OwnershipLostError,
    SpecValidationError,
)
from provflow.graph.links import LinkType
from provflow.graph.nodes import Node
from .computers import get_computer
from .registry import get_process
from .scheduler import LIVE_STATES, SimulatedScheduler, StatusCache
from .transport import TransportPool
from .workchain import (
    CHECKPOINT_FORMAT,
    Continue,
    Done,
    Paused,
    Wait,
    decode_checkpoint,
    encode_checkpoint,
    log_step,
)

# files staged for the job but not meant for the working directory
METADATA_FILES = ("source.py",)

STAGES = ("upload", "submit", "update", "retrieve", "parse")


class CalcJob:
    """Base class for scheduler-backed calculations.

    Subclasses set a class-level ``id``, the files to bring back in
    ``retrieve``, implement ``define(spec)`` for the ports, write the
    working directory in ``prepare`` and read the retrieved files in
    ``parse``.
    """

    _is_calcjob = True
    id = None
    computer = "localhost"  # default computer name; submit may override
    script_name = "job.sh"
    retrieve: tuple = ()

    @classmethod
    def define(cls, spec):
        raise NotImplementedError

    def prepare(self, inputs: dict) -> dict:
        """Files to upload, path -> bytes; must include the script."""
        raise NotImplementedError

    def parse(self, retrieved: dict) -> tuple:
        """(exit code, outputs) from the retrieved file contents."""
        raise NotImplementedError


class CalcJobDriver:
    """Advances one stored job process through its stages."""

    def __init__(self, store, node, runtime, worker_id: str = "inline"):
        self.store = store
        self.node = node
        self.runtime = runtime
        self.worker_id = worker_id
        self.defn = get_process(node.attributes["process_id"])
        if not (isinstance(self.defn.target, type) and issubclass(self.defn.target, CalcJob)):
            raise SpecValidationError(f"{self.defn.id!r} is not a job class")
        if not node.computer:
            raise SpecValidationError(f"job {node.uuid} has no computer")
        self.computer = get_computer(store, node.computer)
        self.scheduler = SimulatedScheduler(store, self.computer)
        self.status = StatusCache(self.scheduler)
        self.pool = TransportPool(owner=worker_id, sleep=runtime.sleep)
        self.workdir = posixpath.join(self.computer.workdir, node.uuid)
        self.stage = "upload"
        self.job_id = None
        self._restore()

    def _restore(self):
        try:
            _, payload = self.store.load_checkpoint(self.node.uuid)
        except CheckpointNotFoundError:
            return
        doc = decode_checkpoint(payload)
        self.stage = doc.get("stage", "upload")
        self.job_id = doc.get("job_id")

    def _save(self, stage: str):
        self.stage = stage
        doc = {
            "format": CHECKPOINT_FORMAT,
            "flavor": "calcjob",
            "process_id": self.defn.id,
            "stage": stage,
        }
        if self.job_id is not None:
            doc["job_id"] = self.job_id
        self.store.save_checkpoint(self.node.uuid, encode_checkpoint(doc))

    def _retry(self, operation):
        def bump(failures, delay, exc):
            with self.store.transaction():
                count = self.store.get_extras(self.node.uuid).get(states.K_RETRIES, 0)
                self.store.set_extra(self.node.uuid, states.K_RETRIES, count + 1)
                self.store.db.execute(
                    "INSERT INTO events (process_uuid, kind, payload, time) "
                    "VALUES (?,?,?,?)",
                    (
                        self.node.uuid,
                        "retry",
                        json.dumps(
                            {"attempt": failures, "delay": delay, "error": str(exc)},
                            sort_keys=True,
                        ),
                        time.time(),
                    ),
                )

        return with_backoff(
            operation, self.runtime.backoff, sleep=self.runtime.sleep, on_retry=bump
        )

    def tick(self):
        state = states.state_of(self.store, self.node.uuid)
        if states.is_terminal(state):
            return Done(state, states.exit_code_of(self.store, self.node.uuid))
        if state == states.PAUSED:
            reason = self.store.get_extras(self.node.uuid).get(
                states.K_PAUSE_REASON, ""
            )
            return Paused(reason)
        try:
            return getattr(self, "_stage_" + self.stage)(state)
        except OwnershipLostError:
            raise
        except MaxRetriesExceeded:
            with self.store.transaction():
                self.runtime.guard(self.store, self.node.uuid)
                states.record_state(
                    self.store,
                    self.node.uuid,
                    states.PAUSED,
                    pause_reason=PAUSE_REASON_MAX_RETRIES,
                )
            return Paused(PAUSE_REASON_MAX_RETRIES)
        except Exception as exc:
            message = "".join(
                traceback.format_exception_only(type(exc), exc)
            ).strip()
            with self.store.transaction():
                self.runtime.guard(self.store, self.node.uuid)
                states.record_state(
                    self.store, self.node.uuid, states.EXCEPTED, exception=message
                )
            return Done(states.EXCEPTED)

    # -- stages

    def _stage_upload(self, state):
        uuid = self.node.uuid
        paths = [p for p in self.store.repo_list(uuid) if p not in METADATA_FILES]
        with self.pool.open(self.store, self.computer) as transport:
            def op():
                transport.makedirs(self.workdir)
                for path in paths:
                    transport.put(
                        posixpath.join(self.workdir, path),
                        self.store.repo_get(uuid, path),
                    )

            self._retry(op)
        with self.store.transaction():
            self.runtime.guard(self.store, uuid)
            if state == states.CREATED:
                states.record_state(self.store, uuid, states.RUNNING)
            self._save("submit")
            log_step(self.store, uuid, "upload", self.worker_id)
        return Continue()

    def _stage_submit(self, state):
        script = self.node.attributes.get("script", CalcJob.script_name)
        self.job_id = self._retry(lambda: self.scheduler.submit(self.workdir, script))
        with self.store.transaction():
            self.runtime.guard(self.store, self.node.uuid)
            self._save("update")
            log_step(self.store, self.node.uuid, "submit", self.worker_id)
            states.record_state(self.store, self.node.uuid, states.WAITING)
        return Continue()

    def _stage_update(self, state):
        info = self._retry(lambda: self.status.get(self.job_id))
        if info is None:
            raise SpecValidationError(
                f"scheduler lost track of job {self.job_id}"
            )
        if info.state in LIVE_STATES:
            return Wait(self.computer.poll_interval)
        with self.store.transaction():
            self.runtime.guard(self.store, self.node.uuid)
            states.record_state(self.store, self.node.uuid, states.RUNNING)
            self._save("retrieve")
            log_step(self.store, self.node.uuid, "update", self.worker_id)
        return Continue()

    def _stage_retrieve(self, state):
        uuid = self.node.uuid
        wanted = list(self.node.attributes.get("retrieve", ()))
        files = {}
        with self.pool.open(self.store, self.computer) as transport:
            def op():
                files.clear()
                for name in wanted:
                    path = posixpath.join(self.workdir, name)
                    if transport.exists(path):
                        files[name] = transport.get(path)

            self._retry(op)
        with self.store.transaction():
            self.runtime.guard(self.store, uuid)
            folder = Node(kind="data.folder", label="retrieved")
            for name, content in files.items():
                folder.put_file(name, content)
            self.store.store_node(
                folder, incoming=[(uuid, LinkType.CREATE, "retrieved")]
            )
            self._save("parse")
            log_step(self.store, uuid, "retrieve", self.worker_id)
        return Continue()

    def _stage_parse(self, state):
        uuid = self.node.uuid
        folder_uuid = None
        for link in self.store.links_from(uuid, types=(LinkType.CREATE,)):
            if link.label == "retrieved":
                folder_uuid = link.target
        if folder_uuid is None:
            raise SpecValidationError("job has no retrieved folder to parse")
        retrieved = {
            path: self.store.repo_get(folder_uuid, path)
            for path in self.store.repo_list(folder_uuid)
        }
        job = self.defn.target()
        result = job.parse(retrieved)
        if isinstance(result, int):
            exit_code, outputs = result, {}
        else:
            exit_code, outputs = result
        with self.store.transaction():
            self.runtime.guard(self.store, uuid)
            for name, value in outputs.items():
                self.defn.spec.check_output(name, value)
                if value.id is not None:
                    raise SpecValidationError(
                        f"{self.defn.id}: output {name!r} is already stored; "
                        "a calculation must create new data"
                    )
                self.store.store_node(
                    value, incoming=[(uuid, LinkType.CREATE, name)]
                )
            if exit_code == 0:
                missing = self.defn.spec.missing_outputs(set(outputs))
                if missing:
                    raise SpecValidationError(
                        f"required outputs not produced: {missing}"
                    )
            states.record_state(
                self.store, uuid, states.FINISHED, exit_code=exit_code
            )
            log_step(self.store, uuid, "parse", self.worker_id)
        return Done(states.FINISHED, exit_code)


def job_id_of(store, uuid: str):
    """Scheduler job id from the process checkpoint, if submitted."""
    try:
        _, payload = store.load_checkpoint(uuid)
    except CheckpointNotFoundError:
        return None
    return decode_checkpoint(payload).get("job_id")


def kill_job(store, node) -> bool:
    """Tell the scheduler to drop the job backing a process, if any."""
    job_id = job_id_of(store, node.uuid)
    if job_id is None or not node.computer:
        return False
    computer = get_computer(store, node.computer)
    return SimulatedScheduler(store, computer).kill(job_id)
