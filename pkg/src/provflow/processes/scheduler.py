"""A batch scheduler that lives inside the store.

Jobs run for real: the submitted script is executed with /bin/sh in its
working directory, subject to the walltime it asked for. What is
simulated is the *timing* that callers observe: a job reports queued
for ``queue_delay`` seconds after submission, then running for
``run_delay`` seconds, then its true outcome. That lets tests and
benches exercise the polling machinery without a real cluster.

Scripts carry their resource requests as comment directives:

    #PSEUDO walltime=60
    #PSEUDO cores=2

Status checks are batched per computer: one refresh covers every job on
the machine and is reused for the computer's ``status_window``. The
refresh counter makes the batching observable.
"""

from __future__ import annotations

import json
import subprocess
import time
import uuid as uuidlib
from dataclasses import dataclass
from typing import Optional

from .computers import Computer

QUEUED = "queued"
RUNNING = "running"
DONE = "done"
FAILED = "failed"

LIVE_STATES = (QUEUED, RUNNING)

# rc reported when the walltime kills the script
WALLTIME_RC = 124


def parse_directives(script: str) -> dict:
    """Resource requests from #PSEUDO comment lines."""
    out = {"walltime": 3600.0, "cores": 1}
    for line in script.splitlines():
        line = line.strip()
        if not line.startswith("#PSEUDO"):
            continue
        for token in line[len("#PSEUDO"):].split():
            key, _, value = token.partition("=")
            if key == "walltime":
                out["walltime"] = float(value)
            elif key == "cores":
                out["cores"] = int(value)
    return out


@dataclass(frozen=True)
class JobInfo:
    job_id: str
    state: str
    rc: Optional[int] = None


class SimulatedScheduler:
    def __init__(self, store, computer: Computer):
        self.store = store
        self.computer = computer

    def submit(self, workdir: str, script_name: str) -> str:
        """Queue a script; returns the scheduler's job id.

        The script runs right here (synchronously) unless the computer
        is in no_execute mode; only the reported status is delayed.
        Every real run is tallied in the execution log, which is how
        tests prove a cached result did not re-run anything.
        """
        script_path = f"{workdir}/{script_name}"
        with open(script_path, "r") as handle:
            script = handle.read()
        directives = parse_directives(script)
        job_id = uuidlib.uuid4().hex[:12]

        if self.computer.no_execute:
            rc = 0
        else:
            self.store.record_execution("job", job_id)
            try:
                proc = subprocess.run(
                    ["/bin/sh", script_name],
                    cwd=workdir,
                    capture_output=True,
                    timeout=directives["walltime"],
                )
                rc = proc.returncode
            except subprocess.TimeoutExpired:
                rc = WALLTIME_RC

        with self.store.transaction():
            self.store.db.execute(
                "INSERT INTO sched_jobs (job_id, computer, workdir, script, "
                "directives, submit_time, rc, killed, queue_delay, run_delay) "
                "VALUES (?, ?, ?, ?, ?, ?, ?, 0, ?, ?)",
                (
                    job_id,
                    self.computer.name,
                    workdir,
                    script_name,
                    json.dumps(directives, sort_keys=True),
                    time.time(),
                    rc,
                    self.computer.queue_delay,
                    self.computer.run_delay,
                ),
            )
        return job_id

    def _shape(self, row, now: float) -> JobInfo:
        if row["killed"]:
            return JobInfo(row["job_id"], FAILED, None)
        elapsed = now - row["submit_time"]
        if elapsed < row["queue_delay"]:
            return JobInfo(row["job_id"], QUEUED)
        if elapsed < row["queue_delay"] + row["run_delay"]:
            return JobInfo(row["job_id"], RUNNING)
        rc = row["rc"]
        return JobInfo(row["job_id"], DONE if rc == 0 else FAILED, rc)

    def status(self, job_id: str) -> Optional[JobInfo]:
        row = self.store.db.execute(
            "SELECT * FROM sched_jobs WHERE job_id = ?", (job_id,)
        ).fetchone()
        if row is None:
            return None
        return self._shape(row, time.time())

    def status_all(self) -> dict[str, JobInfo]:
        now = time.time()
        rows = self.store.db.execute(
            "SELECT * FROM sched_jobs WHERE computer = ?", (self.computer.name,)
        ).fetchall()
        return {row["job_id"]: self._shape(row, now) for row in rows}

    def kill(self, job_id: str) -> bool:
        with self.store.transaction():
            cur = self.store.db.execute(
                "UPDATE sched_jobs SET killed = 1 WHERE job_id = ?", (job_id,)
            )
            return cur.rowcount > 0


class StatusCache:
    """Per-computer snapshot of job states, refreshed at most once per window.

    Between refreshes every caller is served the same snapshot, so a
    hundred parked jobs cost one scheduler round trip instead of a
    hundred. Refresh counts persist in the store for inspection.
    """

    def __init__(self, scheduler: SimulatedScheduler):
        self.scheduler = scheduler
        self.store = scheduler.store
        self.computer = scheduler.computer

    def get(self, job_id: str) -> Optional[JobInfo]:
        states = self._snapshot()
        if job_id not in states:
            # submitted after the snapshot was taken; don't declare it
            # lost off stale data
            states = self._snapshot(force=True)
        entry = states.get(job_id)
        if entry is None:
            return None
        return JobInfo(job_id, entry["state"], entry["rc"])

    def _snapshot(self, force: bool = False) -> dict:
        name = self.computer.name
        now = time.time()
        row = self.store.db.execute(
            "SELECT fetched, states FROM sched_status_cache WHERE computer = ?",
            (name,),
        ).fetchone()
        if (
            not force
            and row is not None
            and now - row["fetched"] < self.computer.status_window
        ):
            return json.loads(row["states"])
        snapshot = {
            job_id: {"state": info.state, "rc": info.rc}
            for job_id, info in self.scheduler.status_all().items()
        }
        with self.store.transaction():
            self.store.db.execute(
                "INSERT INTO sched_status_cache (computer, fetched, states, refreshes) "
                "VALUES (?, ?, ?, 1) "
                "ON CONFLICT (computer) DO UPDATE SET fetched = excluded.fetched, "
                "states = excluded.states, refreshes = refreshes + 1",
                (name, now, json.dumps(snapshot, sort_keys=True)),
            )
        return snapshot


def refresh_count(store, computer: str) -> int:
    row = store.db.execute(
        "SELECT refreshes FROM sched_status_cache WHERE computer = ?", (computer,)
    ).fetchone()
    return row["refreshes"] if row is not None else 0
