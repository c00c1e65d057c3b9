"""Engine throughput: submit reference chains, watch them complete.

The reference unit is the add_chain workflow (one scheduler job plus
one recorded function), so each submission turns into three process
nodes. The driver is single-threaded: it submits, then follows the
store's event feed and takes a sample every second; the multi-worker
engine runs entirely in the daemon's processes.

A capacity pre-check guards against the fan-out trap inherited from
prefetch semantics: a parent chain holds its claim slot while parked
on children, so if every slot across every worker can fill with parked
parents (workers x prefetch <= chains) the children are never claimed
and the run stalls forever. The check fails fast with the fix spelled
out instead of hanging.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

from provflow import states
from provflow.engine import queue as taskq
from provflow.engine.client import submit
from provflow.engine.config import load_config
from provflow.engine.daemon import daemon_scale, daemon_status
from provflow.exceptions import BenchError, StoreError
from provflow.graph.factories import Int
from provflow.graph.links import check_data_provenance_acyclic
from provflow.processes.computers import get_computer, register_computer
from provflow.store import Store

CSV_COLUMNS = ("t", "submitted", "completed", "workchain", "calcjob", "calcfunction")

FLAVOR_OF = {
    "process.workflow.workchain": "workchain",
    "process.workflow.workfunction": "workfunction",
    "process.calculation.calcjob": "calcjob",
    "process.calculation.calcfunction": "calcfunction",
}


@dataclass(frozen=True)
class ThroughputSample:
    t: float
    submitted: int
    completed: int
    workchain: int
    calcjob: int
    calcfunction: int


class _Observer:
    """Counts terminal transitions per flavor from the broadcast feed."""

    def __init__(self, store, watched_chains):
        self.store = store
        self.cursor = taskq.last_event_seq(store)
        self.counts = {"workchain": 0, "calcjob": 0, "calcfunction": 0,
                       "workfunction": 0}
        self.remaining = set(watched_chains)

    def poll(self) -> None:
        rows = taskq.events_after(self.store, self.cursor)
        if not rows:
            return
        self.cursor = rows[-1]["seq"]
        for row in rows:
            if row["kind"] != "state" or not row["payload"]:
                continue
            new = json.loads(row["payload"]).get("new", "")
            if not states.is_terminal(new):
                continue
            kind = self.store.kind_of(row["process_uuid"])
            flavor = FLAVOR_OF.get(kind or "")
            if flavor:
                self.counts[flavor] += 1
            self.remaining.discard(row["process_uuid"])

    @property
    def completed(self) -> int:
        return sum(self.counts.values())


def longest_plateau(samples) -> float:
    """Longest wall-clock stretch with no change in the completed count."""
    if len(samples) < 2:
        return 0.0
    longest = 0.0
    anchor_t, anchor_v = samples[0].t, samples[0].completed
    for s in samples[1:]:
        if s.completed != anchor_v:
            longest = max(longest, s.t - anchor_t)
            anchor_t, anchor_v = s.t, s.completed
    return max(longest, samples[-1].t - anchor_t)


def ensure_localhost(store, profile) -> None:
    try:
        get_computer(store, "localhost")
    except StoreError:
        register_computer(store, "localhost", str(Path(profile) / "bench_work"))


def run_engine_bench(
    profile,
    workchains: int = 400,
    workers=None,
    mode=None,
    poll_interval=None,
    csv_path="engine_bench.csv",
    sample_period: float = 1.0,
    timeout: float = 1800.0,
) -> dict:
    """Submit ``workchains`` add_chain instances and sample until done.

    The daemon must already be running; ``mode`` and ``poll_interval``
    assert what it was started with rather than changing it (a mode
    change needs a worker restart, which is the operator's call).
    """
    status = daemon_status(profile)  # DaemonNotRunning propagates
    if mode is not None and status["mode"] != mode:
        raise BenchError(
            f"daemon runs in {status['mode']} mode; restart it with "
            f"--mode {mode} to benchmark that configuration"
        )
    if workers is not None and workers != status["target"]:
        daemon_scale(profile, workers)
        status = daemon_status(profile)

    store = Store(profile)
    try:
        config = load_config(store)
        if poll_interval is not None and config.mode == "polling" \
                and config.poll_interval != poll_interval:
            raise BenchError(
                f"daemon polls every {config.poll_interval}s; restart it "
                f"with --poll-interval {poll_interval}"
            )
        slots = status["target"] * config.prefetch
        if slots <= workchains:
            raise BenchError(
                f"{status['target']} workers x prefetch {config.prefetch} "
                f"= {slots} claim slots, not enough for {workchains} "
                "chains: parked parents would fill every slot and their "
                "jobs would never be claimed. Raise prefetch in the "
                "engine config (or add workers) so workers x prefetch "
                "exceeds the chain count."
            )
        ensure_localhost(store, profile)

        chains = []
        samples = []
        observer = _Observer(store, ())
        start = time.monotonic()
        next_sample = start

        def maybe_sample(now, force=False) -> None:
            nonlocal next_sample
            if now < next_sample and not force:
                return
            observer.poll()
            samples.append(
                ThroughputSample(
                    t=round(now - start, 3),
                    submitted=len(chains),
                    completed=observer.completed,
                    workchain=observer.counts["workchain"],
                    calcjob=observer.counts["calcjob"],
                    calcfunction=observer.counts["calcfunction"],
                )
            )
            next_sample += sample_period

        maybe_sample(start)
        # submissions are grouped into shared transactions: one commit
        # per chain would hog the write lock the workers need, and the
        # stall would show up in the series as engine latency
        batch = 50
        for base in range(0, workchains, batch):
            with store.transaction():
                for i in range(base, min(base + batch, workchains)):
                    node = submit(
                        store, "add_chain", x=Int(i % 7 + 1), y=Int(i % 11 + 1)
                    )
                    chains.append(node.uuid)
                    observer.remaining.add(node.uuid)
            maybe_sample(time.monotonic())

        deadline = start + timeout
        while observer.remaining:
            now = time.monotonic()
            if now > deadline:
                raise BenchError(
                    f"{len(observer.remaining)} of {workchains} chains "
                    f"still unfinished after {timeout:.0f}s"
                )
            observer.poll()
            maybe_sample(now)
            if observer.remaining:
                time.sleep(0.05)
        # one closing sample so the series ends on the final counts
        observer.poll()
        maybe_sample(time.monotonic(), force=True)

        wall = time.monotonic() - start
        _verify_run(store, chains)
        total = observer.completed
    finally:
        store.close()

    if csv_path is not None:
        _write_csv(csv_path, samples)
    return {
        "workchains": workchains,
        "workers": status["target"],
        "mode": status["mode"],
        "wall_seconds": wall,
        "completed": total,
        "processes_per_hour": total / wall * 3600.0 if wall > 0 else 0.0,
        "longest_plateau": longest_plateau(samples),
        "samples": samples,
        "csv": None if csv_path is None else str(csv_path),
    }


def _verify_run(store, chains) -> None:
    """The bench only reports numbers for a run that ended correctly."""
    bad = []
    for uuid in chains:
        extras = store.get_extras(uuid)
        if extras.get(states.K_STATE) != states.FINISHED \
                or extras.get(states.K_EXIT) != 0:
            bad.append(uuid)
    if bad:
        raise BenchError(
            f"{len(bad)} chains did not reach finished(0), e.g. {bad[0]}"
        )
    cycle = check_data_provenance_acyclic(
        store, [rec["uuid"] for rec in store.node_records()]
    )
    if cycle:
        raise BenchError(f"data provenance contains a cycle: {cycle}")


def _write_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in samples:
            writer.writerow(
                [s.t, s.submitted, s.completed,
                 s.workchain, s.calcjob, s.calcfunction]
            )
