"""File movement to job working directories.

Everything here runs against the local filesystem, but through the same
interface a remote machine would use, including injectable faults and a
per-computer limit on how often a new connection may be opened. The
open limit models being a polite citizen on a shared login node: many
jobs on one machine share a time slot instead of hammering it.
"""

from __future__ import annotations

import os
import time
from contextlib import contextmanager
from pathlib import Path

from provflow.exceptions import TransientError
from .computers import Computer


class LocalTransport:
    """Filesystem transport with optional fault injection.

    ``fault_flag`` names a file holding an integer: while it exists,
    each operation consumes one unit and raises a recoverable error,
    and the file disappears when the count runs out. Tests use it to
    say "fail exactly N times, then work".
    """

    def __init__(self, fault_flag: str = None):
        self.fault_flag = Path(fault_flag) if fault_flag else None

    def _maybe_fault(self):
        flag = self.fault_flag
        if flag is None or not flag.exists():
            return
        try:
            remaining = int(flag.read_text().strip() or "0")
        except ValueError:
            remaining = 1
        if remaining <= 1:
            flag.unlink(missing_ok=True)
        else:
            flag.write_text(str(remaining - 1))
        raise TransientError("connection dropped")

    def makedirs(self, path: str):
        self._maybe_fault()
        os.makedirs(path, exist_ok=True)

    def put(self, path: str, content: bytes):
        self._maybe_fault()
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(content)

    def get(self, path: str) -> bytes:
        self._maybe_fault()
        return Path(path).read_bytes()

    def exists(self, path: str) -> bool:
        self._maybe_fault()
        return Path(path).exists()

    def listdir(self, path: str) -> list[str]:
        self._maybe_fault()
        return sorted(os.listdir(path))


class TransportPool:
    """Hands out transports while enforcing the per-computer open rate.

    The time of every open is recorded in the store, so the spacing
    holds across worker processes and the history doubles as an audit
    of connection pressure per machine.
    """

    def __init__(self, owner: str = "inline", sleep=time.sleep):
        self.owner = owner
        self.sleep = sleep

    def _last_open(self, store, computer: str):
        row = store.db.execute(
            "SELECT MAX(time) AS t FROM transport_opens WHERE computer = ?",
            (computer,),
        ).fetchone()
        return row["t"]

    @contextmanager
    def open(self, store, computer: Computer):
        interval = computer.min_open_interval
        if interval > 0:
            last = self._last_open(store, computer.name)
            if last is not None:
                wait = last + interval - time.time()
                if wait > 0:
                    self.sleep(wait)
        with store.transaction():
            store.db.execute(
                "INSERT INTO transport_opens (computer, owner, time) "
                "VALUES (?, ?, ?)",
                (computer.name, self.owner, time.time()),
            )
        yield LocalTransport(fault_flag=computer.fault_flag)


def open_count(store, computer: str = None) -> int:
    if computer is None:
        row = store.db.execute("SELECT COUNT(*) AS n FROM transport_opens")
    else:
        row = store.db.execute(
            "SELECT COUNT(*) AS n FROM transport_opens WHERE computer = ?",
            (computer,),
        )
    return row.fetchone()["n"]
