"""Worker fleet supervisor.

The daemon launches worker subprocesses, replaces any that die, and
recovers their tasks: a reaped child is requeued immediately, while a
worker that is still alive but silent (stopped, wedged) is caught by
the heartbeat monitor once it misses enough beats.

Control goes over a unix socket in the profile directory speaking
newline-delimited JSON, one request per connection: ``status``,
``scale`` and ``stop``. The daemon itself is single-threaded; socket
requests are handled between supervision rounds.

Run in the foreground with ``python -m provflow.engine.daemon PROFILE``
or detached through :func:`start_detached`.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import socket
import subprocess
import sys
import threading
import time
import uuid as _uuid
from pathlib import Path
from typing import Optional

from provflow.engine import queue as taskq
from provflow.engine.config import EngineConfig, load_config, save_config
from provflow.exceptions import DaemonNotRunning
from provflow.store import Store

SOCKET_NAME = "daemon.sock"
PID_NAME = "daemon.pid"
LOG_NAME = "daemon.log"


class Daemon:
    def __init__(
        self,
        profile,
        workers: Optional[int] = None,
        config: Optional[EngineConfig] = None,
        mode: Optional[str] = None,
        poll_interval: Optional[float] = None,
    ):
        self.profile = Path(profile)
        self.store = Store(self.profile)
        config = config or load_config(self.store)
        if workers is not None:
            config.workers = workers
        if mode is not None:
            config.mode = mode
        if poll_interval is not None:
            config.poll_interval = poll_interval
        self.config = config
        # freeze the active settings so every worker reads the same ones
        with self.store.transaction():
            save_config(self.store, config)
        self.procs: dict[str, subprocess.Popen] = {}
        self._dying: list[subprocess.Popen] = []
        self._stop = threading.Event()

    @property
    def sock_path(self) -> Path:
        return self.profile / SOCKET_NAME

    @property
    def pid_path(self) -> Path:
        return self.profile / PID_NAME

    # -- main loop ---------------------------------------------------------

    def run(self) -> None:
        server = self._bind()
        self.pid_path.write_text(str(os.getpid()))
        last_stale_check = 0.0
        try:
            while not self._stop.is_set():
                self._reconcile()
                if time.time() - last_stale_check >= self.config.heartbeat_interval:
                    taskq.requeue_stale(self.store, self.config.stale_after)
                    last_stale_check = time.time()
                try:
                    conn, _ = server.accept()
                except socket.timeout:
                    continue
                with conn:
                    self._handle(conn)
        finally:
            self._teardown(server)

    def stop(self, *_signal_args) -> None:
        self._stop.set()

    def _bind(self) -> socket.socket:
        if self.sock_path.exists():
            probe = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            probe.settimeout(0.5)
            try:
                probe.connect(str(self.sock_path))
                probe.close()
                raise RuntimeError(
                    f"a daemon is already running for {self.profile}"
                )
            except (ConnectionRefusedError, socket.timeout, FileNotFoundError):
                self.sock_path.unlink(missing_ok=True)  # stale leftover
            finally:
                probe.close()
        server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        server.bind(str(self.sock_path))
        server.listen(8)
        server.settimeout(0.2)
        return server

    def _teardown(self, server: socket.socket) -> None:
        for proc in list(self.procs.values()) + self._dying:
            if proc.poll() is None:
                proc.terminate()
        deadline = time.time() + 5.0
        for proc in list(self.procs.values()) + self._dying:
            remaining = max(0.1, deadline - time.time())
            try:
                proc.wait(timeout=remaining)
            except subprocess.TimeoutExpired:
                proc.kill()
        server.close()
        self.sock_path.unlink(missing_ok=True)
        self.pid_path.unlink(missing_ok=True)
        self.store.close()

    # -- supervision ---------------------------------------------------------

    def _reconcile(self) -> None:
        for proc in list(self._dying):
            if proc.poll() is not None:
                self._dying.remove(proc)
        for worker_id, proc in list(self.procs.items()):
            if proc.poll() is not None:
                # the process is definitely gone; no need to wait for
                # its heartbeat to go stale
                self.procs.pop(worker_id)
                taskq.requeue_worker(self.store, worker_id)
        while len(self.procs) < self.config.workers:
            self._spawn()
        while len(self.procs) > self.config.workers:
            worker_id = next(iter(self.procs))
            proc = self.procs.pop(worker_id)
            proc.terminate()  # graceful: it releases its tasks
            self._dying.append(proc)

    def _spawn(self) -> None:
        worker_id = f"w{_uuid.uuid4().hex[:8]}"
        log = open(self.profile / LOG_NAME, "ab")
        try:
            proc = subprocess.Popen(
                [
                    sys.executable,
                    "-m",
                    "provflow.engine.worker",
                    str(self.profile),
                    worker_id,
                ],
                stdout=log,
                stderr=log,
            )
        finally:
            log.close()
        self.procs[worker_id] = proc

    # -- control socket --------------------------------------------------------

    def _handle(self, conn: socket.socket) -> None:
        conn.settimeout(1.0)
        try:
            buf = b""
            while not buf.endswith(b"\n"):
                chunk = conn.recv(65536)
                if not chunk:
                    break
                buf += chunk
            request = json.loads(buf or b"{}")
            reply = self._dispatch(request)
        except Exception as exc:
            reply = {"ok": False, "error": str(exc)}
        try:
            conn.sendall((json.dumps(reply) + "\n").encode())
        except OSError:
            pass

    def _dispatch(self, request: dict) -> dict:
        cmd = request.get("cmd")
        if cmd == "status":
            return self._status()
        if cmd == "scale":
            n = int(request["n"])
            if n < 0:
                return {"ok": False, "error": "worker count must be >= 0"}
            self.config.workers = n
            with self.store.transaction():
                save_config(self.store, self.config)
            return {"ok": True, "target": n}
        if cmd == "stop":
            self._stop.set()
            return {"ok": True}
        return {"ok": False, "error": f"unknown command {cmd!r}"}

    def _status(self) -> dict:
        now = time.time()
        workers = [
            {
                "worker_id": row["worker_id"],
                "pid": row["pid"],
                "started": row["started"],
                "last_heartbeat": row["last_heartbeat"],
                "heartbeat_age": now - row["last_heartbeat"],
            }
            for row in taskq.worker_rows(self.store)
        ]
        return {
            "ok": True,
            "pid": os.getpid(),
            "target": self.config.workers,
            "mode": self.config.mode,
            "workers": workers,
            "queue": taskq.queue_stats(self.store),
        }


# -- socket client -----------------------------------------------------------


def control(profile, request: dict, timeout: float = 5.0) -> dict:
    path = Path(profile) / SOCKET_NAME
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    try:
        sock.connect(str(path))
        sock.sendall((json.dumps(request) + "\n").encode())
        buf = b""
        while not buf.endswith(b"\n"):
            chunk = sock.recv(65536)
            if not chunk:
                break
            buf += chunk
    except (FileNotFoundError, ConnectionRefusedError, OSError) as exc:
        raise DaemonNotRunning(f"no daemon answering at {path}") from exc
    finally:
        sock.close()
    if not buf:
        raise DaemonNotRunning(f"daemon at {path} closed without replying")
    return json.loads(buf)


def daemon_status(profile) -> dict:
    return control(profile, {"cmd": "status"})


def daemon_scale(profile, n: int) -> dict:
    return control(profile, {"cmd": "scale", "n": n})


def daemon_stop(profile, wait: float = 10.0) -> dict:
    reply = control(profile, {"cmd": "stop"})
    path = Path(profile) / SOCKET_NAME
    deadline = time.time() + wait
    while path.exists() and time.time() < deadline:
        time.sleep(0.05)
    return reply


def start_detached(profile, workers: Optional[int] = None,
                   mode: Optional[str] = None,
                   poll_interval: Optional[float] = None,
                   wait: float = 15.0) -> int:
    """Launch the daemon in its own session; returns its pid."""
    args = [sys.executable, "-m", "provflow.engine.daemon", str(profile)]
    if workers is not None:
        args += ["--workers", str(workers)]
    if mode is not None:
        args += ["--mode", mode]
    if poll_interval is not None:
        args += ["--poll-interval", str(poll_interval)]
    log = open(Path(profile) / LOG_NAME, "ab")
    try:
        proc = subprocess.Popen(
            args, stdout=log, stderr=log, start_new_session=True
        )
    finally:
        log.close()
    deadline = time.time() + wait
    while time.time() < deadline:
        if proc.poll() is not None:
            raise DaemonNotRunning(
                f"daemon exited during startup (rc={proc.returncode}), "
                f"see {Path(profile) / LOG_NAME}"
            )
        try:
            daemon_status(profile)
            return proc.pid
        except DaemonNotRunning:
            time.sleep(0.1)
    raise DaemonNotRunning("daemon did not come up in time")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="supervise engine workers for one profile"
    )
    parser.add_argument("profile")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--mode", choices=("event", "polling"), default=None)
    parser.add_argument("--poll-interval", type=float, default=None)
    opts = parser.parse_args(argv)
    daemon = Daemon(
        opts.profile,
        workers=opts.workers,
        mode=opts.mode,
        poll_interval=opts.poll_interval,
    )
    signal.signal(signal.SIGTERM, daemon.stop)
    signal.signal(signal.SIGINT, daemon.stop)
    daemon.run()
    return 0


if __name__ == "__main__":
    sys.exit(main())
