"""Operator command line: daemon control, process lifecycle, graph
inspection, querying, archive exchange, service hosting, benchmarks.

Every command is a thin shell over the library: resolve the profile,
open a store, call the same functions scripts would, print the result.
Exit codes are stable for scripting: 0 success, 1 domain error
(unknown uuid, daemon down, rejected action), 2 usage error.
"""

from __future__ import annotations

import functools
import json as jsonlib
from pathlib import Path

import click

from provflow.cli.config import Profile, resolve_profile
from provflow.exceptions import ProvFlowError
from provflow.store import Store


def domain_errors(f):
    """Library failures become exit-code-1 messages, not tracebacks."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ProvFlowError as exc:
            raise click.ClickException(str(exc))

    return wrapper


@click.group()
@click.option(
    "--profile", "-p", "profile_ref", envvar="PROFILE", default=None,
    metavar="NAME|PATH",
    help="Profile directory or a name from the user config "
         "(PROFILE env var works too).",
)
@click.option("--json", "as_json", is_flag=True,
              help="Structured output for machine use.")
@click.pass_context
def cli(ctx, profile_ref, as_json):
    ctx.ensure_object(dict)
    ctx.obj["profile_ref"] = profile_ref
    ctx.obj["json"] = as_json


def get_profile(ctx) -> Profile:
    try:
        return resolve_profile(ctx.obj.get("profile_ref"))
    except LookupError as exc:
        raise click.UsageError(str(exc))


def emit(ctx, doc, lines) -> None:
    """One payload, two renderings: JSON document or plain lines."""
    if ctx.obj.get("json"):
        click.echo(jsonlib.dumps(doc, indent=2, sort_keys=True, default=str))
    else:
        for line in lines:
            click.echo(line)


def parse_inputs(pairs) -> dict:
    """name=value options to stored-value nodes, typed by literal syntax."""
    from provflow.graph.factories import Dict as DictNode
    from provflow.graph.factories import Float, Int, Str

    out = {}
    for pair in pairs:
        name, eq, raw = pair.partition("=")
        if not eq or not name:
            raise click.UsageError(f"--in needs name=value, got {pair!r}")
        try:
            value = jsonlib.loads(raw)
        except ValueError:
            value = raw
        if isinstance(value, bool):
            raise click.UsageError(f"{name}: no boolean data kind; use 0/1")
        if isinstance(value, int):
            out[name] = Int(value)
        elif isinstance(value, float):
            out[name] = Float(value)
        elif isinstance(value, str):
            out[name] = Str(value)
        elif isinstance(value, dict):
            out[name] = DictNode(value)
        else:
            raise click.UsageError(
                f"{name}: cannot store a {type(value).__name__} as input"
            )
    return out


def brief_value(store, uuid: str):
    """Scalar payload for value-like nodes, the uuid otherwise."""
    from provflow.graph.factories import value_of

    node = store.get(uuid)
    if node.kind in ("data.int", "data.float", "data.str"):
        return value_of(node)
    if node.kind == "data.dict":
        return node.attributes
    return node.uuid


# --------------------------------------------------------------- daemon


@cli.group()
def daemon():
    """Worker pool control."""


@daemon.command("start")
@click.option("--workers", type=int, default=None)
@click.option("--mode", type=click.Choice(["event", "polling"]), default=None)
@click.option("--poll-interval", type=float, default=None)
@click.pass_context
@domain_errors
def daemon_start(ctx, workers, mode, poll_interval):
    from provflow.engine.daemon import daemon_status, start_detached
    from provflow.exceptions import DaemonNotRunning

    profile = get_profile(ctx)
    try:
        status = daemon_status(profile.path)
        emit(ctx, {"running": True, "pid": status["pid"], "started": False},
             [f"daemon already running (pid {status['pid']}); nothing to do"])
        return
    except DaemonNotRunning:
        pass
    if workers is None:
        workers = profile.workers
    pid = start_detached(profile.path, workers=workers, mode=mode,
                         poll_interval=poll_interval)
    emit(ctx, {"running": True, "pid": pid, "started": True},
         [f"daemon started (pid {pid})"])


@daemon.command("stop")
@click.pass_context
@domain_errors
def daemon_stop_cmd(ctx):
    from provflow.engine.daemon import daemon_stop

    profile = get_profile(ctx)
    daemon_stop(profile.path)
    emit(ctx, {"running": False}, ["daemon stopped"])


@daemon.command("status")
@click.pass_context
@domain_errors
def daemon_status_cmd(ctx):
    from provflow.engine.daemon import daemon_status
    from provflow.engine import queue as taskq
    from provflow.exceptions import DaemonNotRunning

    profile = get_profile(ctx)
    try:
        status = daemon_status(profile.path)
    except DaemonNotRunning:
        with Store(profile.path) as store:
            queue = taskq.queue_stats(store)
        emit(ctx, {"running": False, "queue": queue},
             ["daemon not running",
              _queue_line(queue)])
        return
    lines = [
        f"daemon running (pid {status['pid']}), mode {status['mode']}, "
        f"target {status['target']} workers"
    ]
    for w in status["workers"]:
        lines.append(
            f"  {w['worker_id']}  pid {w['pid']}  "
            f"heartbeat {w['heartbeat_age']:.1f}s ago"
        )
    lines.append(_queue_line(status["queue"]))
    emit(ctx, {"running": True, **status}, lines)


def _queue_line(queue) -> str:
    return (f"queue: {queue.get('pending', 0)} pending, "
            f"{queue.get('claimed', 0)} claimed, "
            f"{queue.get('paused', 0)} paused")


@daemon.command("scale")
@click.argument("n", type=int)
@click.pass_context
@domain_errors
def daemon_scale_cmd(ctx, n):
    from provflow.engine.daemon import daemon_scale

    profile = get_profile(ctx)
    reply = daemon_scale(profile.path, n)
    if not reply.get("ok"):
        raise click.ClickException(reply.get("error", "scale rejected"))
    emit(ctx, reply, [f"scaling to {reply['target']} workers"])


# -------------------------------------------------------------- process


@cli.group("process")
def process_group():
    """Inspect and steer processes."""


@process_group.command("list")
@click.option("--state", "state_filter", default=None,
              help="Only processes currently in this state.")
@click.pass_context
@domain_errors
def process_list(ctx, state_filter):
    from provflow import states

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        rows = []
        for rec in store.node_records("process"):
            state = rec["extras"].get(states.K_STATE, states.CREATED)
            if state_filter and state != state_filter:
                continue
            rows.append(
                {
                    "id": rec["id"],
                    "uuid": rec["uuid"],
                    "kind": rec["kind"],
                    "state": state,
                    "exit_code": rec["extras"].get(states.K_EXIT),
                    "label": rec["label"],
                }
            )
    lines = [
        f"{r['id']:>6}  {r['state']:<8}  {r['kind'].split('.')[-1]:<13}"
        f"  {r['label']:<24}  {r['uuid']}"
        for r in rows
    ]
    lines.append(f"{len(rows)} processes")
    emit(ctx, rows, lines)


@process_group.command("show")
@click.argument("uuid")
@click.pass_context
@domain_errors
def process_show(ctx, uuid):
    from provflow import states
    from provflow.graph.links import LinkType

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        rec = store.node_record(uuid)
        if not rec["kind"].startswith("process"):
            raise click.ClickException(f"{uuid} is not a process node")
        state = rec["extras"].get(states.K_STATE, states.CREATED)
        incoming = store.links_to(uuid)
        outgoing = store.links_from(uuid)
        doc = {
            "uuid": uuid,
            "kind": rec["kind"],
            "label": rec["label"],
            "state": state,
            "exit_code": rec["extras"].get(states.K_EXIT),
            "inputs": [
                {"label": l.label, "uuid": l.source, "type": l.type.value}
                for l in incoming
                if l.type in (LinkType.INPUT_CALC, LinkType.INPUT_WORK)
            ],
            "outputs": [
                {"label": l.label, "uuid": l.target, "type": l.type.value}
                for l in outgoing
                if l.type in (LinkType.CREATE, LinkType.RETURN)
            ],
            "called": [
                {"label": l.label, "uuid": l.target, "type": l.type.value}
                for l in outgoing
                if l.type in (LinkType.CALL_CALC, LinkType.CALL_WORK)
            ],
            "caller": next(
                (l.source for l in incoming
                 if l.type in (LinkType.CALL_CALC, LinkType.CALL_WORK)),
                None,
            ),
        }
    lines = [
        f"{doc['kind']}  {uuid}",
        f"label: {doc['label']}   state: {doc['state']}"
        + (f" (exit {doc['exit_code']})" if doc["exit_code"] is not None else ""),
    ]
    if doc["caller"]:
        lines.append(f"called by: {doc['caller']}")
    for section in ("inputs", "outputs", "called"):
        if doc[section]:
            lines.append(f"{section}:")
            for item in doc[section]:
                lines.append(
                    f"  {item['label']:<20} {item['type']:<11} {item['uuid']}"
                )
    emit(ctx, doc, lines)


def _action_command(name, help_text):
    @process_group.command(name, help=help_text)
    @click.argument("uuid")
    @click.option("--reason", default=None, hidden=(name != "pause"))
    @click.pass_context
    @domain_errors
    def _cmd(ctx, uuid, reason):
        from provflow.engine.client import action

        profile = get_profile(ctx)
        with Store(profile.path) as store:
            state = action(store, uuid, name, reason=reason)
        emit(ctx, {"uuid": uuid, "action": name, "state": state},
             [f"{uuid}: {state}"])

    return _cmd


process_pause = _action_command("pause", "Hold a live process.")
process_play = _action_command("play", "Resume a paused process.")
process_kill = _action_command("kill", "Terminate a process and its children.")


@process_group.command("report")
@click.argument("uuid")
@click.pass_context
@domain_errors
def process_report(ctx, uuid):
    from provflow.rest.report import build_report

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        report = build_report(store, uuid)
    doc = report.model_dump()
    lines = [
        f"{report.kind}  {uuid}",
        f"state: {report.state}"
        + (f" (exit {report.exit_code})" if report.exit_code is not None else "")
        + (f", paused: {report.pause_reason}" if report.pause_reason else ""),
    ]
    if report.exception:
        lines.append(f"exception: {report.exception}")
    if report.steps:
        lines.append("steps: " + " ".join(s.step for s in report.steps))
    for change in report.history:
        suffix = (f" (exit {change.exit_code})"
                  if change.exit_code is not None else "")
        lines.append(f"  {change.old or '-':<9} -> {change.new}{suffix}")
    for r in report.retry_log:
        lines.append(
            f"retry {r.attempt} after {r.delay:.2f}s: {r.error}"
        )
    if report.retry_log:
        lines.append(f"{len(report.retry_log)} retries recorded")
    emit(ctx, doc, lines)


# ------------------------------------------------------------ run/submit


@cli.command("run")
@click.argument("process_id")
@click.option("--in", "inputs", multiple=True, metavar="NAME=VALUE")
@click.option("--computer", default=None)
@click.pass_context
@domain_errors
def run_cmd(ctx, process_id, inputs, computer):
    """Execute a process in the foreground and print its outputs."""
    from provflow import states
    from provflow.processes import run_process

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        node, outputs = run_process(
            store, process_id, parse_inputs(inputs), computer=computer
        )
        state = states.state_of(store, node.uuid)
        exit_code = states.exit_code_of(store, node.uuid)
        values = {
            label: brief_value(store, out.uuid)
            for label, out in outputs.items()
        }
    doc = {"uuid": node.uuid, "state": state, "exit_code": exit_code,
           "outputs": values}
    if state != states.FINISHED or exit_code != 0:
        raise click.ClickException(
            f"{process_id} ended {state}"
            + (f" (exit {exit_code})" if exit_code is not None else "")
        )
    lines = [f"{label}: {value}" for label, value in values.items()]
    lines.append(f"{node.uuid} finished (exit 0)")
    emit(ctx, doc, lines)


@cli.command("submit")
@click.argument("process_id")
@click.option("--in", "inputs", multiple=True, metavar="NAME=VALUE")
@click.option("--computer", default=None)
@click.pass_context
@domain_errors
def submit_cmd(ctx, process_id, inputs, computer):
    """Queue a process for the daemon and return immediately."""
    from provflow.engine.client import submit

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        node = submit(store, process_id,
                      parse_inputs(inputs), computer=computer)
    emit(ctx, {"uuid": node.uuid, "queued": True},
         [f"submitted {process_id} as {node.uuid}"])


# ----------------------------------------------------------------- node


@cli.group("node")
def node_group():
    """Look at stored nodes and their surroundings."""


@node_group.command("show")
@click.argument("uuid")
@click.pass_context
@domain_errors
def node_show(ctx, uuid):
    profile = get_profile(ctx)
    with Store(profile.path) as store:
        rec = store.node_record(uuid)
        incoming = store.links_to(uuid)
        outgoing = store.links_from(uuid)
        files = store.repo_list(uuid)
    doc = {k: rec[k] for k in
           ("id", "uuid", "kind", "label", "description", "ctime", "mtime",
            "computer", "attributes", "extras", "hash")}
    doc["repo"] = files
    doc["incoming"] = [
        {"type": l.type.value, "label": l.label, "uuid": l.source}
        for l in incoming
    ]
    doc["outgoing"] = [
        {"type": l.type.value, "label": l.label, "uuid": l.target}
        for l in outgoing
    ]
    lines = [
        f"{rec['kind']}  {uuid}  (id {rec['id']})",
        f"label: {rec['label']!r}  computer: {rec['computer'] or '-'}",
        f"attributes: {jsonlib.dumps(rec['attributes'], sort_keys=True)}",
        f"extras: {jsonlib.dumps(rec['extras'], sort_keys=True)}",
    ]
    if files:
        lines.append("repo: " + ", ".join(files))
    for title, items in (("incoming", doc["incoming"]),
                         ("outgoing", doc["outgoing"])):
        if items:
            lines.append(f"{title}:")
            lines.extend(
                f"  {i['type']:<11} {i['label']:<20} {i['uuid']}"
                for i in items
            )
    emit(ctx, doc, lines)


@node_group.command("graph")
@click.argument("uuid")
@click.option("--depth", type=int, default=3, show_default=True,
              help="How many hops of data provenance to walk.")
@click.pass_context
@domain_errors
def node_graph(ctx, uuid, depth):
    """Textual view of a node's data-provenance neighbourhood."""
    from provflow.query.traverse import ancestors_of, descendants_of

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        up = ancestors_of(store, uuid, max_depth=depth)
        down = descendants_of(store, uuid, max_depth=depth)
        doc = {"uuid": uuid, "ancestors": up, "descendants": down}
        lines = [f"data provenance around {uuid} (depth {depth})"]
        for title, found in (("ancestors", up), ("descendants", down)):
            lines.append(f"{title}: {len(found)}")
            for other, d in sorted(found.items(), key=lambda kv: (kv[1], kv[0])):
                rec = store.node_record(other)
                lines.append(
                    f"  {d}  {rec['kind']:<32} {rec['label']:<16} {other}"
                )
    emit(ctx, doc, lines)


# ---------------------------------------------------------------- query


@cli.command("query")
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@domain_errors
def query_cmd(ctx, plan_file):
    """Run a serialized query plan; one tab-separated row per match."""
    from provflow.query import QueryBuilder, QueryPlan

    plan = QueryPlan.from_json(Path(plan_file).read_text())
    profile = get_profile(ctx)
    with Store(profile.path) as store:
        rows = QueryBuilder(store, plan).all()

    def cell(value):
        if isinstance(value, (dict, list)):
            return jsonlib.dumps(value, sort_keys=True)
        return str(value)

    emit(ctx, {"rows": rows},
         ["\t".join(cell(v) for v in row) for row in rows])


# -------------------------------------------------------------- archive


@cli.group("archive")
def archive_group():
    """Move graphs between profiles."""


@archive_group.command("export")
@click.argument("file", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
@domain_errors
def archive_export(ctx, file):
    from provflow.store import export_archive

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        nodes, links = store.count_nodes(), store.count_links()
        export_archive(store, file)
    emit(ctx, {"file": str(file), "nodes": nodes, "links": links},
         [f"exported {nodes} nodes, {links} links to {file}"])


@archive_group.command("import")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@domain_errors
def archive_import(ctx, file):
    from provflow.store import import_archive

    profile = get_profile(ctx)
    with Store(profile.path) as store:
        added = import_archive(store, file)
    emit(ctx, {"file": str(file), **added},
         [f"imported {added['nodes']} new nodes, "
          f"{added['links']} new links from {file}"])


# ----------------------------------------------------------------- rest


@cli.group("rest")
def rest_group():
    """HTTP service hosting."""


@rest_group.command("serve")
@click.option("--rest-port", type=int, default=None,
              help="Port to listen on (profile setting or 5000).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--read-only", is_flag=True,
              help="Disable the POST control endpoints.")
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Allowed browser origins; default allows any.")
@click.pass_context
@domain_errors
def rest_serve(ctx, rest_port, host, read_only, cors_origins):
    from provflow.rest import serve

    profile = get_profile(ctx)
    port = rest_port if rest_port is not None else profile.rest_port
    click.echo(f"serving profile {profile.name} on http://{host}:{port}")
    serve(profile.path, host=host, port=port,
          cors_origins=cors_origins or None, read_only=read_only)


# ---------------------------------------------------------------- bench


@cli.group("bench")
def bench_group():
    """Timing experiments (results land in CSV files)."""


@bench_group.command("tc")
@click.option("--trees", type=int, default=50, show_default=True)
@click.option("--breadth", type=click.Choice(["2", "4"]), default="2")
@click.option("--depth", type=click.Choice(["2", "4"]), default="2")
@click.option("--strategy", type=click.Choice(["otf", "table", "both"]),
              default="both", show_default=True)
@click.option("--reps", type=int, default=5, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              default="tc_bench.csv", show_default=True)
@click.pass_context
@domain_errors
def bench_tc(ctx, trees, breadth, depth, strategy, reps, csv_path):
    """Time descendant queries over generated provenance trees."""
    import tempfile

    from provflow.bench import TreeGraphSpec, run_tc

    if trees < 50:
        raise click.UsageError("--trees must be at least 50")
    spec = TreeGraphSpec(trees, int(breadth), int(depth))
    strategies = ("otf", "table") if strategy == "both" else (strategy,)
    with tempfile.TemporaryDirectory(prefix="provflow-bench-") as tmp:
        rows = run_tc(tmp, spec, strategies=strategies, reps=reps,
                      csv_path=csv_path)
    emit(ctx, rows,
         [f"N={r['N']} B={r['B']} D={r['D']} {r['strategy']}: "
          f"{r['seconds']:.4f}s" for r in rows]
         + [f"rows appended to {csv_path}"])


@bench_group.command("engine")
@click.option("--workchains", type=int, default=400, show_default=True)
@click.option("--workers", type=int, default=None,
              help="Scale the daemon to this many workers first.")
@click.option("--mode", type=click.Choice(["event", "polling"]), default=None,
              help="Assert the daemon was started in this mode.")
@click.option("--poll-interval", type=float, default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              default="engine_bench.csv", show_default=True)
@click.option("--timeout", type=float, default=1800.0, show_default=True)
@click.pass_context
@domain_errors
def bench_engine(ctx, workchains, workers, mode, poll_interval, csv_path,
                 timeout):
    """Submit reference chains to the running daemon and time them."""
    from provflow.bench import run_engine_bench

    if workchains < 1:
        raise click.UsageError("--workchains must be positive")
    profile = get_profile(ctx)
    summary = run_engine_bench(
        profile.path,
        workchains=workchains,
        workers=workers,
        mode=mode,
        poll_interval=poll_interval,
        csv_path=csv_path,
        timeout=timeout,
    )
    doc = {k: v for k, v in summary.items() if k != "samples"}
    emit(ctx, doc, [
        f"{summary['workchains']} chains ({summary['completed']} processes) "
        f"in {summary['wall_seconds']:.1f}s, mode {summary['mode']}, "
        f"{summary['workers']} workers",
        f"throughput: {summary['processes_per_hour']:.0f} processes/hour",
        f"longest completion plateau: {summary['longest_plateau']:.1f}s",
        f"samples written to {summary['csv']}",
    ])


if __name__ == "__main__":
    cli()
