"""HTTP service: filter grammar, browsing endpoints, engine control."""

import json
import random

import pytest
from fastapi.testclient import TestClient

from provflow import states
from provflow.engine.client import submit
from provflow.graph import MemoryGraph
from provflow.graph.factories import Int
from provflow.graph.nodes import Node
from provflow.processes import run_process
from provflow.query import QueryBuilder
from provflow.query.plan import FilterExpr
from provflow.rest import (
    FilterSyntaxError,
    UnknownFilterPath,
    create_app,
    parse_filters,
)
from provflow.store import Store

from tests import engine_fixtures  # noqa: F401  registers enginetest.* chains
from tests.helpers import (
    _filter_choices,
    random_dag_memory,
    _attr_choices,
    seed_expression_graph,
    seed_threshold_pipeline,
    store_from_memory,
)

RAW = b"\x00\x01\xff plain bytes\nline two\n"


# ------------------------------------------------------------- grammar


def test_parse_symbolic_clauses():
    exprs = parse_filters('kind==data.int,attributes.value>=2,attributes.type=="relax"')
    assert exprs == [
        FilterExpr("kind", "==", "data.int"),
        FilterExpr("attributes.value", ">=", 2),
        FilterExpr("attributes.type", "==", "relax"),
    ]


def test_parse_word_operators():
    exprs = parse_filters(
        'attributes.name in ["alpha","beta"], attributes has_key value, '
        'attributes.value of_type int, label like "fib%"'
    )
    assert [e.op for e in exprs] == ["in", "has_key", "of_type", "like"]
    assert exprs[0].value == ["alpha", "beta"]
    assert exprs[2].value == "int"


def test_commas_inside_values_do_not_split():
    exprs = parse_filters('attributes.name in ["a,b", "c"],kind==data.dict')
    assert len(exprs) == 2
    assert exprs[0].value == ["a,b", "c"]


def test_malformed_clauses_rejected():
    for bad in ("kind ~~ 5", "kind==", "attributes.value of_type banana",
                "attributes.name in 5", "just_a_word"):
        with pytest.raises(FilterSyntaxError):
            parse_filters(bad)


def test_unknown_path_root_rejected():
    with pytest.raises(UnknownFilterPath):
        parse_filters("shape==round")
    # known root with nested tail is fine even if absent on every node
    assert parse_filters("attributes.missing.deep==1")


def test_empty_filter_string_matches_everything():
    assert parse_filters("") == []
    assert parse_filters("  ") == []


# ------------------------------------------------------------- fixtures


@pytest.fixture()
def profile(tmp_path):
    g = MemoryGraph()
    names = seed_expression_graph(g)
    attrs = {names[f"D{i}"]: {"value": i} for i in range(1, 6)}
    labels = {uuid: name.lower() for name, uuid in names.items()}
    store = store_from_memory(tmp_path / "profile", g, attrs=attrs, labels=labels)
    seed_threshold_pipeline(store)
    folder = Node("data.folder", label="payload")
    folder.put_file("raw/input.txt", RAW)
    store.store_node(folder)
    store.close()
    names["folder"] = folder.uuid
    return tmp_path / "profile", names


@pytest.fixture()
def client(profile):
    path, _ = profile
    with TestClient(create_app(path)) as c:
        yield c


def get_json(client, url, **params):
    resp = client.get(url, params=params)
    assert resp.status_code == 200, resp.text
    return resp.json()


# ------------------------------------------------------------- browsing


def test_nodes_listing_is_id_ordered(client, profile):
    path, _ = profile
    page = get_json(client, "/api/v1/nodes", limit=400)
    ids = [item["id"] for item in page["items"]]
    assert ids == sorted(ids)
    with Store(path) as store:
        assert page["total"] == store.count_nodes()
    assert len(page["items"]) == page["total"]


def test_kind_filter_matches_direct_lookup(client, profile):
    path, _ = profile
    page = get_json(client, "/api/v1/nodes", filters="kind==data.int", limit=400)
    got = [item["uuid"] for item in page["items"]]
    with Store(path) as store:
        want = [rec["uuid"] for rec in store.node_records("data.int")]
    assert got == want and len(got) == 5


def test_pagination_partitions_exactly(client):
    full = get_json(client, "/api/v1/nodes", filters="kind==data.int", limit=400)
    assert full["total"] == 5

    first = get_json(client, "/api/v1/nodes", filters="kind==data.int", limit=2)
    assert len(first["items"]) == 2
    assert first["next"] == 2 and first["prev"] is None

    collected = []
    offset = 0
    while offset is not None:
        page = get_json(
            client, "/api/v1/nodes",
            filters="kind==data.int", limit=2, offset=offset,
        )
        collected.extend(item["uuid"] for item in page["items"])
        offset = page["next"]
    assert collected == [item["uuid"] for item in full["items"]]

    last = get_json(client, "/api/v1/nodes", filters="kind==data.int",
                    limit=2, offset=4)
    assert len(last["items"]) == 1
    assert last["next"] is None and last["prev"] == 2


def test_attribute_filter_finds_relax_parameters(client):
    page = get_json(
        client, "/api/v1/nodes", filters='attributes.type=="relax"', limit=400
    )
    assert page["total"] == 2
    assert all(item["kind"] == "data.dict" for item in page["items"])


def test_malformed_filter_is_400(client):
    resp = client.get("/api/v1/nodes", params={"filters": "kind ~~ data.int"})
    assert resp.status_code == 400


def test_unknown_filter_path_is_422(client):
    resp = client.get("/api/v1/nodes", params={"filters": "shape==round"})
    assert resp.status_code == 422


def test_limit_is_clamped(client):
    page = get_json(client, "/api/v1/nodes", limit=100000)
    assert page["limit"] == 400


def test_node_detail_document(client, profile):
    _, names = profile
    doc = get_json(client, f"/api/v1/nodes/{names['D5']}")
    assert doc["kind"] == "data.int"
    assert doc["label"] == "d5"
    assert doc["attributes"] == {"value": 5}
    assert doc["state"] is None  # not a process

    proc = get_json(client, f"/api/v1/nodes/{names['W1']}")
    assert proc["state"] == "created"


def test_unknown_uuid_is_404(client):
    assert client.get("/api/v1/nodes/no-such-uuid").status_code == 404
    assert client.get("/api/v1/nodes/no-such-uuid/attributes").status_code == 404
    assert client.get("/api/v1/nodes/no-such-uuid/links/incoming").status_code == 404


def test_attributes_and_extras_endpoints(client, profile):
    _, names = profile
    assert get_json(client, f"/api/v1/nodes/{names['D5']}/attributes") == {"value": 5}
    assert get_json(client, f"/api/v1/nodes/{names['D5']}/extras") == {}


def test_incoming_links_of_created_and_returned_node(client, profile):
    _, names = profile
    links = get_json(client, f"/api/v1/nodes/{names['D5']}/links/incoming")
    by_type = {l["type"]: l for l in links}
    assert set(by_type) == {"create", "return"}
    assert by_type["create"]["peer"]["uuid"] == names["C2"]
    assert by_type["create"]["label"] == "result"
    assert by_type["return"]["peer"]["uuid"] == names["W1"]
    assert by_type["return"]["peer"]["kind"] == "process.workflow.workchain"


def test_outgoing_links_carry_labels(client, profile):
    _, names = profile
    links = get_json(client, f"/api/v1/nodes/{names['D1']}/links/outgoing")
    got = {(l["type"], l["label"], l["peer"]["uuid"]) for l in links}
    assert got == {
        ("input_work", "x", names["W1"]),
        ("input_calc", "x", names["C1"]),
    }


def test_repo_listing_and_byte_exact_contents(client, profile):
    _, names = profile
    files = get_json(client, f"/api/v1/nodes/{names['folder']}/repo/list")
    assert files == ["raw/input.txt"]

    resp = client.get(
        f"/api/v1/nodes/{names['folder']}/repo/contents",
        params={"path": "raw/input.txt"},
    )
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "application/octet-stream"
    assert resp.content == RAW

    missing = client.get(
        f"/api/v1/nodes/{names['folder']}/repo/contents",
        params={"path": "raw/other.txt"},
    )
    assert missing.status_code == 404


# ------------------------------------------------------------- reports


def test_report_for_a_finished_chain(tmp_path):
    store = Store(tmp_path / "profile")
    node, outs = run_process(store, "enginetest.four_steps", x=Int(4))
    store.close()

    with TestClient(create_app(tmp_path / "profile")) as c:
        report = get_json(c, f"/api/v1/processes/{node.uuid}/report")
    assert report["state"] == "finished"
    assert report["exit_code"] == 0
    assert [s["step"] for s in report["steps"]] == ["s1", "s2", "s3", "s4"]
    assert all(s["worker_id"] == "inline" for s in report["steps"])
    assert report["history"][0]["new"] == "created"
    assert report["history"][-1]["new"] == "finished"
    assert report["checkpoint_version"] is not None
    assert report["retries"] == 0 and report["retry_log"] == []


def test_report_rejects_data_nodes(client, profile):
    _, names = profile
    assert client.get(f"/api/v1/processes/{names['D1']}/report").status_code == 404
    assert client.get("/api/v1/processes/nope/report").status_code == 404


# ------------------------------------------------------------- actions


@pytest.fixture()
def submitted(tmp_path):
    store = Store(tmp_path / "profile")
    node = submit(store, "enginetest.four_steps", x=Int(2))
    store.close()
    return tmp_path / "profile", node.uuid


def test_pause_play_kill_without_workers(submitted):
    path, uuid = submitted
    with TestClient(create_app(path)) as c:
        resp = c.post(f"/api/v1/processes/{uuid}/action",
                      json={"action": "pause", "reason": "operator hold"})
        assert resp.status_code == 200
        assert resp.json()["state"] == "paused"

        page = get_json(c, "/api/v1/nodes", filters=f'uuid=="{uuid}"')
        assert page["items"][0]["state"] == "paused"

        resp = c.post(f"/api/v1/processes/{uuid}/action", json={"action": "play"})
        assert resp.status_code == 200 and resp.json()["state"] == "running"

        resp = c.post(f"/api/v1/processes/{uuid}/action", json={"action": "kill"})
        assert resp.status_code == 200 and resp.json()["state"] == "killed"

    with Store(path) as store:
        assert states.state_of(store, uuid) == states.KILLED


def test_action_on_terminal_process_is_409(submitted):
    path, uuid = submitted
    with TestClient(create_app(path)) as c:
        c.post(f"/api/v1/processes/{uuid}/action", json={"action": "kill"})
        resp = c.post(f"/api/v1/processes/{uuid}/action", json={"action": "kill"})
        assert resp.status_code == 409


def test_action_target_must_be_a_process(client, profile):
    _, names = profile
    resp = client.post(f"/api/v1/processes/{names['D1']}/action",
                       json={"action": "pause"})
    assert resp.status_code == 404
    resp = client.post("/api/v1/processes/nope/action", json={"action": "kill"})
    assert resp.status_code == 404


def test_unknown_action_is_422(client, profile):
    _, names = profile
    resp = client.post(f"/api/v1/processes/{names['W1']}/action",
                       json={"action": "explode"})
    assert resp.status_code == 422


def test_read_only_mode_blocks_posts_keeps_reads(submitted):
    path, uuid = submitted
    with TestClient(create_app(path, read_only=True)) as c:
        resp = c.post(f"/api/v1/processes/{uuid}/action", json={"action": "pause"})
        assert resp.status_code == 403
        assert get_json(c, "/api/v1/nodes")["total"] > 0
        assert get_json(c, f"/api/v1/processes/{uuid}/report")["state"] == "created"


def test_daemon_status_when_down(client):
    doc = get_json(client, "/api/v1/daemon/status")
    assert doc["running"] is False
    assert doc["workers"] == []
    assert set(doc["queue"]) == {"pending", "claimed", "paused"}


# ----------------------------------------------- equivalence invariants


def clause_text(expr):
    if expr.op == "of_type":
        return f"{expr.path} of_type {expr.value}"
    if expr.op in ("in", "like", "has_key"):
        return f"{expr.path} {expr.op} {json.dumps(expr.value)}"
    return f"{expr.path}{expr.op}{json.dumps(expr.value)}"


def query_module_uuids(store, exprs):
    found = set()
    for kind in ("data", "process"):
        rows = QueryBuilder(store).append(
            kind, tag="n", filters=list(exprs), project=["uuid"]
        ).all()
        found.update(row[0] for row in rows)
    return found


@pytest.mark.parametrize("seed", range(10))
def test_rest_matches_query_module_on_random_filters(tmp_path, seed):
    rng = random.Random(3000 + seed)
    g, _ = random_dag_memory(rng, max_nodes=25)
    attrs = {u: _attr_choices(rng) for u in g.nodes()}
    store = store_from_memory(tmp_path / "p", g, attrs=attrs)

    exprs = [FilterExpr(**_filter_choices(rng)[0])
             for _ in range(rng.randint(1, 2))]
    want = query_module_uuids(store, exprs)
    store.close()

    text = ",".join(clause_text(e) for e in exprs)
    with TestClient(create_app(tmp_path / "p")) as c:
        page = get_json(c, "/api/v1/nodes", filters=text, limit=400)
    got = {item["uuid"] for item in page["items"]}
    assert got == want


def test_read_order_does_not_change_responses(client, profile):
    _, names = profile
    urls = [
        "/api/v1/nodes?filters=kind==data.int&limit=3",
        f"/api/v1/nodes/{names['D5']}",
        f"/api/v1/nodes/{names['D5']}/links/incoming",
        f"/api/v1/nodes/{names['W1']}/links/outgoing",
    ]
    first = {u: client.get(u).json() for u in urls}
    second = {u: client.get(u).json() for u in reversed(urls)}
    assert first == second
