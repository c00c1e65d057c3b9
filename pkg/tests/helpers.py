"""Shared fixture builders and independent oracles.

The oracles here (brute-force reachability, exhaustive embedding
enumeration) deliberately avoid the library's own query/traversal code
paths so they can vouch for them.
"""

from __future__ import annotations

import random
from collections import defaultdict, deque

from provflow.graph import Link, LinkType, MemoryGraph
from provflow.graph.links import DATA_PROVENANCE_TYPES


def seed_expression_graph(g, prefix=""):
    """The worked expression example: W1 computes (x+y)*z through C1, C2.

    W1 takes D1, D2, D3; calls C1 (sum -> D4) and C2 (product -> D5);
    returns D5. Returns a name->uuid map.
    """
    n = {}
    for name, kind in [
        ("D1", "data.int"),
        ("D2", "data.int"),
        ("D3", "data.int"),
        ("D4", "data.int"),
        ("D5", "data.int"),
        ("C1", "process.calculation.calcjob"),
        ("C2", "process.calculation.calcjob"),
        ("W1", "process.workflow.workchain"),
    ]:
        n[name] = g.add_node(prefix + name, kind)
    g.add_link(n["D1"], n["W1"], LinkType.INPUT_WORK, "x")
    g.add_link(n["D2"], n["W1"], LinkType.INPUT_WORK, "y")
    g.add_link(n["D3"], n["W1"], LinkType.INPUT_WORK, "z")
    g.add_link(n["W1"], n["C1"], LinkType.CALL_CALC, "sum")
    g.add_link(n["W1"], n["C2"], LinkType.CALL_CALC, "product")
    g.add_link(n["D1"], n["C1"], LinkType.INPUT_CALC, "x")
    g.add_link(n["D2"], n["C1"], LinkType.INPUT_CALC, "y")
    g.add_link(n["C1"], n["D4"], LinkType.CREATE, "result")
    g.add_link(n["D4"], n["C2"], LinkType.INPUT_CALC, "x")
    g.add_link(n["D3"], n["C2"], LinkType.INPUT_CALC, "y")
    g.add_link(n["C2"], n["D5"], LinkType.CREATE, "result")
    g.add_link(n["W1"], n["D5"], LinkType.RETURN, "result")
    return n


def reachable_with_depth(edges, start, forward=True):
    """BFS oracle over explicit (source, target) pairs: minimal hop counts.

    Independent of the library: plain adjacency dict + deque.
    """
    adj = defaultdict(list)
    for s, t in edges:
        if forward:
            adj[s].append(t)
        else:
            adj[t].append(s)
    depths = {}
    queue = deque([(start, 0)])
    seen = {start}
    while queue:
        node, d = queue.popleft()
        for other in adj[node]:
            if other not in seen:
                seen.add(other)
                depths[other] = d + 1
                queue.append((other, d + 1))
    return depths


def data_provenance_edges(graph_like):
    """(source, target) pairs of the {INPUT_CALC, CREATE} subgraph."""
    out = []
    for link in iter_all_links(graph_like):
        if link.type in DATA_PROVENANCE_TYPES:
            out.append((link.source, link.target))
    return out


def iter_all_links(graph_like):
    if isinstance(graph_like, MemoryGraph):
        return list(graph_like.links)
    return list(graph_like.all_links())


def random_dag_memory(rng: random.Random, max_nodes=60):
    """A random valid provenance graph built through validated insertion."""
    g = MemoryGraph()
    kinds = [
        "data.int",
        "data.dict",
        "process.calculation.calcjob",
        "process.calculation.calcfunction",
        "process.workflow.workchain",
    ]
    n_nodes = rng.randint(4, max_nodes)
    names = []
    for i in range(n_nodes):
        uid = f"n{i:04d}"
        g.add_node(uid, rng.choice(kinds))
        names.append(uid)
    n_attempts = rng.randint(n_nodes, n_nodes * 3)
    inserted = 0
    for k in range(n_attempts):
        s, t = rng.choice(names), rng.choice(names)
        ltype = rng.choice(list(LinkType))
        label = f"l{rng.randint(0, 9)}"
        try:
            g.add_link(s, t, ltype, label)
            inserted += 1
        except Exception:
            continue
    return g, inserted


def enumerate_embeddings(nodes, links, patterns):
    """Exhaustive homomorphic pattern-match enumerator.

    ``nodes``: list of dicts with id, uuid, kind plus arbitrary properties.
    ``links``: list of Link. ``patterns``: list of dicts with keys
    kind_prefix, predicate(node)->bool, relation (None or
    (mode, tag_index, edge_predicate)). Returns list of tuples of node
    dicts, ordered by (id per tag).

    Uses raw itertools-style nested loops over every candidate tuple: the
    cost is |V|^k, fine for the <=30 node graphs it is used on.
    """
    by_uuid = {n["uuid"]: n for n in nodes}
    out_links = defaultdict(list)
    in_links = defaultdict(list)
    for l in links:
        out_links[l.source].append(l)
        in_links[l.target].append(l)

    dp_edges = [(l.source, l.target) for l in links if l.type in DATA_PROVENANCE_TYPES]

    def kind_matches(kind, prefix):
        kp = kind.split(".")
        pp = prefix.split(".")
        return kp[: len(pp)] == pp

    def candidates(pat):
        found = [
            n
            for n in nodes
            if kind_matches(n["kind"], pat["kind_prefix"])
            and pat.get("predicate", lambda _: True)(n)
        ]
        return sorted(found, key=lambda n: n["id"])

    results = []

    def extend(bound):
        k = len(bound)
        if k == len(patterns):
            results.append(tuple(bound))
            return
        pat = patterns[k]
        for cand in candidates(pat):
            rel = pat.get("relation")
            if rel is not None:
                mode, tag_index, edge_pred = rel
                other = bound[tag_index]
                if mode == "with_outgoing":
                    edges = [
                        l
                        for l in out_links[cand["uuid"]]
                        if l.target == other["uuid"] and (edge_pred or (lambda _: True))(l)
                    ]
                    if not edges:
                        continue
                elif mode == "with_incoming":
                    edges = [
                        l
                        for l in in_links[cand["uuid"]]
                        if l.source == other["uuid"] and (edge_pred or (lambda _: True))(l)
                    ]
                    if not edges:
                        continue
                elif mode == "with_ancestors":
                    anc = reachable_with_depth(dp_edges, cand["uuid"], forward=False)
                    if other["uuid"] not in anc:
                        continue
                elif mode == "with_descendants":
                    desc = reachable_with_depth(dp_edges, cand["uuid"], forward=True)
                    if other["uuid"] not in desc:
                        continue
                else:
                    raise AssertionError(mode)
            extend(bound + [cand])

    extend([])
    return results


# -- store-backed fixtures ---------------------------------------------------


def store_from_memory(path, g, attrs=None, labels=None, extras=None):
    """Mirror an in-memory graph into a fresh Store at ``path``."""
    from provflow.graph.nodes import Node
    from provflow.store import Store

    store = Store(path)
    for uuid in g.nodes():
        store.store_node(
            Node(
                g.kind_of(uuid),
                uuid=uuid,
                attributes=(attrs or {}).get(uuid, {}),
                label=(labels or {}).get(uuid, ""),
                extras=(extras or {}).get(uuid, {}),
            )
        )
    for link in g.links:
        store.insert_link(link)
    return store


def seed_structure_pipeline(store):
    """Two-step pipeline over structure-like data.

    S1 feeds a relax calculation producing S2 and a dict; S2 feeds an
    scf calculation producing a dict; S1 and S2 both feed a distance
    calculation producing a dict. The pattern structure -> calculation
    -> dict embeds exactly four times.
    """
    from provflow.graph.kinds import register_kind
    from provflow.graph.nodes import Node

    register_kind("data.structure")
    n = {}

    def add(name, kind, incoming=(), **kw):
        node = Node(kind, **kw)
        store.store_node(node, incoming=incoming)
        n[name] = node
        return node

    add("S1", "data.structure")
    add("C_relax", "process.calculation.calcjob",
        [(n["S1"].uuid, LinkType.INPUT_CALC, "structure")])
    add("S2", "data.structure", [(n["C_relax"].uuid, LinkType.CREATE, "structure")])
    add("D1", "data.dict", [(n["C_relax"].uuid, LinkType.CREATE, "parameters")])
    add("C_scf", "process.calculation.calcjob",
        [(n["S2"].uuid, LinkType.INPUT_CALC, "structure")])
    add("D2", "data.dict", [(n["C_scf"].uuid, LinkType.CREATE, "parameters")])
    add("C_dist", "process.calculation.calcjob",
        [(n["S1"].uuid, LinkType.INPUT_CALC, "first"),
         (n["S2"].uuid, LinkType.INPUT_CALC, "second")])
    add("D3", "data.dict", [(n["C_dist"].uuid, LinkType.CREATE, "distance")])
    return n


def seed_threshold_pipeline(store):
    """Code + parameter dicts feeding calc jobs that emit result dicts.

    Two runs are tagged type=relax (thresholds 0.1 / 0.01, energies
    -1.5 / -2.5 under the edge label ``results``), one is type=scf and
    must not match threshold queries.
    """
    from provflow.graph.nodes import Node

    code = Node("data.code", label="my_code")
    store.store_node(code)
    runs = [("relax", 0.1, -1.5), ("relax", 0.01, -2.5), ("scf", 0.5, -9.0)]
    made = []
    for variant, threshold, energy in runs:
        params = Node(
            "data.dict", attributes={"type": variant, "threshold": threshold}
        )
        store.store_node(params)
        calc = Node("process.calculation.calcjob")
        store.store_node(
            calc,
            incoming=[
                (code.uuid, LinkType.INPUT_CALC, "code"),
                (params.uuid, LinkType.INPUT_CALC, "parameters"),
            ],
        )
        result = Node("data.dict", attributes={"energy": energy})
        store.store_node(result, incoming=[(calc.uuid, LinkType.CREATE, "results")])
        made.append((params, calc, result))
    return code, made


# -- randomized query cases (shared with the acceptance run) ----------------


def _attr_choices(rng):
    name = rng.choice(["alpha", "beta", "fib_result", "gamma"])
    return rng.choice(
        [
            {},
            {"value": rng.randint(-3, 3)},
            {"value": rng.uniform(-2, 2)},
            {"value": rng.randint(-3, 3), "name": name},
            {"name": name, "nested": {"deep": rng.randint(0, 2)}},
            {"flags": [rng.randint(0, 1) for _ in range(3)]},
        ]
    )


def _resolve(rec, path):
    current = rec
    for part in path.split("."):
        if not isinstance(current, dict) or part not in current:
            return None, False
        current = current[part]
    return current, True


def _filter_choices(rng):
    """(FilterExpr-kwargs, independent predicate) pairs."""

    def eq_value(k):
        def pred(rec):
            v, ok = _resolve(rec, "attributes.value")
            return ok and not isinstance(v, bool) and v == k

        return {"path": "attributes.value", "op": "==", "value": k}, pred

    def gt_zero():
        def pred(rec):
            v, ok = _resolve(rec, "attributes.value")
            return ok and isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0

        return {"path": "attributes.value", "op": ">", "value": 0}, pred

    def name_like():
        def pred(rec):
            v, ok = _resolve(rec, "attributes.name")
            return ok and isinstance(v, str) and v.startswith("fib")

        return {"path": "attributes.name", "op": "like", "value": "fib%"}, pred

    def name_in():
        def pred(rec):
            v, ok = _resolve(rec, "attributes.name")
            return ok and v in ("alpha", "beta")

        return {"path": "attributes.name", "op": "in", "value": ["alpha", "beta"]}, pred

    def has_value():
        def pred(rec):
            v, ok = _resolve(rec, "attributes")
            return ok and isinstance(v, dict) and "value" in v

        return {"path": "attributes", "op": "has_key", "value": "value"}, pred

    def value_is_int():
        def pred(rec):
            v, ok = _resolve(rec, "attributes.value")
            return ok and isinstance(v, int) and not isinstance(v, bool)

        return {"path": "attributes.value", "op": "of_type", "value": "int"}, pred

    def deep_lt():
        def pred(rec):
            v, ok = _resolve(rec, "attributes.nested.deep")
            return ok and isinstance(v, (int, float)) and not isinstance(v, bool) and v < 2

        return {"path": "attributes.nested.deep", "op": "<", "value": 2}, pred

    pick = rng.choice(
        [lambda: eq_value(rng.randint(-2, 2)), gt_zero, name_like, name_in,
         has_value, value_is_int, deep_lt]
    )
    return pick()


def random_query_case(seed, base_dir):
    """One randomized store + equivalent (plan, oracle-patterns) pair.

    Caller owns closing the returned store.
    """
    from provflow.query.plan import QueryPlan

    rng = random.Random(seed)
    g, _ = random_dag_memory(rng, max_nodes=30)
    attrs = {u: _attr_choices(rng) for u in g.nodes()}
    store = store_from_memory(f"{base_dir}/case{seed}", g, attrs=attrs)

    kinds = ["data", "data.int", "data.dict", "process",
             "process.calculation", "process.workflow"]
    plan = QueryPlan()
    oracle_patterns = []
    n_patterns = rng.randint(1, 3)
    for i in range(n_patterns):
        kind = rng.choice(kinds)
        specs = [_filter_choices(rng) for _ in range(rng.randint(0, 2))]
        filters = [s[0] for s in specs]
        preds = [s[1] for s in specs]

        relation_kwargs = {}
        oracle_rel = None
        if i and rng.random() < 0.8:
            ref = rng.randrange(i)
            mode = rng.choice(
                ["with_outgoing", "with_incoming", "with_ancestors", "with_descendants"]
            )
            relation_kwargs = {mode: f"t{ref}"}
            edge_pred = None
            if mode in ("with_outgoing", "with_incoming") and rng.random() < 0.5:
                wanted = rng.choice(["l0", "l1", "l2"])
                relation_kwargs["edge_filters"] = [
                    {"path": "label", "op": "==", "value": wanted}
                ]
                edge_pred = lambda l, w=wanted: l.label == w
            oracle_rel = (mode, ref, edge_pred)

        plan.append(kind, tag=f"t{i}", filters=filters, **relation_kwargs)
        oracle_patterns.append(
            {
                "kind_prefix": kind,
                "predicate": lambda rec, ps=preds: all(p(rec) for p in ps),
                "relation": oracle_rel,
            }
        )
    return store, plan, oracle_patterns
