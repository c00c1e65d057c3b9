import random

import pytest

from provflow.exceptions import LinkViolationError, NodeNotFoundError
from provflow.graph import (
    Link,
    LinkType,
    MemoryGraph,
    check_data_provenance_acyclic,
    validate_link,
)
from provflow.graph.links import CALL_TYPES, DATA_PROVENANCE_TYPES, INPUT_TYPES

from .helpers import seed_expression_graph


@pytest.fixture
def g():
    return MemoryGraph()


def test_input_link_on_empty_graph_ok(g):
    g.add_node("d", "data.int")
    g.add_node("c", "process.calculation.calcjob")
    assert validate_link(g, Link("d", "c", LinkType.INPUT_CALC, "x")) is None


def test_endpoint_kind_rules(g):
    g.add_node("d", "data.int")
    g.add_node("c", "process.calculation.calcjob")
    g.add_node("w", "process.workflow.workchain")
    bad = [
        ("c", "d", LinkType.INPUT_CALC),   # reversed direction
        ("d", "w", LinkType.INPUT_CALC),   # workflow target for calc input
        ("w", "d", LinkType.CREATE),       # workflows never create
        ("c", "d", LinkType.RETURN),       # calculations never return
        ("c", "c", LinkType.CALL_CALC),    # only workflows call
        ("d", "c", LinkType.CALL_CALC),
        ("w", "d", LinkType.CALL_WORK),
    ]
    for source, target, ltype in bad:
        violation = validate_link(g, Link(source, target, ltype, "a"))
        assert violation is not None and violation.rule == "endpoint-kinds"


def test_second_creator_rejected(g):
    g.add_node("c1", "process.calculation.calcjob")
    g.add_node("c2", "process.calculation.calcjob")
    g.add_node("d", "data.int")
    g.add_link("c1", "d", LinkType.CREATE, "out")
    violation = validate_link(g, Link("c2", "d", LinkType.CREATE, "other"))
    assert violation.rule == "creator-cardinality"
    with pytest.raises(LinkViolationError):
        g.add_link("c2", "d", LinkType.CREATE, "other")


def test_second_caller_rejected(g):
    g.add_node("w1", "process.workflow.workchain")
    g.add_node("w2", "process.workflow.workchain")
    g.add_node("c", "process.calculation.calcfunction")
    g.add_link("w1", "c", LinkType.CALL_CALC, "call0")
    violation = validate_link(g, Link("w2", "c", LinkType.CALL_CALC, "call1"))
    assert violation.rule == "caller-cardinality"


def test_duplicate_input_label_rejected(g):
    g.add_node("d1", "data.int")
    g.add_node("d2", "data.int")
    g.add_node("c", "process.calculation.calcjob")
    g.add_link("d1", "c", LinkType.INPUT_CALC, "x")
    violation = validate_link(g, Link("d2", "c", LinkType.INPUT_CALC, "x"))
    assert violation.rule == "label-uniqueness"
    # same data node under a different label is legitimate
    assert validate_link(g, Link("d1", "c", LinkType.INPUT_CALC, "y")) is None


def test_create_and_return_labels_unique_per_process(g):
    g.add_node("c", "process.calculation.calcjob")
    g.add_node("w", "process.workflow.workchain")
    for name, kind in [("da", "data.int"), ("db", "data.int")]:
        g.add_node(name, kind)
    g.add_link("c", "da", LinkType.CREATE, "result")
    assert (
        validate_link(g, Link("c", "db", LinkType.CREATE, "result")).rule
        == "label-uniqueness"
    )
    g.add_link("w", "da", LinkType.RETURN, "result")
    assert (
        validate_link(g, Link("w", "db", LinkType.RETURN, "result")).rule
        == "label-uniqueness"
    )


def test_dangling_endpoint_is_an_error_not_a_violation(g):
    g.add_node("d", "data.int")
    with pytest.raises(NodeNotFoundError):
        validate_link(g, Link("d", "ghost", LinkType.INPUT_CALC, "x"))
    with pytest.raises(NodeNotFoundError):
        validate_link(g, Link("ghost", "d", LinkType.CREATE, "x"))


def test_bad_label_syntax(g):
    g.add_node("d", "data.int")
    g.add_node("c", "process.calculation.calcjob")
    for label in ("", "UPPER", "has space", "x" * 256, "dash-ed"):
        violation = validate_link(g, Link("d", "c", LinkType.INPUT_CALC, label))
        assert violation is not None and violation.rule == "label-syntax"


def test_expression_fixture_is_acyclic(g):
    seed_expression_graph(g)
    assert check_data_provenance_acyclic(g, g.nodes()) is None


def test_workflow_returning_own_input_is_legal(g):
    g.add_node("d", "data.int")
    g.add_node("w", "process.workflow.workfunction")
    g.add_link("d", "w", LinkType.INPUT_WORK, "choice")
    g.add_link("w", "d", LinkType.RETURN, "selected")
    # the RETURN edge closes a directed cycle, but not in data provenance
    assert check_data_provenance_acyclic(g, g.nodes()) is None


def test_crafted_cycle_is_witnessed(g):
    g.add_node("d1", "data.int")
    g.add_node("d2", "data.int")
    g.add_node("c1", "process.calculation.calcjob")
    g.add_node("c2", "process.calculation.calcjob")
    g.add_link_unchecked("d1", "c1", LinkType.INPUT_CALC, "x")
    g.add_link_unchecked("c1", "d2", LinkType.CREATE, "out")
    g.add_link_unchecked("d2", "c2", LinkType.INPUT_CALC, "x")
    g.add_link_unchecked("c2", "d1", LinkType.CREATE, "out")
    witness = check_data_provenance_acyclic(g, g.nodes())
    assert witness is not None
    assert witness[0] == witness[-1]
    assert set(witness) <= {"d1", "d2", "c1", "c2"}
    assert len(witness) == 5


def test_insertion_rejects_cycle_closure(g):
    g.add_node("d1", "data.int")
    g.add_node("c1", "process.calculation.calcjob")
    g.add_node("d2", "data.int")
    g.add_link("d1", "c1", LinkType.INPUT_CALC, "x")
    g.add_link("c1", "d2", LinkType.CREATE, "out")
    g.add_node("c2", "process.calculation.calcjob")
    g.add_link("d2", "c2", LinkType.INPUT_CALC, "x")
    violation = validate_link(g, Link("c2", "d1", LinkType.CREATE, "out"))
    assert violation.rule == "acyclicity"


def _assert_counting_invariants(g: MemoryGraph):
    for node in g.nodes():
        incoming = g.links_to(node)
        assert sum(1 for l in incoming if l.type == LinkType.CREATE) <= 1
        assert sum(1 for l in incoming if l.type in CALL_TYPES) <= 1
        input_labels = [l.label for l in incoming if l.type in INPUT_TYPES]
        assert len(input_labels) == len(set(input_labels))


def test_random_insertion_sequences_preserve_invariants():
    # any sequence of validated insertions keeps the DAG guarantee
    for seed in range(60):
        rng = random.Random(seed)
        g = MemoryGraph()
        kinds = [
            "data.int",
            "process.calculation.calcjob",
            "process.workflow.workchain",
        ]
        names = [f"n{i}" for i in range(12)]
        for name in names:
            g.add_node(name, rng.choice(kinds))
        for _ in range(40):
            try:
                g.add_link(
                    rng.choice(names),
                    rng.choice(names),
                    rng.choice(list(LinkType)),
                    f"l{rng.randint(0, 4)}",
                )
            except LinkViolationError:
                pass
        assert check_data_provenance_acyclic(g, g.nodes()) is None
        _assert_counting_invariants(g)


def test_validation_is_order_independent():
    base = MemoryGraph()
    names = seed_expression_graph(base)
    link_set = list(base.links)
    for seed in range(20):
        rng = random.Random(seed)
        shuffled = link_set[:]
        rng.shuffle(shuffled)
        g = MemoryGraph()
        for name, kind in [(u, base.kind_of(u)) for u in base.nodes()]:
            g.add_node(name, kind)
        for link in shuffled:
            g.add_link(link.source, link.target, link.type, link.label)
        assert len(g.links) == len(link_set)
    assert names["W1"] in base.nodes()
