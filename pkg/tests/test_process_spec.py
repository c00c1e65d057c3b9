"""Process declarations and the outline interpreter.

The interpreter's step sequencing is checked against an oracle that
executes the same outline with plain Python control flow, consuming the
same scripted predicate decisions. Both sides see identical decision
streams, so any divergence in visit order is the interpreter's fault.
"""

import random

import pytest

from provflow.exceptions import CheckpointError, SpecValidationError, UnknownKindError
from provflow.graph.factories import Int, Str
from provflow.processes import (
    InlineRuntime,
    ProcessSpec,
    WorkChain,
    register_workchain,
    run_process,
)
from provflow.processes.registry import (
    ProcessDefinition,
    all_processes,
    function_definition,
    get_process,
    register,
)
from provflow.processes.spec import If, Step, While, if_, while_
from provflow.processes.workchain import (
    ChainDriver,
    Done,
    decode_checkpoint,
    decode_value,
    encode_checkpoint,
    encode_value,
    instruction_at,
    route,
    successor,
)
from provflow.store import Store


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "profile")
    yield s
    s.close()


# ---------------------------------------------------------------- ports


def test_spec_ports_and_validation():
    spec = ProcessSpec()
    spec.input("n", "data.int")
    spec.input("mode", "data.str", required=False)
    spec.output("result", "data.int")

    spec.validate_inputs({"n": Int(3)})
    spec.validate_inputs({"n": Int(3), "mode": Str("fast")})

    with pytest.raises(SpecValidationError):
        spec.validate_inputs({})  # n missing
    with pytest.raises(SpecValidationError):
        spec.validate_inputs({"n": Int(3), "bogus": Int(1)})
    with pytest.raises(SpecValidationError):
        spec.validate_inputs({"n": 3})  # not a node
    with pytest.raises(SpecValidationError):
        spec.validate_inputs({"n": Str("three")})


def test_spec_rejects_duplicate_and_unknown_ports():
    spec = ProcessSpec()
    spec.input("x")
    with pytest.raises(SpecValidationError):
        spec.input("x")
    with pytest.raises(UnknownKindError):
        spec.output("y", "data.not_a_kind")


def test_describe_renders_nested_outline():
    spec = ProcessSpec()
    spec.input("n", "data.int", help="how many")
    spec.output("result", "data.int")
    spec.outline(
        Step("setup"),
        while_("more", Step("work"), if_("lucky", Step("bonus"))),
        Step("finish"),
    )
    text = spec.describe("demo")
    assert "while more:" in text
    assert "if lucky:" in text
    assert text.index("setup") < text.index("work") < text.index("finish")
    assert "how many" in text


def test_empty_blocks_rejected():
    with pytest.raises(SpecValidationError):
        while_("p")
    with pytest.raises(SpecValidationError):
        if_("p")


# -------------------------------------------------------------- registry


def test_registry_roundtrip_and_conflicts():
    def plain(x):
        return None

    defn = function_definition(plain, "calcfunction", id="spec_test.plain", spec=None)
    assert get_process("spec_test.plain") is defn
    assert "spec_test.plain" in all_processes()
    # same target again is fine (module reimport), another target is not
    function_definition(plain, "calcfunction", id="spec_test.plain", spec=None)
    with pytest.raises(SpecValidationError):
        function_definition(lambda x: None, "calcfunction", id="spec_test.plain", spec=None)
    with pytest.raises(SpecValidationError):
        get_process("never.registered")
    with pytest.raises(SpecValidationError):
        register(ProcessDefinition("Bad Id!", "calcfunction", plain, ProcessSpec()))


def test_workchain_registration_checks_steps():
    with pytest.raises(SpecValidationError) as err:

        @register_workchain
        class Gappy(WorkChain):
            id = "spec_test.gappy"

            @classmethod
            def define(cls, spec):
                spec.outline(Step("no_such_method"))

    assert "no_such_method" in str(err.value)

    with pytest.raises(SpecValidationError):

        @register_workchain
        class NoId(WorkChain):
            @classmethod
            def define(cls, spec):
                spec.outline(Step("go"))

            def go(self):
                pass


# ------------------------------------------------- outline interpretation


def oracle_visits(outline, decisions):
    """Reference semantics: run the outline with Python control flow.

    ``decisions`` scripts predicate results in evaluation order; an
    exhausted script reads as False so every run terminates.
    """
    script = iter(decisions)
    visited = []

    def test(_name):
        return next(script, False)

    def walk(block):
        for instr in block:
            if isinstance(instr, Step):
                visited.append(instr.name)
            elif isinstance(instr, While):
                while test(instr.predicate):
                    walk(instr.body)
            else:
                if test(instr.predicate):
                    walk(instr.then)
                elif instr.orelse:
                    walk(instr.orelse)

    walk(outline)
    return visited


def interpreter_visits(outline, decisions):
    """Same run, but through the pc/route/successor machinery."""
    script = iter(decisions)
    visited = []
    pc = [0] if outline else None
    while True:
        pc = route(outline, pc, lambda name: next(script, False))
        if pc is None:
            return visited
        step = instruction_at(outline, pc)
        assert isinstance(step, Step)
        visited.append(step.name)
        pc = successor(outline, pc)


def random_outline(rng, depth=0):
    """1-4 instructions; loops and branches get rarer with depth."""
    block = []
    for i in range(rng.randint(1, 4)):
        roll = rng.random() + depth * 0.35
        if roll < 0.25:
            block.append(While(f"p{depth}_{i}", tuple(random_outline(rng, depth + 1))))
        elif roll < 0.5:
            orelse = tuple(random_outline(rng, depth + 1)) if rng.random() < 0.5 else ()
            block.append(If(f"q{depth}_{i}", tuple(random_outline(rng, depth + 1)), orelse))
        else:
            block.append(Step(f"s{depth}_{i}"))
    return block


@pytest.mark.parametrize("seed", range(40))
def test_interpreter_matches_oracle(seed):
    rng = random.Random(seed)
    outline = tuple(random_outline(rng))
    # biased towards True so loops actually loop; finite so runs end
    decisions = [rng.random() < 0.6 for _ in range(40)]
    assert interpreter_visits(outline, decisions) == oracle_visits(outline, decisions)


def test_interpreter_specific_shapes():
    w = While("p", (Step("a"), Step("b")))
    outline = (Step("pre"), w, Step("post"))
    # two loop turns
    assert interpreter_visits(outline, [True, True, False]) == oracle_visits(
        outline, [True, True, False]
    ) == ["pre", "a", "b", "a", "b", "post"]
    # loop never taken
    assert interpreter_visits(outline, [False]) == ["pre", "post"]

    cond = If("q", (Step("yes"),), (Step("no"),))
    outline = (cond, Step("end"))
    assert interpreter_visits(outline, [True]) == ["yes", "end"]
    assert interpreter_visits(outline, [False]) == ["no", "end"]

    # nested: while containing an if with no else
    outline = (While("p", (Step("w"), If("q", (Step("t"),)))),)
    assert interpreter_visits(outline, [True, True, True, False, False]) == [
        "w",
        "t",
        "w",
    ] == oracle_visits(outline, [True, True, True, False, False])


def test_instruction_path_errors():
    outline = (Step("only"),)
    with pytest.raises(CheckpointError):
        instruction_at(outline, [0, 1])  # descends into a plain step


# --------------------------------------------------- checkpoint encoding


def test_checkpoint_bytes_are_stable():
    doc = {
        "format": 1,
        "flavor": "workchain",
        "process_id": "demo.chain",
        "pc": [1, 0],
        "awaiting": [],
        "ctx": {"$map": {"count": 2, "name": "x"}},
    }
    payload = encode_checkpoint(doc)
    assert payload == (
        b'{"awaiting":[],"ctx":{"$map":{"count":2,"name":"x"}},'
        b'"flavor":"workchain","format":1,"pc":[1,0],'
        b'"process_id":"demo.chain"}'
    )
    assert decode_checkpoint(payload) == doc


def test_checkpoint_rejects_garbage():
    with pytest.raises(CheckpointError):
        decode_checkpoint(b"\x00\xff")
    with pytest.raises(CheckpointError):
        decode_checkpoint(b'{"format": 99}')


def test_context_value_roundtrip(store):
    node = store.store_node(Int(5))
    value = {
        "n": 3,
        "node": node,
        "nested": {"deep": [1, "two", node]},
        "flags": [True, None, 2.5],
    }
    encoded = encode_value(value)
    decoded = decode_value(encoded, store)
    assert decoded["n"] == 3
    assert decoded["node"].uuid == node.uuid
    assert decoded["nested"]["deep"][2].uuid == node.uuid
    assert decoded["flags"] == [True, None, 2.5]


def test_context_keys_cannot_collide_with_markers(store):
    node = store.store_node(Int(1))
    tricky = {"$node": "not really", "$map": {"x": 1}}
    decoded = decode_value(encode_value(tricky), store)
    assert decoded == tricky


def test_unstorable_context_values_rejected(store):
    with pytest.raises(CheckpointError):
        encode_value(Int(1))  # unstored node
    with pytest.raises(CheckpointError):
        encode_value({"bad": object()})
    with pytest.raises(CheckpointError):
        decode_value({"$weird": 1}, store)


# ----------------------------------------- stepwise resume across drivers


@register_workchain
class CountdownChain(WorkChain):
    id = "spec_test.countdown"

    @classmethod
    def define(cls, spec):
        spec.input("n", "data.int")
        spec.outline(cls.setup, while_(cls.more, cls.step_down), cls.wrap_up)

    def setup(self):
        self.ctx.left = self.inputs["n"].attributes["value"]
        self.ctx.trace = []

    def more(self):
        return self.ctx.left > 0

    def step_down(self):
        self.ctx.left -= 1
        self.ctx.trace = self.ctx.trace + ["tick"]

    def wrap_up(self):
        self.ctx.trace = self.ctx.trace + ["done"]


def test_chain_survives_driver_handoff_between_every_step(store):
    """A fresh driver per tick (as after a crash) must not skip or redo."""
    from provflow.processes.factory import new_process_node

    defn = get_process("spec_test.countdown")
    runtime = InlineRuntime(store)
    node = new_process_node(store, defn, {"n": store.store_node(Int(3))})

    ticks = 0
    while True:
        driver = ChainDriver(store, node, runtime, worker_id=f"w{ticks}")
        outcome = driver.tick()
        ticks += 1
        if isinstance(outcome, Done):
            break
        assert ticks < 50

    assert outcome.state == "finished"
    _, payload = store.load_checkpoint(node.uuid)
    ctx = decode_checkpoint(payload)["ctx"]["$map"]
    assert ctx["trace"] == ["tick", "tick", "tick", "done"]
    # setup + 3 loop turns + wrap_up, each exactly once
    rows = store.db.execute(
        "SELECT step FROM steplog WHERE process_uuid = ? ORDER BY id",
        (node.uuid,),
    ).fetchall()
    assert [r["step"] for r in rows] == [
        "setup",
        "step_down",
        "step_down",
        "step_down",
        "wrap_up",
    ]


def test_inline_run_matches_stepwise(store):
    node, _ = run_process(store, "spec_test.countdown", n=Int(2))
    rows = store.db.execute(
        "SELECT step FROM steplog WHERE process_uuid = ? ORDER BY id",
        (node.uuid,),
    ).fetchall()
    assert [r["step"] for r in rows] == ["setup", "step_down", "step_down", "wrap_up"]
