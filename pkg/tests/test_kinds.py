import pytest

from provflow.exceptions import UnknownKindError
from provflow.graph import KindRegistry, is_a, register_kind


def test_workchain_is_a_workflow():
    assert is_a("process.workflow.workchain", "process.workflow")
    assert is_a("process.workflow.workfunction", "process.workflow")


def test_is_a_reflexive():
    assert is_a("data.int", "data.int")


def test_disjoint_roots():
    assert not is_a("data.int", "process")
    assert not is_a("process.calculation.calcjob", "data")


def test_is_a_segment_boundaries():
    reg = KindRegistry()
    reg.register("data.intx")
    assert not reg.is_a("data.intx", "data.int")


def test_unknown_kind_errors():
    with pytest.raises(UnknownKindError):
        is_a("data.nosuch", "data")
    with pytest.raises(UnknownKindError):
        is_a("data.int", "data.nosuch")


def test_register_rejects_bad_roots():
    reg = KindRegistry()
    with pytest.raises(UnknownKindError):
        reg.register("thing.int")
    with pytest.raises(UnknownKindError):
        reg.register("process.other.x")
    with pytest.raises(UnknownKindError):
        reg.register("data.UPPER")


def test_register_extension_kind():
    name = register_kind("data.structure")
    assert is_a(name, "data")


def test_every_process_kind_under_calculation_or_workflow():
    reg = KindRegistry()
    for kind in reg.all_kinds():
        if kind.startswith("process.") and kind != "process":
            assert reg.is_calculation(kind) or reg.is_workflow(kind)
