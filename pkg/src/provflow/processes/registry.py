"""Registry of runnable process definitions.

Every process flavor registers under a stable string id; the engine
resolves checkpoints back to definitions through this table, so ids must
stay stable across restarts.
"""

from __future__ import annotations

import inspect
import re
from dataclasses import dataclass
from typing import Callable, Optional

from provflow.exceptions import SpecValidationError
from provflow.processes.spec import ProcessSpec

_ID_RE = re.compile(r"^[a-z0-9_.]{1,120}$")

FLAVOR_KINDS = {
    "calcfunction": "process.calculation.calcfunction",
    "workfunction": "process.workflow.workfunction",
    "workchain": "process.workflow.workchain",
    "calcjob": "process.calculation.calcjob",
}


@dataclass
class ProcessDefinition:
    id: str
    flavor: str  # calcfunction | workfunction | workchain | calcjob
    target: object  # the callable or the class
    spec: ProcessSpec

    @property
    def node_kind(self) -> str:
        return FLAVOR_KINDS[self.flavor]

    def source_text(self) -> Optional[str]:
        try:
            return inspect.getsource(self.target)
        except (OSError, TypeError):
            return None


_REGISTRY: dict[str, ProcessDefinition] = {}


def register(defn: ProcessDefinition) -> ProcessDefinition:
    if not _ID_RE.match(defn.id):
        raise SpecValidationError(f"bad process id {defn.id!r}")
    existing = _REGISTRY.get(defn.id)
    if existing is not None and existing.target is not defn.target:
        raise SpecValidationError(f"process id {defn.id!r} already registered")
    _REGISTRY[defn.id] = defn
    return defn


def get_process(ref) -> ProcessDefinition:
    """Resolve an id, a registered callable/class, or a definition."""
    if isinstance(ref, ProcessDefinition):
        return ref
    defn = getattr(ref, "_process_definition", None)
    if isinstance(defn, ProcessDefinition):
        return defn
    if isinstance(ref, str) and ref in _REGISTRY:
        return _REGISTRY[ref]
    raise SpecValidationError(f"unknown process {ref!r}")


def all_processes() -> dict[str, ProcessDefinition]:
    return dict(_REGISTRY)


def function_definition(fn: Callable, flavor: str, id: Optional[str], spec: Optional[ProcessSpec]):
    """Build + register the definition for a process function."""
    if id is None:
        id = fn.__name__
    if spec is None:
        spec = ProcessSpec()
        for name, param in inspect.signature(fn).parameters.items():
            if param.kind in (param.VAR_POSITIONAL, param.VAR_KEYWORD):
                continue
            spec.input(name, "data", required=param.default is param.empty)
    return register(ProcessDefinition(id, flavor, fn, spec))


def register_workchain(cls):
    """Class decorator wiring a chain's define() into the registry."""
    spec = ProcessSpec()
    cls.define(spec)
    process_id = getattr(cls, "id", None)
    if not process_id:
        raise SpecValidationError(f"{cls.__name__} needs a class-level id")
    missing = [n for n in spec.step_names() if not callable(getattr(cls, n, None))]
    if missing:
        raise SpecValidationError(f"outline references undefined steps: {missing}")
    flavor = "calcjob" if getattr(cls, "_is_calcjob", False) else "workchain"
    defn = register(ProcessDefinition(process_id, flavor, cls, spec))
    cls._process_definition = defn
    return cls
