"""Process flavors: calculation/work functions, work chains, calc jobs."""

from provflow.processes.calcjob import CalcJob
from provflow.processes.computers import Computer, get_computer, register_computer
from provflow.processes.context import use_store
from provflow.processes.functions import calcfunction, workfunction
from provflow.processes.registry import (
    all_processes,
    get_process,
    register_workchain,
)
from provflow.processes.runtime import InlineRuntime, run_process
from provflow.processes.spec import If, ProcessSpec, Step, While, if_, while_
from provflow.processes.workchain import (
    Await,
    Continue,
    Done,
    Paused,
    Wait,
    WorkChain,
)
from provflow.processes import builtins  # noqa: F401  registers stock processes

__all__ = [
    "Await",
    "CalcJob",
    "Computer",
    "Continue",
    "Done",
    "If",
    "InlineRuntime",
    "Paused",
    "ProcessSpec",
    "Step",
    "Wait",
    "WorkChain",
    "While",
    "all_processes",
    "calcfunction",
    "get_computer",
    "get_process",
    "if_",
    "register_computer",
    "register_workchain",
    "run_process",
    "use_store",
    "while_",
    "workfunction",
]
