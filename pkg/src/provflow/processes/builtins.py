"""Ready-made processes: arithmetic building blocks and demo chains.

Workers import this module on startup, so anything registered here can
be submitted by id from any client.
"""

from __future__ import annotations

from provflow.graph.factories import Int, value_of
from .calcjob import CalcJob
from .functions import calcfunction
from .registry import register_workchain
from .spec import while_
from .workchain import WorkChain


@calcfunction(id="add")
def add(x, y):
    """Sum of two integer nodes."""
    return Int(value_of(x) + value_of(y))


@calcfunction(id="double")
def double(x):
    return Int(2 * value_of(x))


@register_workchain
class Fibonacci(WorkChain):
    """Iterative Fibonacci: n=1 gives 1, n=5 gives 5, n=10 gives 55.

    Each iteration is one checkpointed step running one recorded
    addition, so the final number carries the full trail of how it was
    computed.
    """

    id = "fibonacci"

    @classmethod
    def define(cls, spec):
        spec.input("n", "data.int", help="sequence index, starting at 1")
        spec.output("result", "data.int")
        spec.outline(
            cls.init_seq,
            while_(cls.should_iterate, cls.iterate),
            cls.finalize,
        )

    def init_seq(self):
        self.ctx.iteration = 0
        self.ctx.previous = self.store_data(Int(0))
        self.ctx.current = self.store_data(Int(1))

    def should_iterate(self):
        return self.ctx.iteration < value_of(self.inputs["n"]) - 1

    def iterate(self):
        total = add(self.ctx.previous, self.ctx.current)
        self.ctx.previous = self.ctx.current
        self.ctx.current = total
        self.ctx.iteration += 1

    def finalize(self):
        self.out("result", self.ctx.current)


class ArithmeticAddJob(CalcJob):
    """Adds two integers by way of a shell script on a computer.

    Deliberately tiny, but it exercises the whole job path: file
    staging, scheduler submission, status polling, retrieval, parsing.
    """

    id = "arithmetic_add"
    retrieve = ("sum.out",)

    # parser exit code when the script left no result behind
    EXIT_MISSING_OUTPUT = 2

    @classmethod
    def define(cls, spec):
        spec.input("x", "data.int")
        spec.input("y", "data.int")
        spec.output("sum", "data.int")

    def prepare(self, inputs):
        x = value_of(inputs["x"])
        y = value_of(inputs["y"])
        script = (
            "#!/bin/sh\n"
            "#PSEUDO walltime=60 cores=1\n"
            f"echo $(({x} + {y})) > sum.out\n"
        )
        return {self.script_name: script.encode()}

    def parse(self, retrieved):
        if "sum.out" not in retrieved:
            return self.EXIT_MISSING_OUTPUT, {}
        return 0, {"sum": Int(int(retrieved["sum.out"].strip()))}


register_workchain(ArithmeticAddJob)


class EchoJob(CalcJob):
    """No-output job for throughput measurements."""

    id = "echo_job"
    retrieve = ()

    @classmethod
    def define(cls, spec):
        spec.input("tag", "data.str", required=False)

    def prepare(self, inputs):
        script = "#!/bin/sh\n#PSEUDO walltime=30 cores=1\necho ok\n"
        return {self.script_name: script.encode()}

    def parse(self, retrieved):
        return 0, {}


register_workchain(EchoJob)


@register_workchain
class AddChain(WorkChain):
    """Job plus function under one workflow; the standard bench unit.

    Submits an addition job, doubles its result with a recorded
    function, and returns the doubled value.
    """

    id = "add_chain"

    @classmethod
    def define(cls, spec):
        spec.input("x", "data.int")
        spec.input("y", "data.int")
        spec.output("total", "data.int")
        spec.outline(cls.run_job, cls.summarize)

    def run_job(self):
        self.ctx.job = self.submit(
            "arithmetic_add", x=self.inputs["x"], y=self.inputs["y"]
        )

    def summarize(self):
        total = double(self.outputs_of(self.ctx.job)["sum"])
        self.out("total", total)
