"""Invariant vtable pointers for devirtualization, in miniature.

A small SSA IR, a MiniOO frontend that emits launder/strip and
invariant-group annotated vtable accesses, the optimization passes that
exploit them, and a fat-pointer interpreter that checks them.
"""

from .frontend import LoweringOptions, compile_source, lower_to_ir, parse_source
from .interp import eval_module
from .interp.diff import DiffVerdict, diff_run
from .interp.fuzz import enumerate_fuzz_programs
from .ir import parse_ir, print_ir, verify_module
from .passes import PassReport, PipelineConfig, lower_for_codegen, run_pipeline

__all__ = [
    "DiffVerdict",
    "LoweringOptions",
    "PassReport",
    "PipelineConfig",
    "compile_source",
    "diff_run",
    "enumerate_fuzz_programs",
    "eval_module",
    "lower_for_codegen",
    "lower_to_ir",
    "parse_ir",
    "parse_source",
    "print_ir",
    "run_pipeline",
    "verify_module",
]
