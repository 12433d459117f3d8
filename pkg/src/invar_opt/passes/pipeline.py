"""Pass registry and the fixpoint pipeline driver."""

from __future__ import annotations

import copy
from typing import Optional

from ..analysis import propagate_pointer_attributes
from ..ir import IRModule, print_ir
from .codegen import lower_for_codegen
from .inline import inline_calls
from .intrinsics import fold_pointer_comparisons, simplify_intrinsics
from .licm import hoist_invariant_loads
from .memory import devirtualize_calls, eliminate_dead_stores, fold_assumes, forward_invariant_loads
from .report import LOWER_PASS, PassReport, PipelineConfig


def _attrs(f, m, cfg):
    propagate_pointer_attributes(f, m)
    return f, PassReport()


FUNCTION_PASSES = {
    "inline": lambda f, m, cfg: inline_calls(f, m, cfg),
    "simplify-intrinsics": lambda f, m, cfg: simplify_intrinsics(f),
    "forward-invariant-loads": lambda f, m, cfg: forward_invariant_loads(f, m),
    "fold-assumes": lambda f, m, cfg: fold_assumes(f),
    "fold-pointer-comparisons": lambda f, m, cfg: fold_pointer_comparisons(f),
    "devirtualize": lambda f, m, cfg: devirtualize_calls(f, m),
    "hoist-invariant-loads": lambda f, m, cfg: hoist_invariant_loads(f),
    "dse": lambda f, m, cfg: eliminate_dead_stores(f),
    "propagate-attrs": _attrs,
}


def run_pass(name: str, m: IRModule, cfg: Optional[PipelineConfig] = None) -> PassReport:
    """Run one named pass over every function of m in place."""
    cfg = cfg or PipelineConfig()
    if name == LOWER_PASS:
        return lower_for_codegen(m)[1]
    if name not in FUNCTION_PASSES:
        raise ValueError(f"unknown pass {name!r}")
    report = PassReport()
    for f in m.functions:
        _, r = FUNCTION_PASSES[name](f, m, cfg)
        report.add(r, f.name)
    return report


def run_pipeline(m: IRModule, cfg: Optional[PipelineConfig] = None) -> tuple:
    """Optimize a copy of m; the input module is left untouched."""
    cfg = cfg or PipelineConfig()
    cfg.validate()
    m = copy.deepcopy(m)
    report = PassReport()
    core = [p for p in cfg.passes if p != LOWER_PASS]
    if core:
        for _ in range(cfg.fixpoint_iterations):
            before = print_ir(m)
            for name in core:
                report.add(run_pass(name, m, cfg))
            if print_ir(m) == before:
                break
    if LOWER_PASS in cfg.passes:
        report.add(run_pass(LOWER_PASS, m, cfg))
    return m, report
