"""Differential execution of unoptimized and optimized lowerings."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from ..frontend import LoweringOptions, compile_source
from ..passes import PassReport, PipelineConfig, lower_for_codegen, run_pipeline
from .machine import ExecTrace, InterpreterError, eval_module

VERDICTS = ("equal", "mismatch", "skipped-ub")


@dataclass
class DiffVerdict:
    verdict: str
    checked: ExecTrace
    baseline: Optional[ExecTrace] = None
    optimized: Optional[ExecTrace] = None
    report: PassReport = field(default_factory=PassReport)

    @property
    def equal(self) -> bool:
        return self.verdict == "equal"

    def explain(self) -> str:
        lines = [f"verdict {self.verdict}"]
        if self.verdict == "skipped-ub":
            lines += [str(u) for u in self.checked.ub_reports]
        elif self.verdict == "mismatch":
            lines.append("--- baseline")
            lines += self.baseline.lines()
            lines.append("--- optimized")
            lines += self.optimized.lines()
        return "\n".join(lines)


def diff_run(
    source: str,
    cfg: Optional[PipelineConfig] = None,
    opts: Optional[LoweringOptions] = None,
    entry: str = "main",
) -> DiffVerdict:
    """Compare observable behavior with and without the optimization pipeline.

    The unoptimized lowering is first run in checked mode; programs with
    undefined behavior are skipped.
    """
    m = compile_source(source, opts)
    checked = eval_module(m, entry, "checked")
    if checked.ub_reports:
        return DiffVerdict("skipped-ub", checked)
    base_m, _ = lower_for_codegen(copy.deepcopy(m))
    opt_m, report = run_pipeline(m, cfg)
    opt_m, _ = lower_for_codegen(opt_m)
    baseline = eval_module(base_m, entry, "raw")
    try:
        optimized = eval_module(opt_m, entry, "raw")
    except InterpreterError as e:
        # a trap introduced by optimization is a miscompile
        optimized = ExecTrace()
        optimized.ub_reports.append(str(e))
        return DiffVerdict("mismatch", checked, baseline, optimized, report)
    verdict = "equal" if baseline.observable() == optimized.observable() else "mismatch"
    return DiffVerdict(verdict, checked, baseline, optimized, report)
