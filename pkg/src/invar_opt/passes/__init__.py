from .codegen import lower_for_codegen
from .inline import inline_calls
from .intrinsics import fold_pointer_comparisons, simplify_intrinsics
from .licm import hoist_invariant_loads
from .memory import devirtualize_calls, eliminate_dead_stores, fold_assumes, forward_invariant_loads
from .pipeline import FUNCTION_PASSES, run_pass, run_pipeline
from .report import ALL_PASSES, CORE_PASSES, COUNTERS, LOWER_PASS, PassReport, PipelineConfig

__all__ = [
    "ALL_PASSES",
    "CORE_PASSES",
    "COUNTERS",
    "FUNCTION_PASSES",
    "LOWER_PASS",
    "PassReport",
    "PipelineConfig",
    "devirtualize_calls",
    "eliminate_dead_stores",
    "fold_assumes",
    "fold_pointer_comparisons",
    "forward_invariant_loads",
    "hoist_invariant_loads",
    "inline_calls",
    "lower_for_codegen",
    "run_pass",
    "run_pipeline",
    "simplify_intrinsics",
]
