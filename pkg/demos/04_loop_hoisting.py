"""Hoisting the vptr and slot loads out of a loop of virtual calls."""

# %%
from invar_opt import corpus
from invar_opt.frontend import compile_source
from invar_opt.interp import eval_module
from invar_opt.passes import CORE_PASSES, PipelineConfig, run_pipeline

src = corpus.load("spin")
print(src)

# %% Count executed loads before and after the core passes.
plain = eval_module(compile_source(src))
hoisted, report = run_pipeline(compile_source(src), PipelineConfig(passes=list(CORE_PASSES)))
fast = eval_module(hoisted)
for label, trace in (("unoptimized", plain), ("optimized", fast)):
    c = trace.op_counts
    print(f"{label:12} vptr loads={c['load[invariant.group]']:5} slot loads={c['load[invariant.load]']:5} prints={trace.prints}")
print(report.to_text())
