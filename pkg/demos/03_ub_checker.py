"""Checked interpretation catches use of a pointer that predates a placement new."""

# %%
from invar_opt import corpus
from invar_opt.frontend import compile_source
from invar_opt.interp import eval_module

for name in ("stale_pointer", "stale_pointer_laundered"):
    print(f"== {name}")
    print(corpus.load(name))
    trace = eval_module(compile_source(corpus.load(name)), mode="checked")
    print(trace.to_text())

# %% Raw mode runs the same program without the binding checks.
print(eval_module(compile_source(corpus.load("stale_pointer")), mode="raw").to_text())
