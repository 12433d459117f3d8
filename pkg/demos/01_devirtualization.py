"""Devirtualizing calls through a vtable pointer tagged with invariant-group metadata."""

# %%
from invar_opt import corpus
from invar_opt.frontend import LoweringOptions, compile_source
from invar_opt.ir import print_ir
from invar_opt.passes import PipelineConfig, run_pipeline

src = corpus.load("foo_bar")
print(src)

# %% Strict mode: the vptr load after construction is known, so calls become direct.
m, report = run_pipeline(compile_source(src), PipelineConfig())
for name in ("foo", "bar", "multiple_calls"):
    fr = report.function(name)
    print(f"{name:15} devirtualized={fr.devirtualized_calls} forwarded={fr.forwarded_invariant_loads}")

# %% The emitted IR for multiple_calls keeps a single vptr load.
print("define void @multiple_calls" + print_ir(m).split("define void @multiple_calls")[1].split("}")[0] + "}")

# %% Non-strict mode: an external call may replace the object, so foo stays indirect.
_, loose = run_pipeline(compile_source(src, LoweringOptions(strict_vtable_pointers=False)))
print("non-strict foo devirtualized =", loose.function("foo").devirtualized_calls)
