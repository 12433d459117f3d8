"""Placement new changes the dynamic type; a launder keeps the optimizer honest."""

# %%
import copy

from invar_opt import corpus
from invar_opt.frontend import compile_source
from invar_opt.interp import eval_module
from invar_opt.ir import print_ir
from invar_opt.passes import PipelineConfig, run_pipeline

src = corpus.load("g")
print(src)

# %% Unoptimized and optimized runs print the same sequence.
m = compile_source(src)
before = eval_module(copy.deepcopy(m), "main", "raw").prints
opt, _ = run_pipeline(m, PipelineConfig())
after = eval_module(opt, "main", "raw").prints
print("before:", before, "after:", after)

# %% The taken branch reaches B's method, never A's.
print("define void @g" + print_ir(opt).split("define void @g")[1].split("}")[0] + "}")
