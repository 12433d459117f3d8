"""Differential testing of the pipeline over generated object-lifetime programs."""

# %%
from collections import Counter

from invar_opt import corpus
from invar_opt.interp.diff import diff_run
from invar_opt.interp.fuzz import enumerate_fuzz_programs

for name in corpus.PROGRAMS + corpus.UB_PROGRAMS:
    print(f"{name:26} {diff_run(corpus.load(name)).verdict}")

# %% A small fuzz batch; programs with UB are skipped rather than compared.
programs = enumerate_fuzz_programs(7, 100)
print(programs[0])
print(Counter(diff_run(p).verdict for p in programs))
