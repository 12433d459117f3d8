"""Linking modules whose vtables are emitted with different linkages."""

# %%
from invar_opt.cli import link_modules
from invar_opt.frontend import compile_source
from invar_opt.interp import eval_module
from invar_opt.ir import print_ir

header = "class A {\n  virtual fn f();\n}\n"
user = header + "fn use(a: A*) { a->f(); }\nfn main() { var a = new A(); use(a); }\n"
owner = header + "fn A::f() { print(3); }\n"

# %% Without the key function the user TU emits an optimization-only vtable copy.
for label, src in (("user", user), ("owner", owner)):
    print(label, [(v.name, v.linkage.value) for v in compile_source(src).vtables])

# %% The owning TU holds the definition, which outranks the other copies.
linked = link_modules([compile_source(user), compile_source(owner)])
print(eval_module(linked).to_text())
print(print_ir(linked))
