import pytest
from hypothesis import given, settings, strategies as st

from invar_opt import corpus
from invar_opt.frontend import LoweringOptions, SourceError, compile_source, parse_source
from invar_opt.interp.fuzz import enumerate_fuzz_programs
from invar_opt.ir import INVARIANT_GROUP, INVARIANT_LOAD, Linkage, Opcode, print_ir, verify_module

SECTION3 = """
class A {
  virtual fn virt_meth();
}
extern fn external_fun(a: A*);
fn foo() {
  var a = new A();
  external_fun(a);
  a->virt_meth();
}
fn bar() {
  var a = new A();
  a->virt_meth();
  a->virt_meth();
}
"""

INTRINSICS = (Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip, Opcode.IntrinsicAssume)


def test_parse_external_function_listing():
    p = parse_source(SECTION3)
    assert [c.name for c in p.classes if c.dynamic] == ["A"]
    assert len(p.externals) == 1
    assert len(p.functions) == 2


def test_empty_file_is_empty_program():
    p = parse_source("")
    assert p.classes == [] and p.functions == [] and p.externals == [] and p.unions == []


def test_override_of_non_virtual_is_rejected():
    src = "class A { fn m() { } }\nclass B : A { fn m() { } }\n"
    with pytest.raises(SourceError, match="override of non-virtual"):
        parse_source(src)


def test_override_arity_mismatch_is_rejected():
    src = "class A { virtual fn m() { } }\nclass B : A { virtual fn m(x: int) { } }\n"
    with pytest.raises(SourceError, match="arity"):
        parse_source(src)


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("fn main() { var x = y; }", "y"),
        ("fn main() { print(1) }", "';'"),
        ("class A : Z { }", "Z"),
        ("fn main() { var a = new Q(); }", "Q"),
    ],
)
def test_diagnostics_carry_positions(src, fragment):
    with pytest.raises(SourceError) as info:
        parse_source(src)
    assert info.value.line >= 1 and info.value.col >= 1
    assert fragment in info.value.message


def test_lowering_requires_resolved_program():
    from invar_opt.frontend import SourceProgram, lower_to_ir

    with pytest.raises(ValueError):
        lower_to_ir(SourceProgram())


def _lowering_invariants(m):
    for f in m.functions:
        defs = f.definitions()
        for inst in f.instructions():
            if inst.opcode is Opcode.Store and inst.has_md(INVARIANT_GROUP):
                # vptr stores write a vtable reference at offset 0
                value = defs.get(inst.args[0])
                assert value is not None and value.opcode is Opcode.GlobalRef
                assert m.vtable(value.symbol) is not None
                addr = defs.get(inst.args[1])
                assert addr is None or addr.opcode is not Opcode.FieldAddr
            if inst.opcode in (Opcode.ICmpEq, Opcode.ICmpNe, Opcode.PtrToInt):
                operands = [a for a in inst.args if _is_pointer(a, f, defs)]
                if _is_assumption_compare(inst, f, defs):
                    continue
                for a in operands:
                    d = defs.get(a)
                    assert d is not None and d.opcode in (Opcode.IntrinsicStrip, Opcode.ConstNull), print_ir(m)


def _is_pointer(v, f, defs):
    d = defs.get(v)
    if d is None:
        return any(p.name == v and p.type == "ptr" for p in f.params)
    return d.type == "ptr"


def _is_assumption_compare(inst, f, defs):
    return any(u.opcode is Opcode.IntrinsicAssume and inst.result in u.args for u in f.instructions())


@pytest.mark.parametrize("name", corpus.names())
def test_lowering_invariants_on_corpus(name):
    m = compile_source(corpus.load(name))
    assert verify_module(m) == []
    _lowering_invariants(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_lowering_invariants_on_fuzzed_programs(seed):
    src = enumerate_fuzz_programs(seed, 1)[0]
    m = compile_source(src)
    assert verify_module(m) == []
    _lowering_invariants(m)
    assert print_ir(compile_source(src)) == print_ir(m)


@pytest.mark.parametrize("name", corpus.names())
def test_non_strict_lowering_has_no_model_artifacts(name):
    m = compile_source(corpus.load(name), LoweringOptions(strict_vtable_pointers=False))
    assert verify_module(m) == []
    for f in m.functions:
        for inst in f.instructions():
            assert inst.opcode not in INTRINSICS
            assert not inst.metadata
    text = print_ir(m)
    assert "invariant" not in text


def test_derived_constructor_launders_this():
    m = compile_source(corpus.load("g"))
    ctor = m.function("B::B")
    ops = [i.opcode for i in ctor.instructions()]
    assert ops.index(Opcode.IntrinsicLaunder) < ops.index(Opcode.CallDirect) < ops.index(Opcode.Store)
    call = next(i for i in ctor.instructions() if i.opcode is Opcode.CallDirect)
    assert call.symbol == "A::A"


def test_destructor_sets_own_vtable_then_runs_base():
    src = """
    class A { virtual ~A() { print(1); } }
    class B : A { ~B() { print(2); } }
    fn main() { var b: A* = new B(); delete b; }
    """
    m = compile_source(src)
    dtor = m.function("B::~B")
    ops = [i.opcode for i in dtor.instructions()]
    assert ops.index(Opcode.Store) < ops.index(Opcode.IntrinsicLaunder)
    assert [i.symbol for i in dtor.instructions() if i.opcode is Opcode.CallDirect][-1] == "A::~A"
    assert m.vtable("vtable.B").slots == ["B::~B"]


def test_virtual_call_shape():
    m = compile_source(corpus.load("foo_bar"))
    f = m.function("multiple_calls")
    loads = [i for i in f.instructions() if i.opcode is Opcode.Load]
    assert [i.metadata for i in loads] == [frozenset({INVARIANT_GROUP}), frozenset({INVARIANT_LOAD})] * 2
    assert sum(1 for i in f.instructions() if i.opcode is Opcode.CallIndirect) == 2


def test_assumption_load_after_outline_constructor():
    f = compile_source(corpus.load("outline_ctor")).function("foo")
    ops = [i.opcode for i in f.instructions()]
    i = ops.index(Opcode.CallDirect)
    assert ops[i + 1 : i + 5] == [Opcode.Load, Opcode.GlobalRef, Opcode.ICmpEq, Opcode.IntrinsicAssume]


def test_no_assumption_load_after_inline_constructor():
    f = compile_source(corpus.load("foo_bar")).function("bar")
    assert not any(i.opcode is Opcode.IntrinsicAssume for i in f.instructions())


@pytest.mark.parametrize(
    "src, linkage",
    [
        # key function defined here
        ("class A { virtual fn f(); }\nfn A::f() { }\n", Linkage.Definition),
        # key function defined elsewhere, every slot still nameable
        ("class A { virtual fn f(); }\n", Linkage.OptimizationOnly),
        # an inline member without a body cannot be referenced
        ("class A { virtual inline fn f(); virtual fn g(); }\n", Linkage.Declaration),
        ("class A { virtual fn f() { } }\n", Linkage.OptimizationOnly),
    ],
)
def test_vtable_linkage(src, linkage):
    assert compile_source(src).vtable("vtable.A").linkage is linkage


def test_force_emit_vtables_upgrades_declarations():
    src = "class A { virtual inline fn f(); virtual fn g(); }\n"
    m = compile_source(src, LoweringOptions(force_emit_vtables=True))
    assert m.vtable("vtable.A").linkage is Linkage.OptimizationOnly


def test_field_layout_after_vptr():
    src = "class A { int x; virtual fn f() { } }\nclass B : A { int y; }\nfn main() { var b = new B(); b->y = 3; }\n"
    m = compile_source(src)
    main = m.function("main")
    alloc = next(i for i in main.instructions() if i.opcode is Opcode.Alloc)
    assert alloc.imm == 24
    addr = [i.imm for i in main.instructions() if i.opcode is Opcode.FieldAddr]
    assert addr == [16]


def test_lowering_is_deterministic():
    src = corpus.load("corner")
    assert compile_source(src) == compile_source(src)
