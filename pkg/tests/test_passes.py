import copy

import pytest
from hypothesis import given, settings, strategies as st

from invar_opt import corpus
from invar_opt.frontend import LoweringOptions, compile_source
from invar_opt.ir import BasicBlock, Declaration, Instruction, IRFunction, IRModule, Opcode, Param, parse_ir, print_ir, verify_module
from invar_opt.passes import (
    ALL_PASSES,
    COUNTERS,
    CORE_PASSES,
    LOWER_PASS,
    PassReport,
    PipelineConfig,
    devirtualize_calls,
    eliminate_dead_stores,
    fold_assumes,
    fold_pointer_comparisons,
    forward_invariant_loads,
    hoist_invariant_loads,
    inline_calls,
    lower_for_codegen,
    run_pipeline,
    simplify_intrinsics,
)
from invar_opt.passes.algebra import enumerate_terms, is_normal, normal_forms, normalize, render
from invar_opt.passes.inline import recursive_functions

HEADER = "module @m\ndeclare void @foo()\ndeclare void @print(int %v)\n\n"


def fn(body, params="ptr %x"):
    m = parse_ir(HEADER + f"define void @main({params}) {{\nentry:\n{body}\n}}\n")
    return m, m.function("main")


def ops(f):
    return [i.opcode for i in f.instructions()]


def defs_of(f, name):
    return f.definitions()[name]


# ------------------------------------------------------------ intrinsics


def test_strip_of_strip_reuses_inner():
    m, f = fn("  %y = call ptr @llvm.strip.invariant.group(%x)\n  %z = call ptr @llvm.strip.invariant.group(%y)\n  %v = load int %z\n  call void @print(%v)\n  ret")
    simplify_intrinsics(f)
    assert defs_of(f, "v").args == ["y"]
    assert ops(f).count(Opcode.IntrinsicStrip) == 1


@pytest.mark.parametrize("const", ["null", "undef ptr"])
@pytest.mark.parametrize("name", ["strip", "launder"])
def test_intrinsics_of_null_and_undef_fold(const, name):
    m, f = fn(f"  %n = {const}\n  %y = call ptr @llvm.{name}.invariant.group(%n)\n  %v = load int %y\n  call void @print(%v)\n  ret")
    _, report = simplify_intrinsics(f)
    assert defs_of(f, "v").args == ["n"]
    assert report.removed_intrinsics == 1
    assert verify_module(m) == []


def test_nested_launder_becomes_fresh_launder_of_base():
    m, f = fn("  %a = call ptr @llvm.launder.invariant.group(%x)\n  %b = call ptr @llvm.launder.invariant.group(%a)\n  %v = load int %a\n  call void @print(%v)\n  %w = load int %b\n  call void @print(%w)\n  ret")
    simplify_intrinsics(f)
    assert defs_of(f, "b").opcode is Opcode.IntrinsicLaunder
    assert defs_of(f, "b").args == ["x"]
    assert defs_of(f, "w").args == ["b"]


@pytest.mark.parametrize("outer, inner", [("launder", "strip"), ("strip", "launder")])
def test_mixed_pairs_collapse_onto_base(outer, inner):
    m, f = fn(f"  %a = call ptr @llvm.{inner}.invariant.group(%x)\n  %b = call ptr @llvm.{outer}.invariant.group(%a)\n  %w = load int %b\n  call void @print(%w)\n  ret")
    simplify_intrinsics(f)
    b = defs_of(f, "b")
    assert b.opcode.value.endswith(outer) and b.args == ["x"]
    assert len([o for o in ops(f) if o in (Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip)]) == 1


def _chain_module(term):
    """main(x) loads through render(term)."""
    f = IRFunction("main", "void", [Param("x", "ptr")], [BasicBlock("entry")])
    insts = f.entry.instructions
    cur = "x"
    for k, op in enumerate(reversed(term)):
        opcode = Opcode.IntrinsicLaunder if op == "L" else Opcode.IntrinsicStrip
        insts.append(Instruction(opcode, f"t{k}", "ptr", [cur]))
        cur = f"t{k}"
    insts.append(Instruction(Opcode.Load, "v", "int", [cur]))
    insts.append(Instruction(Opcode.CallDirect, None, None, ["v"], symbol="print"))
    insts.append(Instruction(Opcode.Ret))
    return IRModule("m", [f], [Declaration("print", "void", [Param("v", "int")])]), f


def _surviving_chain(f):
    defs = f.definitions()
    cur = defs_of(f, "v").args[0]
    out = ""
    while defs.get(cur) is not None:
        out += "L" if defs[cur].opcode is Opcode.IntrinsicLaunder else "S"
        cur = defs[cur].args[0]
    return out


def test_algebra_terms_normalize_uniquely():
    for term in enumerate_terms(4):
        forms = normal_forms(term)
        assert len({nf for nf, _ in forms}) == 1, term
        nf, steps = normalize(term)
        assert is_normal(nf)
        assert steps <= len(term)
        assert nf in ("L", "S")
        assert nf == term[0]


@pytest.mark.parametrize("term", enumerate_terms(4))
def test_simplifier_reaches_algebra_normal_form(term):
    m, f = _chain_module(term)
    simplify_intrinsics(f)
    assert verify_module(m) == []
    chain = _surviving_chain(f)
    assert chain == normalize(term)[0]
    # at most one launder followed by at most one strip
    assert chain in ("", "L", "S", "SL")


def test_render():
    assert render("SL") == "strip(launder(x))"


# ------------------------------------------------------------ comparisons


def _compare(lhs, rhs, prelude):
    m, f = fn(prelude + f"\n  %c = icmp eq %{lhs}, %{rhs}\n  %i = ptrtoint %x\n  condbr %c, label %t, label %e\nt:\n  ret\ne:\n  ret")
    return m, f


def test_ptr_equals_laundered_ptr_folds_true(program):
    src = "class A { virtual fn f() { } }\nfn main() { var p = new A(); if (p == launder(p)) { print(1); } }\n"
    m = compile_source(src)
    f = m.function("main")
    simplify_intrinsics(f)
    _, report = fold_pointer_comparisons(f)
    assert report.folded_comparisons == 1
    folded = [i for i in f.instructions() if i.opcode is Opcode.ConstInt and i.type == "bool"]
    assert [i.imm for i in folded] == [1]


def test_strip_launder_against_strip_folds_true():
    pre = "  %l = call ptr @llvm.launder.invariant.group(%x)\n  %a = call ptr @llvm.strip.invariant.group(%l)\n  %b = call ptr @llvm.strip.invariant.group(%x)"
    m, f = _compare("a", "b", pre)
    simplify_intrinsics(f)
    _, report = fold_pointer_comparisons(f)
    assert report.folded_comparisons == 1


def test_distinct_launders_are_not_folded():
    pre = "  %a = call ptr @llvm.launder.invariant.group(%x)\n  %b = call ptr @llvm.launder.invariant.group(%x)"
    m, f = _compare("a", "b", pre)
    simplify_intrinsics(f)
    _, report = fold_pointer_comparisons(f)
    assert report.folded_comparisons == 0


def test_fresh_allocation_is_not_null():
    m, f = _compare("a", "n", "  %a = alloc 8\n  %n = null")
    _, report = fold_pointer_comparisons(f)
    assert report.folded_comparisons == 1
    assert any(i.opcode is Opcode.ConstInt and i.imm == 0 for i in f.instructions())


@settings(max_examples=80)
@given(st.sampled_from(enumerate_terms(3)), st.sampled_from(enumerate_terms(3)))
def test_two_launder_results_never_fold(t1, t2):
    f = IRFunction("main", "void", [Param("x", "ptr")], [BasicBlock("entry")])
    insts = f.entry.instructions
    names = []
    for side, term in (("a", t1), ("b", t2)):
        cur = "x"
        for k, op in enumerate(reversed(term)):
            opcode = Opcode.IntrinsicLaunder if op == "L" else Opcode.IntrinsicStrip
            insts.append(Instruction(opcode, f"{side}{k}", "ptr", [cur]))
            cur = f"{side}{k}"
        names.append(cur)
    insts.append(Instruction(Opcode.ICmpEq, "c", "bool", names))
    insts.append(Instruction(Opcode.CondBr, None, None, ["c"], labels=["t", "t"]))
    f.blocks.append(BasicBlock("t", [Instruction(Opcode.Ret)]))
    simplify_intrinsics(f)
    _, report = fold_pointer_comparisons(f)
    if t1[0] == "L" or t2[0] == "L":
        assert report.folded_comparisons == 0
    else:
        assert report.folded_comparisons == 1


# ------------------------------------------------------------ forwarding

LISTING = """\
  %c42 = const int 42
  store %c42, %x !invariant.group
  call void @foo()
  %a = load int %x !invariant.group
  call void @print(%a)
  %p2 = call ptr @llvm.launder.invariant.group(%x)
  %d = load int %p2 !invariant.group
  call void @print(%d)
  ret"""


def test_store_forwarded_across_opaque_call():
    m, f = fn(LISTING)
    _, report = forward_invariant_loads(f, m)
    prints = [i for i in f.instructions() if i.opcode is Opcode.CallDirect and i.symbol == "print"]
    assert prints[0].args == ["c42"]
    assert report.forwarded_invariant_loads == 1


def test_no_forwarding_through_launder():
    m, f = fn(LISTING)
    forward_invariant_loads(f, m)
    assert "d" in f.definitions()
    prints = [i for i in f.instructions() if i.opcode is Opcode.CallDirect and i.symbol == "print"]
    assert prints[1].args == ["d"]


def test_no_forwarding_through_strip():
    body = "  %s = call ptr @llvm.strip.invariant.group(%x)\n  %a = load int %s !invariant.group\n  %b = load int %s !invariant.group\n  call void @print(%b)\n  ret"
    m, f = fn(body)
    _, report = forward_invariant_loads(f, m)
    assert report.forwarded_invariant_loads == 0


def test_multiple_calls_keeps_one_vptr_load():
    m = compile_source(corpus.load("foo_bar"))
    f = m.function("multiple_calls")
    _, report = forward_invariant_loads(f, m)
    assert report.forwarded_invariant_loads >= 1
    vptr_loads = [i for i in f.instructions() if i.opcode is Opcode.Load and i.args == ["a"]]
    assert len(vptr_loads) == 1


def test_forwarding_respects_dominance():
    body = """\
  condbr %c, label %l, label %r
l:
  %c1 = const int 1
  store %c1, %x !invariant.group
  br label %j
r:
  br label %j
j:
  %v = load int %x !invariant.group
  call void @print(%v)
  ret"""
    m, f = fn(body, "ptr %x, bool %c")
    _, report = forward_invariant_loads(f, m)
    assert report.forwarded_invariant_loads == 0


# ------------------------------------------------------------ assumes and devirtualization


def test_assumption_load_enables_devirtualization():
    m = compile_source(corpus.load("outline_ctor"))
    f = m.function("foo")
    forward_invariant_loads(f, m)
    _, folded = fold_assumes(f)
    assert folded.folded_assumes == 1
    forward_invariant_loads(f, m)
    _, devirt = devirtualize_calls(f, m)
    assert devirt.devirtualized_calls == 1
    assert [i.symbol for i in f.instructions() if i.opcode is Opcode.CallDirect] == ["C::C", "C::virt_meth"]


def test_inlined_constructor_makes_assume_trivial():
    body = """\
  %vt = globalref @vtable.C
  store %vt, %x !invariant.group
  %v = load ptr %x !invariant.group
  %k = icmp eq %v, %vt
  call void @llvm.assume(%k)
  ret"""
    text = HEADER + "declare void @C::f(ptr %this)\nvtable @vtable.C for C linkage=definition [ @C::f ]\n\n" + f"define void @main(ptr %x) {{\nentry:\n{body}\n}}\n"
    m = parse_ir(text)
    f = m.function("main")
    forward_invariant_loads(f, m)
    fold_pointer_comparisons(f)
    _, report = fold_assumes(f)
    assert report.folded_assumes == 1
    assert ops(f) == [Opcode.GlobalRef, Opcode.Store, Opcode.Ret]


def test_assume_of_plain_boolean_is_left_alone():
    m, f = fn("  call void @llvm.assume(%b)\n  ret", "bool %b")
    _, report = fold_assumes(f)
    assert report.folded_assumes == 0
    assert Opcode.IntrinsicAssume in ops(f)


def test_declaration_vtable_blocks_devirtualization():
    src = "class A { virtual inline fn f(); virtual fn g(); }\nfn main() { var a = new A(); a->g(); }\n"
    out, report = run_pipeline(compile_source(src), PipelineConfig())
    assert report.devirtualized_calls == 0
    assert any(i.opcode is Opcode.CallIndirect for i in out.function("main").instructions())


def test_parameter_callee_is_not_devirtualized():
    m = compile_source(corpus.load("foo_bar"))
    f = m.function("multiple_calls")
    _, report = devirtualize_calls(f, m)
    assert report.devirtualized_calls == 0


# ------------------------------------------------------------ hoisting


def test_virtual_call_loads_leave_the_loop():
    m = compile_source(corpus.load("spin"))
    f = m.function("spin")
    _, report = hoist_invariant_loads(f)
    assert report.hoisted_loads == 2
    body = f.block("loop")
    assert not any(i.opcode is Opcode.Load for i in body.instructions)
    assert verify_module(m) == []


def test_phi_address_is_not_hoisted():
    body = """\
  br label %h
h:
  %p = phi ptr [ %x, %entry ], [ %y, %h ]
  %v = load ptr %p !invariant.group
  %y = call ptr @llvm.launder.invariant.group(%p)
  condbr %c, label %h, label %out
out:
  ret"""
    m, f = fn(body, "ptr %x, bool %c")
    _, report = hoist_invariant_loads(f)
    assert report.hoisted_loads == 0


def test_guarded_loop_hoisting_stays_sound():
    src = corpus.load("spin").replace("1000", "0")
    from invar_opt.interp.diff import diff_run

    verdict = diff_run(src)
    assert verdict.verdict == "equal"
    assert verdict.report.hoisted_loads >= 2


def test_write_before_blocks_hoisting():
    body = """\
  br label %h
h:
  %c1 = const int 1
  store %c1, %x !invariant.group
  %v = load int %x !invariant.group
  call void @print(%v)
  condbr %c, label %h, label %out
out:
  ret"""
    m, f = fn(body, "ptr %x, bool %c")
    _, report = hoist_invariant_loads(f)
    assert report.hoisted_loads == 0


# ------------------------------------------------------------ dead stores


def test_store_overwritten_through_launder_is_dead():
    body = """\
  %c42 = const int 42
  store %c42, %x
  %b = call ptr @llvm.launder.invariant.group(%x)
  %c13 = const int 13
  store %c13, %b
  %v = load int %x
  call void @print(%v)
  ret"""
    m, f = fn(body)
    _, report = eliminate_dead_stores(f)
    assert report.eliminated_stores == 1
    stores = [i for i in f.instructions() if i.opcode is Opcode.Store]
    assert [s.args[0] for s in stores] == ["c13"]


def test_store_read_through_may_alias_is_kept():
    body = """\
  %c42 = const int 42
  store %c42, %x
  %v = load int %y
  store %c42, %x
  call void @print(%v)
  ret"""
    m, f = fn(body, "ptr %x, ptr %y")
    _, report = eliminate_dead_stores(f)
    assert report.eliminated_stores == 0


def test_store_to_unread_allocation_is_dead():
    m, f = fn("  %a = alloc 8\n  %c = const int 1\n  store %c, %a\n  ret", "")
    _, report = eliminate_dead_stores(f)
    assert report.eliminated_stores == 1


# ------------------------------------------------------------ inlining


def test_bar_is_fully_devirtualized_after_inlining():
    _, report = run_pipeline(compile_source(corpus.load("foo_bar")), PipelineConfig())
    assert report.function("bar").devirtualized_calls == 2
    assert report.function("bar").inlined_calls >= 1


def test_recursive_callee_is_not_inlined():
    src = "fn r(n: int): int { if (n < 1) { return 0; } return r(n - 1) + 1; }\nfn main() { print(r(3)); }\n"
    m = compile_source(src)
    assert recursive_functions(m) == {"r"}
    _, report = inline_calls(m.function("main"), m)
    assert report.inlined_calls == 0


def test_declaration_is_not_inlined():
    m = compile_source(corpus.load("outline_ctor"))
    _, report = inline_calls(m.function("foo"), m)
    assert report.inlined_calls == 0


def test_inlining_preserves_metadata_and_intrinsics():
    m = compile_source(corpus.load("g"))
    f = m.function("g")
    inline_calls(f, m)
    assert verify_module(m) == []
    text = print_ir(m)
    g_text = text.split("define void @g()")[1].split("define")[0]
    assert "store %vt" in g_text and "!invariant.group" in g_text
    assert g_text.count("@llvm.launder.invariant.group") >= 2


# ------------------------------------------------------------ codegen lowering

ARTIFACTS = ("llvm.launder", "llvm.strip", "llvm.assume", "!invariant")


@pytest.mark.parametrize("name", corpus.names())
def test_lower_for_codegen_removes_artifacts(name):
    m, _ = run_pipeline(compile_source(corpus.load(name)), PipelineConfig())
    text = print_ir(m)
    assert not any(a in text for a in ARTIFACTS)
    assert "optimization_only" not in text
    assert verify_module(m) == []
    again, report = lower_for_codegen(copy.deepcopy(m))
    assert print_ir(again) == text
    assert report.total() == 0


def test_unresolved_assumption_triple_is_deleted():
    src = "class C { C(); virtual inline fn f(); virtual fn g(); }\nfn main() { var c = new C(); }\n"
    m = compile_source(src)
    assert Opcode.IntrinsicAssume in ops(m.function("main"))
    lowered, _ = lower_for_codegen(m)
    assert ops(lowered.function("main")) == [Opcode.Alloc, Opcode.CallDirect, Opcode.Ret]


def test_optimization_only_vtable_is_demoted():
    src = "class A { virtual fn f() { } }\n"
    m, _ = lower_for_codegen(compile_source(src))
    assert m.vtable("vtable.A").linkage.value == "declaration"


# ------------------------------------------------------------ pipeline and report


def test_g_trap_calls_derived_method(program):
    m, _ = run_pipeline(compile_source(program("g")), PipelineConfig())
    g = m.function("g")
    then = g.block("then")
    calls = [i for i in then.instructions if i.opcode is Opcode.CallDirect]
    assert not any(i.symbol == "A::virt_meth" for i in then.instructions)
    # B::virt_meth got inlined: it prints 2
    consts = {i.result: i.imm for i in g.instructions() if i.opcode is Opcode.ConstInt}
    assert [consts[c.args[0]] for c in calls if c.symbol == "print"] == [2]


def test_empty_pipeline_is_identity():
    m = compile_source(corpus.load("corner"))
    out, report = run_pipeline(m, PipelineConfig(passes=[]))
    assert out == m and out is not m
    assert report.total() == 0


def test_outline_constructor_is_devirtualized():
    _, report = run_pipeline(compile_source(corpus.load("outline_ctor")), PipelineConfig())
    assert report.devirtualized_calls >= 1


def test_invalid_pipeline_configuration():
    with pytest.raises(ValueError):
        run_pipeline(IRModule("m"), PipelineConfig(passes=["nope"]))
    with pytest.raises(ValueError):
        PipelineConfig(passes=[LOWER_PASS, "inline"]).validate()


def test_pipeline_output_verifies_and_input_is_untouched():
    m = compile_source(corpus.load("foo_bar"))
    before = print_ir(m)
    out, _ = run_pipeline(m)
    assert print_ir(m) == before
    assert verify_module(out) == []


def test_pass_names():
    assert list(ALL_PASSES)[: len(CORE_PASSES)] == list(CORE_PASSES)
    assert LOWER_PASS in ALL_PASSES


@given(st.dictionaries(st.sampled_from(COUNTERS), st.integers(0, 1000)), st.dictionaries(st.sampled_from(COUNTERS), st.integers(0, 50)))
def test_report_text_round_trips(top, sub):
    r = PassReport(**top)
    r.add(PassReport(**sub), "f")
    back = PassReport.from_text(r.to_text())
    assert back.counts() == r.counts()
    assert back.function("f").counts() == r.function("f").counts()


def test_report_accumulates():
    r = PassReport(devirtualized_calls=1)
    r.add(PassReport(devirtualized_calls=2, hoisted_loads=1), "f")
    assert r.devirtualized_calls == 3 and r.hoisted_loads == 1
    assert r.function("f").devirtualized_calls == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pipeline_is_deterministic(seed):
    from invar_opt.interp.fuzz import enumerate_fuzz_programs

    m = compile_source(enumerate_fuzz_programs(seed, 1)[0])
    a, ra = run_pipeline(m)
    b, rb = run_pipeline(m)
    assert print_ir(a) == print_ir(b)
    assert ra.to_text() == rb.to_text()
    assert verify_module(a) == []


def test_non_strict_bar_devirtualizes_less():
    src = corpus.load("foo_bar")
    _, strict = run_pipeline(compile_source(src))
    _, loose = run_pipeline(compile_source(src, LoweringOptions(strict_vtable_pointers=False)))
    assert loose.devirtualized_calls < strict.devirtualized_calls
