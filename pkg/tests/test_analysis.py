import pytest
from hypothesis import given, settings, strategies as st

from invar_opt.analysis import (
    AliasResult,
    address_expr,
    alias_query,
    invariant_group_key,
    propagate_pointer_attributes,
    resolve_vtable_slot,
)
from invar_opt.ir import parse_ir

FUNC = """\
module @m
declare void @ext(ptr %p)
declare void @print(int %v)
declare void @D::f(ptr %this)
vtable @vtable.A for A linkage=definition [ @A::f, @A::g ]
vtable @vtable.D for D linkage=declaration [ @D::f ]

define void @A::f(ptr %this) {
entry:
  ret
}

define void @A::g(ptr %this) {
entry:
  ret
}

define void @main(ptr %p, ptr %q) {
entry:
  %a = alloc 16
  %b = alloc 16
  %la = call ptr @llvm.launder.invariant.group(%a)
  %sa = call ptr @llvm.strip.invariant.group(%la)
  %f8 = fieldaddr %sa, 8
  %g8 = fieldaddr %a, 8
  %vt = globalref @vtable.A
  %s1 = fieldaddr %vt, 8
  %fn = load ptr %s1 !invariant.load
  %s0 = fieldaddr %vt, 0
  %plain = load ptr %s0
  %vd = globalref @vtable.D
  %fd = load ptr %vd !invariant.load
  %lp = call ptr @llvm.launder.invariant.group(%p)
  ret
}
"""


@pytest.fixture
def mod():
    return parse_ir(FUNC)


def test_launder_result_must_alias_operand(mod):
    f = mod.function("main")
    assert alias_query("a", "la", f) is AliasResult.MustAlias
    assert alias_query("la", "sa", f) is AliasResult.MustAlias
    assert alias_query("f8", "g8", f) is AliasResult.MustAlias


def test_distinct_allocations_do_not_alias(mod):
    f = mod.function("main")
    assert alias_query("a", "b", f) is AliasResult.NoAlias
    assert alias_query("sa", "g8", f) is AliasResult.NoAlias


def test_unrelated_parameters_may_alias(mod):
    f = mod.function("main")
    assert alias_query("p", "q", f) is AliasResult.MayAlias
    assert alias_query("p", "a", f) is AliasResult.MayAlias


@settings(max_examples=60)
@given(st.sampled_from(["a", "b", "la", "sa", "f8", "g8", "p", "q", "lp", "vt", "s1"]), st.sampled_from(["a", "b", "la", "sa", "f8", "g8", "p", "q", "lp", "vt", "s1"]))
def test_alias_query_is_symmetric(x, y):
    f = parse_ir(FUNC).function("main")
    assert alias_query(x, y, f) is alias_query(y, x, f)


def test_address_expression_peels_intrinsics(mod):
    f = mod.function("main")
    assert address_expr("f8", f) == ("a", 8)


def test_invariant_group_keys(mod):
    f = mod.function("main")
    assert invariant_group_key("la", f).valid and invariant_group_key("la", f).root == "la"
    assert not invariant_group_key("sa", f).valid
    assert invariant_group_key("a", f).valid and invariant_group_key("a", f).root == "a"
    assert invariant_group_key("lp", f).root != invariant_group_key("p", f).root


def _inst(f, name):
    return f.definitions()[name]


def test_resolve_vtable_slot(mod):
    f = mod.function("main")
    assert resolve_vtable_slot(_inst(f, "fn"), mod, f) == "A::g"
    assert resolve_vtable_slot(_inst(f, "fd"), mod, f) is None
    assert resolve_vtable_slot(_inst(f, "plain"), mod, f) is None


ATTRS = """\
module @m
declare void @ext(ptr %p)

define void @main(ptr %p nonnull dereferenceable(8), ptr %q) {
entry:
  %l = call ptr @llvm.launder.invariant.group(%p)
  %v = load ptr %l
  %s = call ptr @llvm.strip.invariant.group(%q)
  %t = call ptr @llvm.strip.invariant.group(%q)
  %c = icmp eq %s, %t
  %e = call ptr @llvm.launder.invariant.group(%q)
  call void @ext(%e)
  ret
}
"""


def test_attributes_flow_through_launder():
    m = parse_ir(ATTRS)
    f = m.function("main")
    assert propagate_pointer_attributes(f, m) > 0
    l = _inst(f, "l")
    assert "nonnull" in l.result_attrs.flags
    assert l.result_attrs.dereferenceable_bytes == 8


def test_strip_used_only_in_comparison_is_nocapture():
    m = parse_ir(ATTRS)
    f = m.function("main")
    propagate_pointer_attributes(f, m)
    assert "nocapture" in _inst(f, "s").arg_attrs[0].flags


def test_escaping_launder_gets_no_nocapture():
    m = parse_ir(ATTRS)
    f = m.function("main")
    propagate_pointer_attributes(f, m)
    e = _inst(f, "e")
    assert not e.arg_attrs or "nocapture" not in e.arg_attrs[0].flags


def test_attribute_propagation_round_trips():
    from invar_opt.ir import print_ir

    m = parse_ir(ATTRS)
    propagate_pointer_attributes(m.function("main"), m)
    assert parse_ir(print_ir(m)) == m
