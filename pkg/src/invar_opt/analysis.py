"""Alias queries, invariant-group keys, vtable slot resolution and pointer
attribute propagation.

launder and strip are treated as address-preserving: for aliasing purposes
they behave like bit-casts of their operand.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .ir import INVARIANT_LOAD, NO_ATTRS, SLOT_SIZE, Instruction, IRFunction, IRModule, Linkage, Opcode
from .ir.cfg import reverse_postorder
from .ir.nodes import ParamAttributeSet

_ADDRESS_PRESERVING = (Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip)


class AliasResult(str, Enum):
    MustAlias = "must-alias"
    MayAlias = "may-alias"
    NoAlias = "no-alias"


@dataclass(frozen=True)
class InvariantGroupKey:
    root: str
    valid: bool


def address_expr(value: str, f: IRFunction, defs: Optional[dict] = None) -> tuple:
    """(root, byte offset) after peeling launder, strip and fieldaddr."""
    defs = defs if defs is not None else f.definitions()
    offset = 0
    seen = set()
    while value not in seen:
        seen.add(value)
        inst = defs.get(value)
        if inst is None:
            break
        if inst.opcode in _ADDRESS_PRESERVING:
            value = inst.args[0]
        elif inst.opcode is Opcode.FieldAddr:
            offset += inst.imm
            value = inst.args[0]
        else:
            break
    return value, offset


def _root_kind(root: str, defs: dict):
    inst = defs.get(root)
    if inst is None:
        return ("param", root)
    if inst.opcode is Opcode.Alloc:
        return ("alloc", root)
    if inst.opcode is Opcode.GlobalRef:
        return ("global", inst.symbol)
    if inst.opcode is Opcode.ConstNull:
        return ("null", None)
    return ("other", root)


def alias_query(a: str, b: str, f: IRFunction, defs: Optional[dict] = None) -> AliasResult:
    defs = defs if defs is not None else f.definitions()
    ra, oa = address_expr(a, f, defs)
    rb, ob = address_expr(b, f, defs)
    if ra == rb:
        return AliasResult.MustAlias if oa == ob else AliasResult.NoAlias
    ka, kb = _root_kind(ra, defs), _root_kind(rb, defs)
    distinct_objects = {"alloc", "global"}
    if ka[0] in distinct_objects and kb[0] in distinct_objects:
        if ka == kb:
            return AliasResult.MustAlias if oa == ob else AliasResult.NoAlias
        return AliasResult.NoAlias
    return AliasResult.MayAlias


def invariant_group_key(ptr: str, f: IRFunction, defs: Optional[dict] = None) -> InvariantGroupKey:
    defs = defs if defs is not None else f.definitions()
    inst = defs.get(ptr)
    valid = inst is None or inst.opcode is not Opcode.IntrinsicStrip
    return InvariantGroupKey(ptr, valid)


def resolve_vtable_slot(load: Instruction, m: IRModule, f: IRFunction, defs: Optional[dict] = None) -> Optional[str]:
    """The function symbol an invariant-load reads from a constant vtable."""
    if load.opcode is not Opcode.Load or not load.has_md(INVARIANT_LOAD):
        return None
    defs = defs if defs is not None else f.definitions()
    root, offset = address_expr(load.args[0], f, defs)
    inst = defs.get(root)
    if inst is None or inst.opcode is not Opcode.GlobalRef:
        return None
    vt = m.vtable(inst.symbol)
    if vt is None or vt.linkage is Linkage.Declaration:
        return None
    if offset % SLOT_SIZE or not 0 <= offset // SLOT_SIZE < len(vt.slots):
        return None
    return vt.slots[offset // SLOT_SIZE]


# ------------------------------------------------------------ attributes

_NONCAPTURING_ADDRESS = {Opcode.Load, Opcode.FieldAddr, Opcode.ICmpEq, Opcode.ICmpNe, Opcode.Phi}


def _operand_attrs(value: str, f: IRFunction, defs: dict) -> ParamAttributeSet:
    inst = defs.get(value)
    if inst is None:
        for p in f.params:
            if p.name == value:
                return ParamAttributeSet(p.attrs.flags & {"nonnull"}, p.attrs.dereferenceable_bytes)
        return NO_ATTRS
    if inst.opcode is Opcode.Alloc:
        return ParamAttributeSet(frozenset({"nonnull"}), inst.imm)
    if inst.opcode in _ADDRESS_PRESERVING:
        return ParamAttributeSet(inst.result_attrs.flags & {"nonnull"}, inst.result_attrs.dereferenceable_bytes)
    return NO_ATTRS


def _captured(value: str, f: IRFunction, m: Optional[IRModule], users: dict, seen: set) -> bool:
    if value in seen:
        return False
    seen.add(value)
    for inst in users.get(value, []):
        op = inst.opcode
        if op in _NONCAPTURING_ADDRESS:
            if op in (Opcode.FieldAddr, Opcode.Phi) and _captured(inst.result, f, m, users, seen):
                return True
            continue
        if op is Opcode.Store:
            if inst.args[0] == value:
                return True
            continue
        if op in _ADDRESS_PRESERVING:
            if _captured(inst.result, f, m, users, seen):
                return True
            continue
        if op is Opcode.CallDirect and m is not None:
            target = m.callable(inst.symbol)
            if target is None:
                return True
            for i, a in enumerate(inst.args):
                if a == value and "nocapture" not in target.params[i].attrs.flags:
                    return True
            continue
        if op is Opcode.IntrinsicAssume:
            continue
        return True
    return False


def propagate_pointer_attributes(f: IRFunction, m: Optional[IRModule] = None) -> int:
    """Copy nonnull/dereferenceable from intrinsic operands to their results
    and mark the operand nocapture when the result is never captured.

    Returns the number of instructions whose attributes changed.
    """
    defs = f.definitions()
    users = {}
    for inst in f.instructions():
        for a in inst.args:
            users.setdefault(a, []).append(inst)
    changed = 0
    # operands precede uses in reverse postorder, so one walk settles chains
    blocks = f.block_map()
    for label in reverse_postorder(f):
        for inst in blocks[label].instructions:
            if inst.opcode not in _ADDRESS_PRESERVING:
                continue
            attrs = inst.result_attrs.merge(_operand_attrs(inst.args[0], f, defs))
            arg = inst.arg_attrs[0] if inst.arg_attrs else NO_ATTRS
            if not _captured(inst.result, f, m, users, set()):
                arg = arg.with_flag("nocapture")
            new_args = (arg,) if arg else ()
            if attrs != inst.result_attrs or new_args != inst.arg_attrs:
                inst.result_attrs = attrs
                inst.arg_attrs = new_args
                changed += 1
    return changed
