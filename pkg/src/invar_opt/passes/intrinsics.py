"""Rewrites over the launder/strip algebra and pointer comparison folding."""

from __future__ import annotations

from ..analysis import address_expr
from ..ir import Instruction, IRFunction, NameGen, Opcode
from ..ir.cfg import constant_value, dead_code_elimination, replace_all_uses
from .report import PassReport

_LAUNDER = Opcode.IntrinsicLaunder
_STRIP = Opcode.IntrinsicStrip
_TRANSPARENT = (Opcode.ConstNull, Opcode.ConstUndef)


def _count_intrinsics(f: IRFunction) -> int:
    return sum(1 for i in f.instructions() if i.opcode in (_LAUNDER, _STRIP))


def simplify_intrinsics(f: IRFunction) -> tuple:
    """Apply the launder/strip identities until nothing changes.

    launder(launder(y)) is rewritten to a fresh launder(y) rather than to the
    inner call's result: a later launder must observe the dynamic type
    current at its own position.
    """
    before = _count_intrinsics(f)
    changed = True
    while changed:
        changed = False
        defs = f.definitions()
        for b in f.blocks:
            keep = []
            for inst in b.instructions:
                if inst.opcode not in (_LAUNDER, _STRIP):
                    keep.append(inst)
                    continue
                src = defs.get(inst.args[0])
                if src is not None and src.opcode in _TRANSPARENT:
                    replace_all_uses(f, inst.result, inst.args[0])
                    changed = True
                    continue
                if inst.opcode is _STRIP and src is not None and src.opcode is _STRIP:
                    replace_all_uses(f, inst.result, inst.args[0])
                    changed = True
                    continue
                if src is not None and src.opcode in (_LAUNDER, _STRIP):
                    inst.args[0] = src.args[0]
                    changed = True
                keep.append(inst)
            b.instructions = keep
        dead_code_elimination(f)
    return f, PassReport(removed_intrinsics=max(0, before - _count_intrinsics(f)))


def _compare(a: str, b: str, defs: dict, f: IRFunction):
    """True/False when the equality of a and b is known, else None."""
    if a == b:
        return True
    ia, ib = defs.get(a), defs.get(b)
    ca, cb = constant_value(ia), constant_value(ib)
    if ca is not None and cb is not None:
        return ca == cb
    # both stripped, same address expression
    if ia is not None and ib is not None and ia.opcode is _STRIP and ib.opcode is _STRIP:
        if address_expr(a, f, defs) == address_expr(b, f, defs):
            return True
        return None
    for other, c in ((b, ca), (a, cb)):
        if c == ("null",):
            root, _ = address_expr(other, f, defs)
            ri = defs.get(root)
            if ri is not None and ri.opcode is Opcode.Alloc:
                return False
    return None


def fold_pointer_comparisons(f: IRFunction) -> tuple:
    """Fold equality tests whose outcome follows from SSA identity, constants,
    matching strip address expressions, or a fresh allocation against null.

    Two distinct launder results are never considered equal.
    """
    defs = f.definitions()
    names = NameGen(f)
    folded = 0
    for b in f.blocks:
        i = 0
        while i < len(b.instructions):
            inst = b.instructions[i]
            if inst.opcode in (Opcode.ICmpEq, Opcode.ICmpNe):
                known = _compare(inst.args[0], inst.args[1], defs, f)
                if known is not None:
                    value = known if inst.opcode is Opcode.ICmpEq else not known
                    name = names.value("fold")
                    b.instructions.insert(i, Instruction(Opcode.ConstInt, name, "bool", imm=int(value)))
                    replace_all_uses(f, inst.result, name)
                    del b.instructions[i + 1]
                    defs = f.definitions()
                    folded += 1
            i += 1
    return f, PassReport(folded_comparisons=folded)
