"""Removal of model artifacts before code generation."""

from __future__ import annotations

from ..ir import IRModule, Linkage, Opcode
from ..ir.cfg import replace_all_uses
from ..ir.nodes import REMOVABLE
from .report import PassReport


def lower_for_codegen(m: IRModule) -> tuple:
    """Replace launder/strip by their operand, drop assumes together with the
    computations only they used, clear invariant metadata and demote
    optimization-only vtables. Idempotent."""
    removed = 0
    for f in m.functions:
        feeders = set()
        for inst in f.instructions():
            if inst.opcode in (Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip):
                replace_all_uses(f, inst.result, inst.args[0])
            elif inst.opcode is Opcode.IntrinsicAssume:
                feeders.update(inst.args)
        for b in f.blocks:
            keep = []
            for inst in b.instructions:
                if inst.opcode in (Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip, Opcode.IntrinsicAssume):
                    removed += 1
                    continue
                if inst.metadata:
                    inst.metadata = frozenset()
                keep.append(inst)
            b.instructions = keep
        _remove_dead_feeders(f, feeders)
    for v in m.vtables:
        if v.linkage is Linkage.OptimizationOnly:
            v.linkage = Linkage.Declaration
    return m, PassReport(removed_intrinsics=removed)


def _remove_dead_feeders(f, roots: set) -> None:
    defs = f.definitions()
    work = list(roots)
    while work:
        name = work.pop()
        inst = defs.get(name)
        if inst is None or inst.opcode not in REMOVABLE:
            continue
        if any(name in other.args for other in f.instructions()):
            continue
        for b in f.blocks:
            b.instructions = [i for i in b.instructions if i is not inst]
        work.extend(inst.args)
        del defs[name]
