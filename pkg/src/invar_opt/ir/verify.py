"""Structural, SSA and metadata-placement checks for IR modules."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .cfg import DominatorTree, predecessors
from .nodes import (
    ARITHMETIC,
    INVARIANT_GROUP,
    INVARIANT_LOAD,
    IRFunction,
    IRModule,
    Opcode,
)


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    function: Optional[str] = None
    block: Optional[str] = None
    index: Optional[int] = None

    def __str__(self) -> str:
        where = ""
        if self.function is not None:
            where = f"@{self.function}"
            if self.block is not None:
                where += f":{self.block}"
                if self.index is not None:
                    where += f":{self.index}"
            where += ": "
        return f"{where}{self.rule}: {self.message}"


class VerificationError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


_METADATA_ALLOWED = {
    INVARIANT_GROUP: {Opcode.Load, Opcode.Store},
    INVARIANT_LOAD: {Opcode.Load},
}


def verify_module(m: IRModule) -> list:
    diags = []
    names = Counter(m.global_names())
    for name, n in sorted(names.items()):
        if n > 1:
            diags.append(Diagnostic("duplicate global", f"@{name} defined {n} times"))
    callables = {d.name for d in m.declarations} | {f.name for f in m.functions}
    for v in m.vtables:
        for s in v.slots:
            if s not in callables:
                diags.append(Diagnostic("undefined symbol", f"vtable @{v.name} slot @{s} does not name a function"))
    for f in m.functions:
        diags.extend(_verify_function(f, m))
    return diags


def check_module(m: IRModule) -> None:
    diags = verify_module(m)
    if diags:
        raise VerificationError(diags)


def _verify_function(f: IRFunction, m: IRModule) -> list:
    diags = []

    def report(rule, message, block=None, index=None):
        diags.append(Diagnostic(rule, message, f.name, block, index))

    if not f.blocks:
        report("empty function", "function has no blocks")
        return diags

    labels = Counter(b.label for b in f.blocks)
    for label, n in labels.items():
        if n > 1:
            report("duplicate block label", f"label %{label} used {n} times")

    types = {}
    for p in f.params:
        if p.name in types:
            report("duplicate definition", f"parameter %{p.name} repeated")
        types[p.name] = p.type
        if p.attrs.dereferenceable_bytes is not None and p.attrs.dereferenceable_bytes <= 0:
            report("invalid attribute", f"dereferenceable on %{p.name} must be positive")
    pos = {}
    for b in f.blocks:
        for i, inst in enumerate(b.instructions):
            if inst.result is None:
                continue
            if inst.result in types:
                report("duplicate definition", f"%{inst.result} defined twice", b.label, i)
            types[inst.result] = inst.type
            pos[inst.result] = (b.label, i)

    known_labels = set(labels)
    for b in f.blocks:
        if not b.instructions or not b.instructions[-1].is_terminator:
            report("missing terminator", "block does not end in a terminator", b.label)
        for i, inst in enumerate(b.instructions[:-1]):
            if inst.is_terminator:
                report("terminator in middle of block", f"{inst.opcode.value} before end of block", b.label, i)
        for s in b.successors():
            if s not in known_labels:
                report("unknown branch target", f"%{s} is not a block", b.label)

    if diags:
        return diags

    dt = DominatorTree(f)
    preds = predecessors(f)
    for b in f.blocks:
        seen_non_phi = False
        for i, inst in enumerate(b.instructions):
            at = (b.label, i)

            def rep(rule, message):
                report(rule, message, *at)

            for kind in inst.metadata:
                if inst.opcode not in _METADATA_ALLOWED.get(kind, ()):
                    rep("metadata on non-memory instruction", f"!{kind} not allowed on {inst.opcode.value}")

            for a in inst.args:
                if a not in types:
                    rep("undefined value", f"%{a} is never defined")

            if inst.opcode is Opcode.Phi:
                if seen_non_phi:
                    rep("phi placement", "phi after non-phi instruction")
                if sorted(inst.labels) != sorted(preds[b.label]) or len(set(inst.labels)) != len(inst.labels):
                    rep("phi predecessor mismatch", f"incoming {inst.labels} vs predecessors {preds[b.label]}")
                for a, l in zip(inst.args, inst.labels):
                    if a in types and types[a] != inst.type:
                        rep("type mismatch", f"phi operand %{a} is {types[a]}, expected {inst.type}")
                    if dt.reachable(l) and a in pos:
                        db, _ = pos[a]
                        if not dt.dominates(db, l):
                            rep("SSA dominance violated", f"%{a} does not dominate the end of %{l}")
            else:
                seen_non_phi = True
                if dt.reachable(b.label):
                    for a in inst.args:
                        if a in pos:
                            db, di = pos[a]
                            ok = di < i if db == b.label else dt.dominates(db, b.label)
                            if not ok:
                                rep("SSA dominance violated", f"%{a} used before its definition")

            _check_types(inst, types, f, m, rep)
    return diags


def _check_types(inst, types, f, m, rep):
    op = inst.opcode
    t = [types.get(a) for a in inst.args]

    def need(n):
        if len(inst.args) != n:
            rep("arity mismatch", f"{op.value} takes {n} operand(s), got {len(inst.args)}")
            return False
        return True

    def expect(idx, ty):
        if t[idx] is not None and t[idx] != ty:
            rep("type mismatch", f"operand %{inst.args[idx]} of {op.value} is {t[idx]}, expected {ty}")

    def has_result(ty):
        if inst.result is None or inst.type != ty:
            rep("type mismatch", f"{op.value} must produce a {ty} result")

    if op is Opcode.Alloc:
        need(0)
        has_result("ptr")
        if inst.imm is None or inst.imm <= 0:
            rep("invalid operand", "alloc size must be positive")
    elif op is Opcode.Load:
        if need(1):
            expect(0, "ptr")
        if inst.result is None or inst.type not in ("int", "ptr"):
            rep("type mismatch", "load must produce an int or ptr")
    elif op is Opcode.Store:
        if need(2):
            expect(1, "ptr")
            if t[0] == "bool":
                rep("type mismatch", "cannot store a bool")
    elif op is Opcode.FieldAddr:
        if need(1):
            expect(0, "ptr")
        has_result("ptr")
        if inst.imm is None or inst.imm < 0:
            rep("invalid operand", "field offset must be non-negative")
    elif op is Opcode.CallDirect:
        target = m.callable(inst.symbol) if inst.symbol else None
        if target is None:
            rep("undefined symbol", f"call to unknown @{inst.symbol}")
            return
        ret = None if target.ret_type == "void" else target.ret_type
        if inst.type != ret:
            rep("type mismatch", f"call result {inst.type or 'void'} vs @{target.name} returning {target.ret_type}")
        if len(inst.args) != len(target.params):
            rep("arity mismatch", f"@{target.name} takes {len(target.params)} argument(s), got {len(inst.args)}")
        else:
            for i, p in enumerate(target.params):
                expect(i, p.type)
    elif op is Opcode.CallIndirect:
        if not inst.args:
            rep("arity mismatch", "indirect call needs a callee")
        else:
            expect(0, "ptr")
    elif op in (Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip):
        if need(1):
            expect(0, "ptr")
        has_result("ptr")
    elif op is Opcode.IntrinsicAssume:
        if need(1):
            expect(0, "bool")
        if inst.result is not None:
            rep("type mismatch", "assume produces no value")
    elif op in (Opcode.ICmpEq, Opcode.ICmpNe):
        if need(2) and t[0] is not None and t[1] is not None and t[0] != t[1]:
            rep("type mismatch", f"comparison of {t[0]} with {t[1]}")
        has_result("bool")
    elif op is Opcode.ICmpSlt:
        if need(2):
            expect(0, "int")
            expect(1, "int")
        has_result("bool")
    elif op in ARITHMETIC:
        if need(2):
            expect(0, "int")
            expect(1, "int")
        has_result("int")
    elif op is Opcode.PtrToInt:
        if need(1):
            expect(0, "ptr")
        has_result("int")
    elif op is Opcode.IntToPtr:
        if need(1):
            expect(0, "int")
        has_result("ptr")
    elif op is Opcode.Br:
        need(0)
        if len(inst.labels) != 1:
            rep("arity mismatch", "br takes one label")
    elif op is Opcode.CondBr:
        if need(1):
            expect(0, "bool")
        if len(inst.labels) != 2:
            rep("arity mismatch", "condbr takes two labels")
    elif op is Opcode.Ret:
        if f.ret_type == "void":
            if inst.args:
                rep("type mismatch", "void function returns a value")
        elif need(1):
            expect(0, f.ret_type)
    elif op is Opcode.ConstInt:
        if inst.type not in ("int", "bool") or inst.imm is None:
            rep("type mismatch", "const needs an int or bool type and a value")
        elif inst.type == "bool" and inst.imm not in (0, 1):
            rep("invalid operand", "bool constant must be 0 or 1")
    elif op is Opcode.ConstNull:
        has_result("ptr")
    elif op is Opcode.ConstUndef:
        if inst.result is None or inst.type not in ("int", "ptr", "bool"):
            rep("type mismatch", "undef needs a type")
    elif op is Opcode.GlobalRef:
        has_result("ptr")
        if inst.symbol not in set(m.global_names()):
            rep("undefined symbol", f"globalref to unknown @{inst.symbol}")
