"""Data types for the SSA intermediate representation.

Values are named SSA registers. Constants are ordinary instructions
(``const``, ``null``, ``undef``, ``globalref``), so every operand of an
instruction is a register name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional


class Opcode(str, Enum):
    Alloc = "alloc"
    Load = "load"
    Store = "store"
    FieldAddr = "fieldaddr"
    CallDirect = "call"
    CallIndirect = "call.indirect"
    IntrinsicLaunder = "launder"
    IntrinsicStrip = "strip"
    IntrinsicAssume = "assume"
    ICmpEq = "icmp.eq"
    ICmpNe = "icmp.ne"
    ICmpSlt = "icmp.slt"
    PtrToInt = "ptrtoint"
    IntToPtr = "inttoptr"
    Add = "add"
    Sub = "sub"
    Mul = "mul"
    Br = "br"
    CondBr = "condbr"
    Ret = "ret"
    Phi = "phi"
    ConstInt = "const"
    ConstNull = "null"
    ConstUndef = "undef"
    GlobalRef = "globalref"


TERMINATORS = frozenset({Opcode.Br, Opcode.CondBr, Opcode.Ret})
INTRINSICS = frozenset({Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip, Opcode.IntrinsicAssume})
CONSTANTS = frozenset({Opcode.ConstInt, Opcode.ConstNull, Opcode.ConstUndef, Opcode.GlobalRef})
COMPARISONS = frozenset({Opcode.ICmpEq, Opcode.ICmpNe, Opcode.ICmpSlt})
ARITHMETIC = frozenset({Opcode.Add, Opcode.Sub, Opcode.Mul})
CALLS = frozenset({Opcode.CallDirect, Opcode.CallIndirect})

# Instructions that may be deleted once their result is unused.
REMOVABLE = frozenset(
    {
        Opcode.Load,
        Opcode.FieldAddr,
        Opcode.IntrinsicLaunder,
        Opcode.IntrinsicStrip,
        Opcode.PtrToInt,
        Opcode.IntToPtr,
        Opcode.Phi,
    }
    | CONSTANTS
    | COMPARISONS
    | ARITHMETIC
)

INVARIANT_GROUP = "invariant.group"
INVARIANT_LOAD = "invariant.load"
METADATA_KINDS = (INVARIANT_GROUP, INVARIANT_LOAD)

# Canonical spellings used by the text format.
LAUNDER_SYMBOL = "llvm.launder.invariant.group"
STRIP_SYMBOL = "llvm.strip.invariant.group"
ASSUME_SYMBOL = "llvm.assume"
INTRINSIC_SYMBOLS = {
    LAUNDER_SYMBOL: Opcode.IntrinsicLaunder,
    STRIP_SYMBOL: Opcode.IntrinsicStrip,
    ASSUME_SYMBOL: Opcode.IntrinsicAssume,
}

VALUE_TYPES = ("int", "ptr", "bool")
RETURN_TYPES = ("void", "int", "ptr")

FUNCTION_ATTRIBUTES = ("pure", "speculatable", "nounwind", "inaccessiblememonly")

SLOT_SIZE = 8


class Linkage(str, Enum):
    Definition = "definition"
    OptimizationOnly = "optimization_only"
    Declaration = "declaration"


@dataclass(frozen=True)
class ParamAttributeSet:
    flags: frozenset = frozenset()
    dereferenceable_bytes: Optional[int] = None

    def __bool__(self) -> bool:
        return bool(self.flags) or self.dereferenceable_bytes is not None

    def with_flag(self, flag: str) -> ParamAttributeSet:
        return ParamAttributeSet(self.flags | {flag}, self.dereferenceable_bytes)

    def merge(self, other: ParamAttributeSet) -> ParamAttributeSet:
        deref = self.dereferenceable_bytes
        if other.dereferenceable_bytes is not None:
            deref = max(deref or 0, other.dereferenceable_bytes)
        return ParamAttributeSet(self.flags | other.flags, deref)


NO_ATTRS = ParamAttributeSet()


@dataclass
class Instruction:
    opcode: Opcode
    result: Optional[str] = None
    type: Optional[str] = None
    args: list = field(default_factory=list)
    symbol: Optional[str] = None
    imm: Optional[int] = None
    labels: list = field(default_factory=list)
    metadata: frozenset = frozenset()
    result_attrs: ParamAttributeSet = NO_ATTRS
    arg_attrs: tuple = ()

    @property
    def is_terminator(self) -> bool:
        return self.opcode in TERMINATORS

    def has_md(self, kind: str) -> bool:
        return kind in self.metadata

    def replace_arg(self, old: str, new: str) -> bool:
        hit = False
        for i, a in enumerate(self.args):
            if a == old:
                self.args[i] = new
                hit = True
        return hit


@dataclass
class BasicBlock:
    label: str
    instructions: list = field(default_factory=list)

    @property
    def terminator(self) -> Optional[Instruction]:
        if self.instructions and self.instructions[-1].is_terminator:
            return self.instructions[-1]
        return None

    def successors(self) -> list:
        term = self.terminator
        return list(term.labels) if term is not None else []

    def phis(self) -> Iterator[Instruction]:
        for inst in self.instructions:
            if inst.opcode is not Opcode.Phi:
                break
            yield inst

    def first_non_phi(self) -> int:
        for i, inst in enumerate(self.instructions):
            if inst.opcode is not Opcode.Phi:
                return i
        return len(self.instructions)


@dataclass
class Param:
    name: str
    type: str
    attrs: ParamAttributeSet = NO_ATTRS


@dataclass
class Declaration:
    name: str
    ret_type: str
    params: list = field(default_factory=list)
    attributes: frozenset = frozenset()


@dataclass
class IRFunction:
    name: str
    ret_type: str
    params: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    attributes: frozenset = frozenset()

    @property
    def entry(self) -> BasicBlock:
        return self.blocks[0]

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def block_map(self) -> dict:
        return {b.label: b for b in self.blocks}

    def instructions(self) -> Iterator[Instruction]:
        for b in self.blocks:
            yield from b.instructions

    def definitions(self) -> dict:
        """Map each SSA name to its defining instruction (params map to None)."""
        defs = {p.name: None for p in self.params}
        for inst in self.instructions():
            if inst.result is not None:
                defs[inst.result] = inst
        return defs

    def size(self) -> int:
        return sum(len(b.instructions) for b in self.blocks)


@dataclass
class VTableGlobal:
    name: str
    class_name: str
    slots: list = field(default_factory=list)
    linkage: Linkage = Linkage.Definition


@dataclass
class IRModule:
    name: str
    functions: list = field(default_factory=list)
    declarations: list = field(default_factory=list)
    vtables: list = field(default_factory=list)

    def function(self, name: str) -> Optional[IRFunction]:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def declaration(self, name: str) -> Optional[Declaration]:
        for d in self.declarations:
            if d.name == name:
                return d
        return None

    def vtable(self, name: str) -> Optional[VTableGlobal]:
        for v in self.vtables:
            if v.name == name:
                return v
        return None

    def callable(self, name: str):
        """The function or declaration called ``name``."""
        return self.function(name) or self.declaration(name)

    def global_names(self) -> list:
        return (
            [d.name for d in self.declarations]
            + [v.name for v in self.vtables]
            + [f.name for f in self.functions]
        )


class NameGen:
    """Hands out SSA names and block labels not yet used in a function."""

    def __init__(self, f: IRFunction):
        self.used = {p.name for p in f.params}
        self.labels = {b.label for b in f.blocks}
        for inst in f.instructions():
            if inst.result is not None:
                self.used.add(inst.result)
        self.counter = 0

    def value(self, hint: str = "t") -> str:
        while True:
            self.counter += 1
            name = f"{hint}.{self.counter}"
            if name not in self.used:
                self.used.add(name)
                return name

    def label(self, hint: str) -> str:
        n = 0
        name = hint
        while name in self.labels:
            n += 1
            name = f"{hint}.{n}"
        self.labels.add(name)
        return name
