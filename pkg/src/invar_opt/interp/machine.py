"""Reference interpreter over fat pointers.

A pointer is (allocation, offset, generation). ``launder`` hands out a
generation never used before for that allocation and ``strip`` erases it.
Each generation is bound to the value seen by its first invariant-group
access; a later invariant-group access through the same generation that
sees or writes a different value is a stale use of dynamic information.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..ir import INVARIANT_GROUP, INVARIANT_LOAD, SLOT_SIZE, IRFunction, IRModule, Opcode

STRIPPED = "stripped"
WORD_MASK = (1 << 64) - 1
UB_KINDS = ("stale-dynamic-info", "use-after-free", "oob", "invalid-indirect-callee")
MODES = ("checked", "raw")


@dataclass(frozen=True)
class RuntimePointer:
    alloc_id: int
    offset: int
    generation: object = STRIPPED

    def __str__(self) -> str:
        return f"p{self.alloc_id}+{self.offset}"


@dataclass(frozen=True)
class FunctionHandle:
    symbol: str

    def __str__(self) -> str:
        return f"@{self.symbol}"


NULL = RuntimePointer(0, 0, STRIPPED)


@dataclass(frozen=True)
class UBReport:
    kind: str
    location: str
    alloc_id: Optional[int] = None

    def __str__(self) -> str:
        return f"ub {self.kind} @{self.location}"


@dataclass
class ExecTrace:
    prints: list = field(default_factory=list)
    external_calls: list = field(default_factory=list)
    ub_reports: list = field(default_factory=list)
    op_counts: Counter = field(default_factory=Counter)
    result: object = None

    def observable(self) -> tuple:
        return (tuple(self.prints), tuple(self.external_calls))

    def lines(self) -> list:
        # prints, external calls and reports in execution order
        return [line for _, line in self._events]

    def to_text(self) -> str:
        out = self.lines()
        return "\n".join(out) + ("\n" if out else "")

    def __post_init__(self):
        self._events = []
        self._seq = 0

    def _log(self, line: str):
        self._events.append((self._seq, line))
        self._seq += 1


class InterpreterError(Exception):
    """A trap in raw mode, or a malformed program in either mode."""


class _Halt(Exception):
    pass


def _wrap(v: int) -> int:
    v &= WORD_MASK
    return v - (1 << 64) if v >> 63 else v


def _fmt_arg(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    return str(v)


@dataclass
class Allocation:
    alloc_id: int
    size: int
    readonly: bool = False
    live: bool = True
    slots: dict = field(default_factory=dict)
    epoch: int = 0
    next_generation: int = 1


class MemoryState:
    """Allocations, per-allocation epochs and generation bookkeeping."""

    def __init__(self):
        self.allocations = {}
        self.birth_epoch = {}  # (alloc id, generation) -> epoch at creation
        self.binding = {}  # (alloc id, generation, offset) -> value
        self.launders = Counter()

    def allocate(self, size: int, readonly: bool = False) -> RuntimePointer:
        aid = len(self.allocations) + 1
        self.allocations[aid] = Allocation(aid, size, readonly)
        self.birth_epoch[(aid, 0)] = 0
        return RuntimePointer(aid, 0, 0)

    def launder(self, p: RuntimePointer) -> RuntimePointer:
        a = self.allocations.get(p.alloc_id)
        if a is None:
            return p if p.alloc_id == 0 else RuntimePointer(p.alloc_id, p.offset, STRIPPED)
        gen = a.next_generation
        a.next_generation += 1
        self.birth_epoch[(a.alloc_id, gen)] = a.epoch
        self.launders[a.alloc_id] += 1
        return RuntimePointer(p.alloc_id, p.offset, gen)


class Machine:
    def __init__(self, m: IRModule, mode: str = "checked", step_limit: int = 2_000_000, depth_limit: int = 400):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.m = m
        self.mode = mode
        self.checked = mode == "checked"
        self.step_limit = step_limit
        self.depth_limit = depth_limit
        self.steps = 0
        self.depth = 0
        self.mem = MemoryState()
        self.trace = ExecTrace()
        self.functions = {f.name: f for f in m.functions}
        self.declarations = {d.name: d for d in m.declarations}
        self.vtables = {}
        self.vtable_by_class = {}
        for v in m.vtables:
            p = self.mem.allocate(max(SLOT_SIZE, SLOT_SIZE * len(v.slots)), readonly=True)
            a = self.mem.allocations[p.alloc_id]
            for i, s in enumerate(v.slots):
                a.slots[i * SLOT_SIZE] = FunctionHandle(s)
            self.vtables[v.name] = p
            self.vtable_by_class[v.class_name] = p
        self._blocks = {}
        self.globals = set(m.global_names())

    # -- errors
    def fault(self, kind: str, loc: str, alloc_id=None, halt: bool = True):
        if not self.checked:
            raise InterpreterError(f"{kind} at {loc}")
        self.trace.ub_reports.append(UBReport(kind, loc, alloc_id))
        self.trace._log(f"ub {kind} @{loc}")
        if halt:
            raise _Halt()

    # -- memory
    def _slot(self, p, loc: str, write: bool = False):
        if not isinstance(p, RuntimePointer):
            self.fault("oob", loc)
        a = self.mem.allocations.get(p.alloc_id)
        if a is None:
            self.fault("oob", loc, p.alloc_id)
        if not a.live:
            self.fault("use-after-free", loc, a.alloc_id)
        if p.offset < 0 or p.offset % SLOT_SIZE or p.offset + SLOT_SIZE > a.size or (write and a.readonly):
            self.fault("oob", loc, a.alloc_id)
        return a

    def _check_group(self, p: RuntimePointer, a: Allocation, value, loc: str):
        if p.generation == STRIPPED:
            return
        key = (a.alloc_id, p.generation, p.offset)
        bound = self.mem.binding.get(key, _UNBOUND)
        if bound is _UNBOUND:
            self.mem.binding[key] = value
        elif bound != value:
            self.fault("stale-dynamic-info", loc, a.alloc_id, halt=False)
            self.mem.binding[key] = value

    def load(self, p, md, loc):
        a = self._slot(p, loc)
        value = a.slots.get(p.offset, 0)
        if INVARIANT_GROUP in md and self.checked:
            self._check_group(p, a, value, loc)
        return value

    def store(self, value, p, md, loc):
        a = self._slot(p, loc, write=True)
        if INVARIANT_GROUP in md:
            a.epoch += 1
            if self.checked:
                self._check_group(p, a, value, loc)
        a.slots[p.offset] = value

    # -- calls
    def call(self, symbol: str, args: list, loc: str):
        if symbol in self.functions:
            return self.run_function(self.functions[symbol], args)
        d = self.declarations.get(symbol)
        if d is None:
            self.fault("invalid-indirect-callee", loc)
        if symbol == "print":
            self.trace.prints.append(args[0])
            self.trace._log(f"print {_fmt_arg(args[0])}")
            return None
        if symbol == "free":
            p = args[0]
            if isinstance(p, RuntimePointer) and p.alloc_id == 0:
                return None
            a = self._slot(p, loc) if isinstance(p, RuntimePointer) and p.offset == 0 else None
            if a is None or a.readonly:
                self.fault("oob", loc)
            a.live = False
            return None
        rendered = tuple(_fmt_arg(v) for v in args)
        self.trace.external_calls.append((symbol, rendered))
        self.trace._log(" ".join(("extcall", symbol) + rendered))
        owner, _, member = symbol.partition("::")
        if member == owner and owner in self.vtable_by_class and args and isinstance(args[0], RuntimePointer):
            # an external constructor installs its class's vtable
            self.store(self.vtable_by_class[owner], args[0], frozenset({INVARIANT_GROUP}), loc)
        if d.ret_type == "int":
            return 0
        if d.ret_type == "ptr":
            return NULL
        return None

    # -- execution
    def _decoded(self, f: IRFunction) -> dict:
        out = self._blocks.get(f.name)
        if out is None:
            out = {b.label: b.instructions for b in f.blocks}
            self._blocks[f.name] = out
        return out

    def run_function(self, f: IRFunction, args: list):
        if len(args) != len(f.params):
            raise InterpreterError(f"@{f.name} expects {len(f.params)} arguments, got {len(args)}")
        self.depth += 1
        if self.depth > self.depth_limit:
            raise InterpreterError("call depth limit exceeded")
        env = {p.name: v for p, v in zip(f.params, args)}
        blocks = self._decoded(f)
        label = f.blocks[0].label
        prev = None
        mem = self.mem
        counts = self.trace.op_counts
        try:
            while True:
                insts = blocks[label]
                i = 0
                # phis read their inputs simultaneously
                updates = []
                while i < len(insts) and insts[i].opcode is Opcode.Phi:
                    phi = insts[i]
                    try:
                        k = phi.labels.index(prev)
                    except ValueError:
                        raise InterpreterError(f"phi in %{label} has no entry for %{prev}") from None
                    updates.append((phi.result, env[phi.args[k]]))
                    i += 1
                for name, v in updates:
                    env[name] = v
                for inst in insts[i:]:
                    self.steps += 1
                    if self.steps > self.step_limit:
                        raise InterpreterError("step limit exceeded")
                    op = inst.opcode
                    args_ = inst.args
                    if op is Opcode.Load:
                        md = inst.metadata
                        if INVARIANT_GROUP in md:
                            counts["load[invariant.group]"] += 1
                        if INVARIANT_LOAD in md:
                            counts["load[invariant.load]"] += 1
                        counts["load"] += 1
                        if inst.type == "ptr":
                            counts["load.ptr"] += 1
                        env[inst.result] = self.load(env[args_[0]], md, f"{f.name}:{label}")
                    elif op is Opcode.Store:
                        counts["store"] += 1
                        self.store(env[args_[0]], env[args_[1]], inst.metadata, f"{f.name}:{label}")
                    elif op is Opcode.FieldAddr:
                        p = env[args_[0]]
                        if not isinstance(p, RuntimePointer):
                            self.fault("oob", f"{f.name}:{label}")
                        env[inst.result] = RuntimePointer(p.alloc_id, p.offset + inst.imm, STRIPPED)
                    elif op is Opcode.ConstInt:
                        env[inst.result] = bool(inst.imm) if inst.type == "bool" else inst.imm
                    elif op is Opcode.Add:
                        env[inst.result] = _wrap(env[args_[0]] + env[args_[1]])
                    elif op is Opcode.Sub:
                        env[inst.result] = _wrap(env[args_[0]] - env[args_[1]])
                    elif op is Opcode.Mul:
                        env[inst.result] = _wrap(env[args_[0]] * env[args_[1]])
                    elif op is Opcode.ICmpSlt:
                        env[inst.result] = env[args_[0]] < env[args_[1]]
                    elif op is Opcode.ICmpEq or op is Opcode.ICmpNe:
                        same = _equal(env[args_[0]], env[args_[1]])
                        env[inst.result] = same if op is Opcode.ICmpEq else not same
                    elif op is Opcode.Br:
                        prev, label = label, inst.labels[0]
                        break
                    elif op is Opcode.CondBr:
                        prev, label = label, inst.labels[0] if env[args_[0]] else inst.labels[1]
                        break
                    elif op is Opcode.Ret:
                        return env[args_[0]] if args_ else None
                    elif op is Opcode.CallDirect:
                        counts["call"] += 1
                        v = self.call(inst.symbol, [env[a] for a in args_], f"{f.name}:{label}")
                        if inst.result is not None:
                            env[inst.result] = v
                    elif op is Opcode.CallIndirect:
                        counts["call.indirect"] += 1
                        callee = env[args_[0]]
                        if not isinstance(callee, FunctionHandle) or callee.symbol not in self.globals:
                            self.fault("invalid-indirect-callee", f"{f.name}:{label}")
                        v = self.call(callee.symbol, [env[a] for a in args_[1:]], f"{f.name}:{label}")
                        if inst.result is not None:
                            env[inst.result] = v
                    elif op is Opcode.Alloc:
                        counts["alloc"] += 1
                        env[inst.result] = mem.allocate(inst.imm)
                    elif op is Opcode.IntrinsicLaunder:
                        counts["launder"] += 1
                        p = env[args_[0]]
                        env[inst.result] = mem.launder(p) if isinstance(p, RuntimePointer) else p
                    elif op is Opcode.IntrinsicStrip:
                        counts["strip"] += 1
                        p = env[args_[0]]
                        env[inst.result] = RuntimePointer(p.alloc_id, p.offset, STRIPPED) if isinstance(p, RuntimePointer) else p
                    elif op is Opcode.IntrinsicAssume:
                        if not env[args_[0]] and self.checked:
                            self.fault("stale-dynamic-info", f"{f.name}:{label}", halt=False)
                    elif op is Opcode.GlobalRef:
                        s = inst.symbol
                        env[inst.result] = self.vtables[s] if s in self.vtables else FunctionHandle(s)
                    elif op is Opcode.ConstNull:
                        env[inst.result] = NULL
                    elif op is Opcode.ConstUndef:
                        env[inst.result] = NULL if inst.type == "ptr" else (False if inst.type == "bool" else 0)
                    elif op is Opcode.PtrToInt:
                        p = env[args_[0]]
                        if isinstance(p, RuntimePointer):
                            env[inst.result] = (p.alloc_id << 32) | p.offset
                        else:
                            env[inst.result] = 0
                    elif op is Opcode.IntToPtr:
                        v = env[args_[0]] & WORD_MASK
                        env[inst.result] = RuntimePointer(v >> 32, v & 0xFFFFFFFF, STRIPPED)
                    else:  # pragma: no cover
                        raise InterpreterError(f"cannot execute {op.value}")
                else:
                    raise InterpreterError(f"block %{label} of @{f.name} has no terminator")
        finally:
            self.depth -= 1


_UNBOUND = object()


def _equal(a, b) -> bool:
    if isinstance(a, RuntimePointer) and isinstance(b, RuntimePointer):
        return a.alloc_id == b.alloc_id and a.offset == b.offset
    if isinstance(a, RuntimePointer) or isinstance(b, RuntimePointer):
        return False
    return a == b


def eval_module(m: IRModule, entry: str = "main", mode: str = "checked", args=(), step_limit: int = 2_000_000) -> ExecTrace:
    """Run entry and return its trace. Checked mode records undefined
    behavior; raw mode raises InterpreterError on a trap."""
    machine = Machine(m, mode, step_limit)
    f = machine.functions.get(entry)
    if f is None:
        raise ValueError(f"entry @{entry} has no body in module @{m.name}")
    try:
        machine.trace.result = machine.run_function(f, list(args))
    except _Halt:
        pass
    return machine.trace
