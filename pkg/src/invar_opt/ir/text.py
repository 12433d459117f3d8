"""Textual IR: a deterministic printer and the matching line-oriented parser.

Example::

    module @demo
    declare void @external_fun(ptr %a)
    vtable @vtable.A for A linkage=definition [ @A::f ]
    define void @g(ptr %p nonnull) {
    entry:
      %v = load ptr %p !invariant.group
      %q = call ptr @llvm.launder.invariant.group(%p)
      ret
    }
"""

from __future__ import annotations

import re

from .nodes import (
    ASSUME_SYMBOL,
    FUNCTION_ATTRIBUTES,
    INTRINSIC_SYMBOLS,
    LAUNDER_SYMBOL,
    METADATA_KINDS,
    NO_ATTRS,
    RETURN_TYPES,
    STRIP_SYMBOL,
    VALUE_TYPES,
    BasicBlock,
    Declaration,
    Instruction,
    IRFunction,
    IRModule,
    Linkage,
    Opcode,
    Param,
    ParamAttributeSet,
    VTableGlobal,
)


class IRSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------- printing

_FLAG_ORDER = ("nonnull", "nocapture")
_ICMP = {Opcode.ICmpEq: "eq", Opcode.ICmpNe: "ne", Opcode.ICmpSlt: "slt"}
_ICMP_BY_NAME = {v: k for k, v in _ICMP.items()}
_BINARY = {Opcode.Add: "add", Opcode.Sub: "sub", Opcode.Mul: "mul"}
_INTRINSIC_NAME = {
    Opcode.IntrinsicLaunder: LAUNDER_SYMBOL,
    Opcode.IntrinsicStrip: STRIP_SYMBOL,
    Opcode.IntrinsicAssume: ASSUME_SYMBOL,
}


def format_attrs(attrs: ParamAttributeSet) -> str:
    parts = [f for f in _FLAG_ORDER if f in attrs.flags]
    parts += sorted(f for f in attrs.flags if f not in _FLAG_ORDER)
    if attrs.dereferenceable_bytes is not None:
        parts.append(f"dereferenceable({attrs.dereferenceable_bytes})")
    return " ".join(parts)


def _with_attrs(head: str, attrs: ParamAttributeSet) -> str:
    text = format_attrs(attrs)
    return f"{head} {text}" if text else head


def _call_args(inst: Instruction, start: int = 0) -> str:
    out = []
    for i, a in enumerate(inst.args[start:], start):
        attrs = inst.arg_attrs[i] if i < len(inst.arg_attrs) else NO_ATTRS
        out.append(_with_attrs(f"%{a}", attrs))
    return ", ".join(out)


def format_instruction(inst: Instruction) -> str:
    op = inst.opcode
    lhs = f"%{inst.result} = " if inst.result is not None else ""
    a = [f"%{x}" for x in inst.args]
    if op is Opcode.Alloc:
        body = f"alloc {inst.imm}"
    elif op is Opcode.Load:
        body = f"load {inst.type} {a[0]}"
    elif op is Opcode.Store:
        body = f"store {a[0]}, {a[1]}"
    elif op is Opcode.FieldAddr:
        body = f"fieldaddr {a[0]}, {inst.imm}"
    elif op is Opcode.CallDirect:
        body = f"call {_with_attrs(inst.type or 'void', inst.result_attrs)} @{inst.symbol}({_call_args(inst)})"
    elif op is Opcode.CallIndirect:
        body = f"call.indirect {_with_attrs(inst.type or 'void', inst.result_attrs)} {a[0]}({_call_args(inst, 1)})"
    elif op in _INTRINSIC_NAME:
        body = f"call {_with_attrs(inst.type or 'void', inst.result_attrs)} @{_INTRINSIC_NAME[op]}({_call_args(inst)})"
    elif op in _ICMP:
        body = f"icmp {_ICMP[op]} {a[0]}, {a[1]}"
    elif op in _BINARY:
        body = f"{_BINARY[op]} {a[0]}, {a[1]}"
    elif op is Opcode.PtrToInt:
        body = f"ptrtoint {a[0]}"
    elif op is Opcode.IntToPtr:
        body = f"inttoptr {a[0]}"
    elif op is Opcode.Br:
        body = f"br label %{inst.labels[0]}"
    elif op is Opcode.CondBr:
        body = f"condbr {a[0]}, label %{inst.labels[0]}, label %{inst.labels[1]}"
    elif op is Opcode.Ret:
        body = f"ret {a[0]}" if a else "ret"
    elif op is Opcode.Phi:
        pairs = ", ".join(f"[ %{v}, %{l} ]" for v, l in zip(inst.args, inst.labels))
        body = f"phi {inst.type} {pairs}"
    elif op is Opcode.ConstInt:
        body = f"const {inst.type} {inst.imm}"
    elif op is Opcode.ConstNull:
        body = "null"
    elif op is Opcode.ConstUndef:
        body = f"undef {inst.type}"
    elif op is Opcode.GlobalRef:
        body = f"globalref @{inst.symbol}"
    else:  # pragma: no cover - exhaustive over Opcode
        raise ValueError(op)
    for kind in METADATA_KINDS:
        if kind in inst.metadata:
            body += f" !{kind}"
    return lhs + body


def _format_params(params) -> str:
    return ", ".join(_with_attrs(f"{p.type} %{p.name}", p.attrs) for p in params)


def _format_fn_attrs(attrs) -> str:
    ordered = [a for a in FUNCTION_ATTRIBUTES if a in attrs]
    return "".join(f" {a}" for a in ordered)


def print_ir(m: IRModule) -> str:
    lines = [f"module @{m.name}"]
    for d in m.declarations:
        lines.append(f"declare {d.ret_type} @{d.name}({_format_params(d.params)}){_format_fn_attrs(d.attributes)}")
    for v in m.vtables:
        slots = ", ".join(f"@{s}" for s in v.slots)
        lines.append(f"vtable @{v.name} for {v.class_name} linkage={v.linkage.value} [ {slots} ]")
    for f in m.functions:
        lines.append("")
        lines.append(
            f"define {f.ret_type} @{f.name}({_format_params(f.params)}){_format_fn_attrs(f.attributes)} {{"
        )
        for b in f.blocks:
            lines.append(f"{b.label}:")
            for inst in b.instructions:
                lines.append("  " + format_instruction(inst))
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<value>%[A-Za-z0-9_.$\-]+)
  | (?P<symbol>@[A-Za-z0-9_.$:~\-]+)
  | (?P<md>![A-Za-z0-9_.]+)
  | (?P<int>-?[0-9]+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_.$\-]*(?:\([0-9]+\))?)
  | (?P<punct>[=,()\[\]{}:])
    """,
    re.VERBOSE,
)


class _Line:
    def __init__(self, text: str, lineno: int):
        self.lineno = lineno
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise IRSyntaxError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), pos + 1))
            pos = m.end()
        self.i = 0

    def error(self, message: str):
        col = self.tokens[self.i][2] if self.i < len(self.tokens) else (self.tokens[-1][2] if self.tokens else 1)
        return IRSyntaxError(message, self.lineno, col)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, 0)

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)

    def next(self, kind=None, text=None) -> str:
        k, t, _ = self.peek()
        if k is None:
            raise self.error(f"expected {text or kind}, found end of line")
        if (kind and k != kind) or (text and t != text):
            raise self.error(f"expected {text or kind}, found {t!r}")
        self.i += 1
        return t

    def accept(self, kind=None, text=None):
        k, t, _ = self.peek()
        if k is not None and (not kind or k == kind) and (not text or t == text):
            self.i += 1
            return t
        return None

    def end(self):
        if not self.at_end():
            raise self.error(f"unexpected {self.peek()[1]!r}")

    def value(self) -> str:
        return self.next("value")[1:]

    def symbol(self) -> str:
        return self.next("symbol")[1:]

    def integer(self) -> int:
        return int(self.next("int"))

    def vtype(self, allowed=VALUE_TYPES) -> str:
        t = self.next("word")
        if t not in allowed:
            raise IRSyntaxError(f"unknown type {t!r}", self.lineno, self.tokens[self.i - 1][2])
        return t

    def attrs(self) -> ParamAttributeSet:
        flags = set()
        deref = None
        while True:
            k, t, _ = self.peek()
            if k != "word":
                break
            if t in ("nonnull", "nocapture"):
                flags.add(t)
            elif t.startswith("dereferenceable(") and t.endswith(")"):
                deref = int(t[len("dereferenceable(") : -1])
            else:
                break
            self.i += 1
        return ParamAttributeSet(frozenset(flags), deref) if flags or deref is not None else NO_ATTRS

    def metadata(self) -> frozenset:
        md = set()
        while not self.at_end():
            t = self.next("md")[1:]
            if t not in METADATA_KINDS:
                raise IRSyntaxError(f"unknown metadata !{t}", self.lineno, self.tokens[self.i - 1][2])
            md.add(t)
        return frozenset(md)


def _params(line: _Line, allowed_types=VALUE_TYPES) -> list:
    line.next(text="(")
    params = []
    if not line.accept(text=")"):
        while True:
            ty = line.vtype(allowed_types)
            name = line.value()
            params.append(Param(name, ty, line.attrs()))
            if line.accept(text=")"):
                break
            line.next(text=",")
    return params


def _fn_attrs(line: _Line) -> frozenset:
    out = set()
    while True:
        k, t, _ = line.peek()
        if k == "word" and t in FUNCTION_ATTRIBUTES:
            out.add(t)
            line.i += 1
        else:
            return frozenset(out)


def _call_arg_list(line: _Line):
    args, attrs = [], []
    line.next(text="(")
    if not line.accept(text=")"):
        while True:
            args.append(line.value())
            attrs.append(line.attrs())
            if line.accept(text=")"):
                break
            line.next(text=",")
    arg_attrs = tuple(attrs) if any(attrs) else ()
    return args, arg_attrs


def _parse_instruction(line: _Line) -> Instruction:
    result = None
    if line.peek()[0] == "value":
        result = line.value()
        line.next(text="=")
    op = line.next("word")
    inst = None
    if op == "alloc":
        inst = Instruction(Opcode.Alloc, result, "ptr", imm=line.integer())
    elif op == "load":
        ty = line.vtype()
        inst = Instruction(Opcode.Load, result, ty, [line.value()])
    elif op == "store":
        v = line.value()
        line.next(text=",")
        inst = Instruction(Opcode.Store, None, None, [v, line.value()])
    elif op == "fieldaddr":
        p = line.value()
        line.next(text=",")
        inst = Instruction(Opcode.FieldAddr, result, "ptr", [p], imm=line.integer())
    elif op in ("call", "call.indirect"):
        ty = line.vtype(VALUE_TYPES + ("void",))
        rattrs = line.attrs()
        ty = None if ty == "void" else ty
        if op == "call":
            sym = line.symbol()
            args, arg_attrs = _call_arg_list(line)
            opcode = INTRINSIC_SYMBOLS.get(sym, Opcode.CallDirect)
            inst = Instruction(opcode, result, ty, args, arg_attrs=arg_attrs, result_attrs=rattrs)
            if opcode is Opcode.CallDirect:
                inst.symbol = sym
        else:
            callee = line.value()
            args, arg_attrs = _call_arg_list(line)
            if arg_attrs:
                arg_attrs = (NO_ATTRS,) + arg_attrs
            inst = Instruction(Opcode.CallIndirect, result, ty, [callee] + args, arg_attrs=arg_attrs, result_attrs=rattrs)
    elif op == "icmp":
        pred = line.next("word")
        if pred not in _ICMP_BY_NAME:
            raise line.error(f"unknown comparison {pred!r}")
        a = line.value()
        line.next(text=",")
        inst = Instruction(_ICMP_BY_NAME[pred], result, "bool", [a, line.value()])
    elif op in ("add", "sub", "mul"):
        a = line.value()
        line.next(text=",")
        opcode = {v: k for k, v in _BINARY.items()}[op]
        inst = Instruction(opcode, result, "int", [a, line.value()])
    elif op == "ptrtoint":
        inst = Instruction(Opcode.PtrToInt, result, "int", [line.value()])
    elif op == "inttoptr":
        inst = Instruction(Opcode.IntToPtr, result, "ptr", [line.value()])
    elif op == "br":
        line.next(text="label")
        inst = Instruction(Opcode.Br, labels=[line.value()])
    elif op == "condbr":
        c = line.value()
        line.next(text=",")
        line.next(text="label")
        t = line.value()
        line.next(text=",")
        line.next(text="label")
        inst = Instruction(Opcode.CondBr, args=[c], labels=[t, line.value()])
    elif op == "ret":
        inst = Instruction(Opcode.Ret, args=[line.value()] if line.peek()[0] == "value" else [])
    elif op == "phi":
        ty = line.vtype()
        args, labels = [], []
        while True:
            line.next(text="[")
            args.append(line.value())
            line.next(text=",")
            labels.append(line.value())
            line.next(text="]")
            if not line.accept(text=","):
                break
        inst = Instruction(Opcode.Phi, result, ty, args, labels=labels)
    elif op == "const":
        ty = line.vtype(("int", "bool"))
        inst = Instruction(Opcode.ConstInt, result, ty, imm=line.integer())
    elif op == "null":
        inst = Instruction(Opcode.ConstNull, result, "ptr")
    elif op == "undef":
        inst = Instruction(Opcode.ConstUndef, result, line.vtype())
    elif op == "globalref":
        inst = Instruction(Opcode.GlobalRef, result, "ptr", symbol=line.symbol())
    else:
        raise IRSyntaxError(f"unknown opcode {op!r}", line.lineno, line.tokens[line.i - 1][2])
    inst.metadata = line.metadata()
    produces = inst.type is not None
    if produces and result is None and inst.opcode not in (Opcode.CallDirect, Opcode.CallIndirect):
        raise IRSyntaxError(f"{op} must name its result", line.lineno, 1)
    if result is not None and not produces:
        raise IRSyntaxError(f"{op} produces no value", line.lineno, 1)
    if inst.opcode in (Opcode.CallDirect, Opcode.CallIndirect) and produces and result is None:
        raise IRSyntaxError("non-void call must name its result", line.lineno, 1)
    return inst


def parse_ir(text: str) -> IRModule:
    lines = []
    for n, raw in enumerate(text.split("\n"), 1):
        body = raw.split(";", 1)[0].rstrip()
        if body.strip():
            lines.append(_Line(body, n))
    if not lines:
        raise IRSyntaxError("expected module", 1, 1)
    head = lines[0]
    if head.accept("word") != "module":
        raise IRSyntaxError("expected module", head.lineno, 1)
    m = IRModule(head.symbol())
    head.end()

    i = 1
    symbol_refs = []  # (symbol, line, col)
    while i < len(lines):
        line = lines[i]
        kw = line.next("word")
        if kw == "declare":
            ret = line.vtype(RETURN_TYPES)
            name = line.symbol()
            params = _params(line)
            m.declarations.append(Declaration(name, ret, params, _fn_attrs(line)))
            line.end()
            i += 1
        elif kw == "vtable":
            name = line.symbol()
            line.next(text="for")
            cls = line.next("word")
            link = line.next("word")
            if not link.startswith("linkage"):
                raise line.error("expected linkage=")
            line.next(text="=")
            lk = line.next("word")
            try:
                linkage = Linkage(lk)
            except ValueError:
                raise line.error(f"unknown linkage {lk!r}") from None
            line.next(text="[")
            slots = []
            if not line.accept(text="]"):
                while True:
                    col = line.peek()[2]
                    slots.append(line.symbol())
                    symbol_refs.append((slots[-1], line.lineno, col))
                    if line.accept(text="]"):
                        break
                    line.next(text=",")
            line.end()
            m.vtables.append(VTableGlobal(name, cls, slots, linkage))
            i += 1
        elif kw == "define":
            ret = line.vtype(RETURN_TYPES)
            name = line.symbol()
            params = _params(line)
            attrs = _fn_attrs(line)
            line.next(text="{")
            line.end()
            f = IRFunction(name, ret, params, [], attrs)
            i += 1
            block = None
            while True:
                if i >= len(lines):
                    raise IRSyntaxError(f"unterminated function @{name}", line.lineno, 1)
                cur = lines[i]
                k, t, _ = cur.peek()
                if k == "punct" and t == "}":
                    cur.next()
                    cur.end()
                    i += 1
                    break
                if k == "word" and len(cur.tokens) == 2 and cur.tokens[1][1] == ":":
                    block = BasicBlock(t)
                    f.blocks.append(block)
                    i += 1
                    continue
                if block is None:
                    raise cur.error("instruction outside of a block")
                col = cur.peek()[2]
                inst = _parse_instruction(cur)
                if inst.symbol is not None:
                    symbol_refs.append((inst.symbol, cur.lineno, col))
                block.instructions.append(inst)
                i += 1
            if not f.blocks:
                raise IRSyntaxError(f"function @{name} has no blocks", line.lineno, 1)
            m.functions.append(f)
        else:
            raise IRSyntaxError(f"expected declare, vtable or define, found {kw!r}", line.lineno, 1)

    known = set(m.global_names())
    for sym, ln, col in symbol_refs:
        if sym not in known:
            raise IRSyntaxError(f"reference to undefined symbol @{sym}", ln, col)
    return m
