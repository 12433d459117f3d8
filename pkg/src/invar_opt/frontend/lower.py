"""Lowering of resolved MiniOO programs to SSA IR.

SSA form is built on the fly from local variables (Braun et al. style:
blocks are sealed once all predecessors are known and trivial phis are
folded away). With strict vtable pointers enabled the lowering emits the
launder/strip intrinsics, invariant metadata on vptr and slot accesses, and
assumption loads after constructors whose body is not available.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..ir import (
    INVARIANT_GROUP,
    INVARIANT_LOAD,
    BasicBlock,
    Declaration,
    Instruction,
    IRFunction,
    IRModule,
    Linkage,
    Opcode,
    Param,
    VTableGlobal,
)
from ..ir.cfg import remove_unreachable_blocks
from . import ast as A
from .ast import is_ptr, pointee
from .parser import ClassTable

PRINT_SYMBOL = "print"
FREE_SYMBOL = "free"


@dataclass
class LoweringOptions:
    strict_vtable_pointers: bool = True
    force_emit_vtables: bool = False


def vtable_name(cls: str) -> str:
    return f"vtable.{cls}"


def ir_type(ty: str) -> str:
    if ty in ("int", "bool", "void"):
        return ty
    return "ptr"


def emit_vtables(p: A.SourceProgram, opts: Optional[LoweringOptions] = None) -> list:
    opts = opts or LoweringOptions()
    table = ClassTable(p)
    out = []
    for c in p.classes:
        if not c.dynamic:
            continue
        slots = table.vtable_slots(c.name)
        if c.has_key_function:
            linkage = Linkage.Definition
        elif opts.force_emit_vtables or all(_slot_available(m) for _, m in slots):
            linkage = Linkage.OptimizationOnly
        else:
            linkage = Linkage.Declaration
        out.append(VTableGlobal(vtable_name(c.name), c.name, [m.symbol for _, m in slots], linkage))
    return out


def _slot_available(m: A.MethodDecl) -> bool:
    # Inline members defined elsewhere may have no exported symbol; outline
    # members always do, whether or not their body is in this input.
    return m.body is not None or not (m.is_inline or m.is_extern)


def lower_to_ir(p: A.SourceProgram, opts: Optional[LoweringOptions] = None, name: str = "main") -> IRModule:
    if not getattr(p, "resolved", False):
        raise ValueError("lowering requires a resolved program (use parse_source)")
    return _ModuleLowering(p, opts or LoweringOptions(), name).run()


class _ModuleLowering:
    def __init__(self, p: A.SourceProgram, opts: LoweringOptions, name: str):
        self.p = p
        self.opts = opts
        self.table = ClassTable(p)
        self.module = IRModule(name)
        self.builtins = set()

    def run(self) -> IRModule:
        m = self.module
        m.vtables = emit_vtables(self.p, self.opts)
        decls = [Declaration(e.name, ir_type(e.ret), [Param(q.name, ir_type(q.type)) for q in e.params]) for e in self.p.externals]
        for c in self.p.classes:
            for sym, params, ret, body, kind in self.members(c):
                if body is None:
                    decls.append(Declaration(sym, ir_type(ret), [Param("this", "ptr")] + [Param(q.name, ir_type(q.type)) for q in params]))
                else:
                    m.functions.append(_FunctionLowering(self, sym, params, ret, c.name, kind, body).run())
        for f in self.p.functions:
            m.functions.append(_FunctionLowering(self, f.name, f.params, f.ret, None, "function", f.body).run())
        if PRINT_SYMBOL in self.builtins:
            decls.append(Declaration(PRINT_SYMBOL, "void", [Param("v", "int")]))
        if FREE_SYMBOL in self.builtins:
            decls.append(Declaration(FREE_SYMBOL, "void", [Param("p", "ptr")]))
        m.declarations = decls
        return m

    def members(self, c: A.ClassDecl):
        """(symbol, params, ret, body, kind) for every member function of c."""
        return [(m.symbol, m.params, m.ret, m.body, m.kind) for m in c.methods]

    def ctor_symbol(self, cls: str) -> str:
        return f"{cls}::{cls}"

    def ctor_has_body(self, cls: str) -> bool:
        ctor = self.table.ctor(cls)
        return ctor is None or ctor.body is not None

    def dtor_symbol(self, cls: str) -> str:
        return f"{cls}::~{cls}"


class _FunctionLowering:
    def __init__(self, ml: _ModuleLowering, symbol, params, ret, cls, kind, body):
        self.ml = ml
        self.table = ml.table
        self.strict = ml.opts.strict_vtable_pointers
        self.cls = cls
        self.kind = kind
        self.body = body
        self.ret = ret
        ir_params = ([Param("this", "ptr")] if cls is not None else []) + [
            Param(q.name, ir_type(q.type)) for q in params
        ]
        self.f = IRFunction(symbol, ir_type(ret), ir_params)
        self.counter = 0
        self.label_counts = {}
        # SSA construction state
        self.preds = {}
        self.sealed = set()
        self.defs = {}  # var key -> {block label: value}
        self.var_types = {}
        self.incomplete = {}  # block label -> {var key: phi instruction}
        self.phi_block = {}
        self.scopes = []
        self.block: Optional[BasicBlock] = None
        self.epilogue: Optional[str] = None

    # -- blocks and emission
    def new_block(self, hint: str) -> BasicBlock:
        n = self.label_counts.get(hint, 0)
        self.label_counts[hint] = n + 1
        label = hint if n == 0 else f"{hint}.{n}"
        b = BasicBlock(label)
        self.f.blocks.append(b)
        self.preds[label] = []
        return b

    def fresh(self, hint: str = "t") -> str:
        self.counter += 1
        return f"{hint}.{self.counter}"

    def emit(self, opcode, type=None, args=(), hint="t", **kw) -> Optional[str]:
        result = self.fresh(hint) if type is not None and type != "void" else None
        self.block.instructions.append(
            Instruction(opcode, result, type if result else None, list(args), **kw)
        )
        return result

    def terminated(self) -> bool:
        return self.block is None or self.block.terminator is not None

    def branch(self, target: BasicBlock):
        if self.terminated():
            return
        self.emit(Opcode.Br, labels=[target.label])
        self.preds[target.label].append(self.block.label)

    def cond_branch(self, cond: str, then: BasicBlock, orelse: BasicBlock):
        self.emit(Opcode.CondBr, args=[cond], labels=[then.label, orelse.label])
        self.preds[then.label].append(self.block.label)
        self.preds[orelse.label].append(self.block.label)

    def switch_to(self, b: BasicBlock):
        self.block = b

    def ensure_block(self):
        # statements after a return go to a fresh, unreachable block
        if self.terminated():
            b = self.new_block("dead")
            self.seal(b.label)
            self.block = b

    # -- SSA variables
    def declare(self, name: str, ty: str) -> str:
        key = f"{name}#{self.counter}.{len(self.var_types)}"
        self.scopes[-1][name] = key
        self.var_types[key] = ir_type(ty)
        self.defs[key] = {}
        return key

    def var_key(self, name: str) -> str:
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        raise KeyError(name)  # pragma: no cover - the resolver rejects this

    def write(self, key: str, label: str, value: str):
        self.defs[key][label] = value

    def read(self, key: str, label: str) -> str:
        if label in self.defs[key]:
            return self.defs[key][label]
        return self.read_recursive(key, label)

    def read_recursive(self, key: str, label: str) -> str:
        if label not in self.sealed:
            phi = self.new_phi(key, label)
            self.incomplete.setdefault(label, {})[key] = phi
            value = phi.result
        elif len(self.preds[label]) == 1:
            value = self.read(key, self.preds[label][0])
        else:
            phi = self.new_phi(key, label)
            self.write(key, label, phi.result)
            value = self.add_phi_operands(key, phi)
        self.write(key, label, value)
        return value

    def new_phi(self, key: str, label: str) -> Instruction:
        b = self.f.block(label)
        phi = Instruction(Opcode.Phi, self.fresh(key.split("#")[0]), self.var_types[key])
        b.instructions.insert(b.first_non_phi(), phi)
        self.phi_block[phi.result] = label
        return phi

    def add_phi_operands(self, key: str, phi: Instruction) -> str:
        label = self.phi_block[phi.result]
        for pred in self.preds[label]:
            phi.args.append(self.read(key, pred))
            phi.labels.append(pred)
        return self.remove_trivial_phi(phi)

    def remove_trivial_phi(self, phi: Instruction) -> str:
        same = None
        for a in phi.args:
            if a == same or a == phi.result:
                continue
            if same is not None:
                return phi.result
            same = a
        if same is None:
            same = self.undef(phi.type)
        label = self.phi_block.pop(phi.result)
        b = self.f.block(label)
        b.instructions.remove(phi)
        users = []
        for inst in self.f.instructions():
            if inst.replace_arg(phi.result, same) and inst.opcode is Opcode.Phi and inst.result in self.phi_block:
                users.append(inst)
        for per_block in self.defs.values():
            for lbl, v in per_block.items():
                if v == phi.result:
                    per_block[lbl] = same
        for pending in self.incomplete.values():
            for k, p in list(pending.items()):
                if p is phi:
                    del pending[k]
        for u in users:
            if u.result in self.phi_block:
                self.remove_trivial_phi(u)
        return same

    def undef(self, ty: str) -> str:
        name = self.fresh("undef")
        entry = self.f.blocks[0]
        entry.instructions.insert(0, Instruction(Opcode.ConstUndef, name, ty))
        return name

    def seal(self, label: str):
        for key, phi in list(self.incomplete.pop(label, {}).items()):
            if phi.result in self.phi_block:
                self.add_phi_operands(key, phi)
        self.sealed.add(label)

    # -- function body
    def run(self) -> IRFunction:
        entry = self.new_block("entry")
        self.seal(entry.label)
        self.switch_to(entry)
        self.scopes.append({})
        for q in self.f.params:
            key = self.declare(q.name, "ptr" if q.type == "ptr" else q.type)
            self.write(key, entry.label, q.name)
        if self.kind == "ctor":
            self.constructor_prologue()
        is_dtor = self.kind == "dtor"
        if is_dtor:
            self.destructor_prologue()
            self.epilogue = "dtor"
            self.epilogue_block = self.new_block("dtor.base")
        self.stmts(self.body or [])
        if is_dtor:
            self.branch(self.epilogue_block)
            self.seal(self.epilogue_block.label)
            self.switch_to(self.epilogue_block)
            self.destructor_epilogue()
            if not self.terminated():
                self.emit(Opcode.Ret)
        elif not self.terminated():
            self.default_return()
        self.scopes.pop()
        remove_unreachable_blocks(self.f)
        return self.f

    def default_return(self):
        if self.f.ret_type == "void":
            self.emit(Opcode.Ret)
        elif self.f.ret_type == "int":
            v = self.emit(Opcode.ConstInt, "int", imm=0)
            self.emit(Opcode.Ret, args=[v])
        else:
            v = self.emit(Opcode.ConstNull, "ptr")
            self.emit(Opcode.Ret, args=[v])

    def this(self) -> str:
        return self.read(self.var_key("this"), self.block.label)

    def constructor_prologue(self):
        c = self.table.by_name[self.cls]
        this = self.this()
        if c.base and self.table.needs_ctor(c.base):
            t = self.launder(this)
            self.construct(c.base, t, [])
        if c.dynamic:
            g = self.emit(Opcode.GlobalRef, "ptr", symbol=vtable_name(self.cls), hint="vt")
            self.emit(Opcode.Store, args=[g, self.this()], metadata=self.ig())

    def destructor_prologue(self):
        c = self.table.by_name[self.cls]
        if c.dynamic:
            g = self.emit(Opcode.GlobalRef, "ptr", symbol=vtable_name(self.cls), hint="vt")
            self.emit(Opcode.Store, args=[g, self.this()], metadata=self.ig())

    def destructor_epilogue(self):
        c = self.table.by_name[self.cls]
        if c.base and self.table.has_dtor(c.base):
            t = self.launder(self.this())
            self.emit(Opcode.CallDirect, symbol=self.ml.dtor_symbol(c.base), args=[t])

    # -- model helpers
    def ig(self) -> frozenset:
        return frozenset({INVARIANT_GROUP}) if self.strict else frozenset()

    def il(self) -> frozenset:
        return frozenset({INVARIANT_LOAD}) if self.strict else frozenset()

    def launder(self, v: str) -> str:
        if not self.strict:
            return v
        return self.emit(Opcode.IntrinsicLaunder, "ptr", [v], hint="l")

    def strip(self, v: str) -> str:
        if not self.strict:
            return v
        return self.emit(Opcode.IntrinsicStrip, "ptr", [v], hint="s")

    def construct(self, cls: str, obj: str, args: list):
        """Call cls's constructor on obj, then add the assumption load when
        the constructor body is not available."""
        self.emit(Opcode.CallDirect, symbol=self.ml.ctor_symbol(cls), args=[obj] + args)
        if self.strict and self.table.by_name[cls].dynamic and not self.ml.ctor_has_body(cls):
            v = self.emit(Opcode.Load, "ptr", [obj], metadata=self.ig(), hint="vptr")
            g = self.emit(Opcode.GlobalRef, "ptr", symbol=vtable_name(cls), hint="vt")
            c = self.emit(Opcode.ICmpEq, "bool", [v, g], hint="known")
            self.emit(Opcode.IntrinsicAssume, args=[c])

    # -- statements
    def stmts(self, stmts: list):
        self.scopes.append({})
        for s in stmts:
            self.ensure_block()
            self.stmt(s)
        self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, A.VarDecl):
            v = self.expr(s.init)
            key = self.declare(s.name, s.type)
            self.write(key, self.block.label, v)
        elif isinstance(s, A.Assign):
            if isinstance(s.target, A.Name):
                v = self.expr(s.value)
                self.write(self.var_key(s.target.id), self.block.label, v)
            else:
                addr = self.field_address(s.target)
                v = self.expr(s.value)
                self.emit(Opcode.Store, args=[v, addr])
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr)
        elif isinstance(s, A.If):
            self.lower_if(s)
        elif isinstance(s, A.While):
            self.lower_while(s)
        elif isinstance(s, A.Return):
            if self.epilogue is not None:
                self.branch(self.epilogue_block)
            elif s.value is None:
                self.emit(Opcode.Ret)
            else:
                self.emit(Opcode.Ret, args=[self.expr(s.value)])
        elif isinstance(s, A.Delete):
            self.lower_delete(s)
        elif isinstance(s, A.Print):
            v = self.expr(s.value)
            self.ml.builtins.add(PRINT_SYMBOL)
            self.emit(Opcode.CallDirect, symbol=PRINT_SYMBOL, args=[v])
        else:  # pragma: no cover
            raise TypeError(s)

    def condition(self, e) -> str:
        v = self.expr(e)
        if e.ty == "bool":
            return v
        zero = self.emit(Opcode.ConstInt, "int", imm=0)
        return self.emit(Opcode.ICmpNe, "bool", [v, zero], hint="cond")

    def lower_if(self, s: A.If):
        c = self.condition(s.cond)
        then = self.new_block("then")
        orelse = self.new_block("else") if s.orelse else None
        join = self.new_block("join")
        self.cond_branch(c, then, orelse or join)
        self.seal(then.label)
        self.switch_to(then)
        self.stmts(s.then)
        self.branch(join)
        if orelse is not None:
            self.seal(orelse.label)
            self.switch_to(orelse)
            self.stmts(s.orelse)
            self.branch(join)
        self.seal(join.label)
        self.switch_to(join)

    def lower_while(self, s: A.While):
        # rotated: guard, then a body that re-tests at its end
        c0 = self.condition(s.cond)
        body = self.new_block("loop")
        exit_ = self.new_block("loop.exit")
        self.cond_branch(c0, body, exit_)
        self.switch_to(body)
        self.stmts(s.body)
        if not self.terminated():
            latch_cond = self.condition(s.cond)
            self.cond_branch(latch_cond, body, exit_)
        self.seal(body.label)
        self.seal(exit_.label)
        self.switch_to(exit_)

    def lower_delete(self, s: A.Delete):
        p = self.expr(s.value)
        cls = pointee(s.value.ty)
        if cls in self.table.by_name and self.table.has_dtor(cls):
            if self.table.dtor_is_virtual(cls):
                self.virtual_call(cls, "~", p, [], "void")
            else:
                self.emit(Opcode.CallDirect, symbol=self.ml.dtor_symbol(cls), args=[p])
        self.ml.builtins.add(FREE_SYMBOL)
        self.emit(Opcode.CallDirect, symbol=FREE_SYMBOL, args=[p])

    # -- expressions
    def field_address(self, e: A.FieldRef) -> str:
        base = self.strip(self.expr(e.obj))
        return self.emit(Opcode.FieldAddr, "ptr", [base], imm=e.offset, hint="fld")

    def virtual_call(self, cls: str, slot_name: str, obj: str, args: list, ret: str) -> Optional[str]:
        k = self.table.slot_index(cls, slot_name)
        vp = self.emit(Opcode.Load, "ptr", [obj], metadata=self.ig(), hint="vptr")
        sa = self.emit(Opcode.FieldAddr, "ptr", [vp], imm=8 * k, hint="slot")
        fn = self.emit(Opcode.Load, "ptr", [sa], metadata=self.il(), hint="fn")
        return self.emit(Opcode.CallIndirect, ir_type(ret), [fn, obj] + args, hint="r")

    def method_call(self, obj_ty: str, m: A.MethodDecl, obj: str, args: list) -> Optional[str]:
        vals = [self.expr(a) for a in args]
        if m.is_virtual:
            return self.virtual_call(pointee(obj_ty), m.slot_name, obj, vals, m.ret)
        return self.emit(Opcode.CallDirect, ir_type(m.ret), [obj] + vals, symbol=m.symbol, hint="r")

    def expr(self, e) -> Optional[str]:
        if isinstance(e, A.IntLit):
            return self.emit(Opcode.ConstInt, "int", imm=e.value, hint="c")
        if isinstance(e, A.NullLit):
            return self.emit(Opcode.ConstNull, "ptr", hint="null")
        if isinstance(e, A.This):
            return self.this()
        if isinstance(e, A.Name):
            return self.read(self.var_key(e.id), self.block.label)
        if isinstance(e, A.Call):
            if isinstance(e.target, A.MethodDecl):
                return self.method_call(A.ptr(self.cls), e.target, self.this(), e.args)
            vals = [self.expr(a) for a in e.args]
            return self.emit(Opcode.CallDirect, ir_type(e.target.ret), vals, symbol=e.target.name, hint="r")
        if isinstance(e, A.MemberCall):
            obj = self.expr(e.obj)
            return self.method_call(e.obj.ty, e.method, obj, e.args)
        if isinstance(e, A.FieldRef):
            addr = self.field_address(e)
            return self.emit(Opcode.Load, "int", [addr], hint="f")
        if isinstance(e, A.New):
            return self.lower_new(e)
        if isinstance(e, A.Launder):
            return self.launder(self.expr(e.value))
        if isinstance(e, A.Ptr2Int):
            return self.emit(Opcode.PtrToInt, "int", [self.strip(self.expr(e.value))], hint="i")
        if isinstance(e, A.Int2Ptr):
            raw = self.emit(Opcode.IntToPtr, "ptr", [self.expr(e.value)], hint="p")
            return self.launder(raw)
        if isinstance(e, A.As):
            return self.launder(self.expr(e.value))
        if isinstance(e, A.Binary):
            left = self.expr(e.left)
            right = self.expr(e.right)
            if e.op in ("==", "!="):
                if is_ptr(e.left.ty):
                    left, right = self.strip(left), self.strip(right)
                op = Opcode.ICmpEq if e.op == "==" else Opcode.ICmpNe
                return self.emit(op, "bool", [left, right], hint="cmp")
            if e.op == "<":
                return self.emit(Opcode.ICmpSlt, "bool", [left, right], hint="cmp")
            op = {"+": Opcode.Add, "-": Opcode.Sub, "*": Opcode.Mul}[e.op]
            return self.emit(op, "int", [left, right], hint="a")
        if isinstance(e, A.Neg):
            v = self.expr(e.value)
            zero = self.emit(Opcode.ConstInt, "int", imm=0, hint="c")
            return self.emit(Opcode.Sub, "int", [zero, v], hint="a")
        raise TypeError(e)  # pragma: no cover

    def lower_new(self, e: A.New) -> str:
        if self.ml.p.union(e.cls) is not None:
            return self.emit(Opcode.Alloc, "ptr", imm=self.table.union_size(e.cls), hint="obj")
        if e.place is not None:
            obj = self.launder(self.expr(e.place))
        else:
            obj = self.emit(Opcode.Alloc, "ptr", imm=self.table.size(e.cls), hint="obj")
        args = [self.expr(a) for a in e.args]
        if self.table.needs_ctor(e.cls):
            self.construct(e.cls, obj, args)
        return obj
