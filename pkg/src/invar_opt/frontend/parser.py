"""Tokenizer, recursive-descent parser and resolver for MiniOO.

Grammar summary::

    class Name [: Base] { int field; [virtual] [inline|extern] fn m(p: T): R {..}|;
                          [inline|extern] Name(params) {..}|;  [virtual] ~Name() {..}|; }
    union Name { A; B; }
    fn Class::method(params) [: R] { ... }      out-of-class member definition
    fn name(params) [: R] { ... }
    extern fn name(params) [: R];

Types are ``int`` or ``Name*``. Statements: ``var``, assignment, ``if``/``else``,
``while``, ``return``, ``delete``, ``print(...)`` and expression statements.
"""

from __future__ import annotations

import re

from . import ast as A
from .ast import SourceError, is_ptr, pointee, ptr

KEYWORDS = {
    "class", "union", "fn", "extern", "virtual", "inline", "var", "if", "else", "while",
    "return", "delete", "print", "new", "launder", "ptr2int", "int2ptr", "null", "this",
    "as", "int",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|::|==|!=|[{}()\[\];:,*=<>+\-~])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SourceError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "ident" and value in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append((kind, value, line, col))
        for i, ch in enumerate(value):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.outline = []  # out-of-class member definitions

    # -- token helpers
    def peek(self, k: int = 0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, value: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t[0] in ("op", "kw") and t[1] == value

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        return SourceError(message, tok[2], tok[3])

    def expect(self, value: str):
        tok = self.peek()
        if not self.at(value):
            found = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {found}")
        self.i += 1
        return tok

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.i += 1
            return True
        return False

    def ident(self) -> str:
        tok = self.peek()
        if tok[0] != "ident":
            found = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise self.error(f"expected identifier, found {found}")
        self.i += 1
        return tok[1]

    def pos(self) -> dict:
        tok = self.peek()
        return {"line": tok[2], "col": tok[3]}

    # -- declarations
    def program(self) -> A.SourceProgram:
        prog = A.SourceProgram()
        while self.peek()[0] != "eof":
            p = self.pos()
            if self.accept("class"):
                prog.classes.append(self.class_decl(p))
            elif self.accept("union"):
                name = self.ident()
                self.expect("{")
                alts = []
                while not self.accept("}"):
                    alts.append(self.ident())
                    self.expect(";")
                prog.unions.append(A.UnionDecl(name, alts, **p))
            elif self.accept("extern"):
                self.expect("fn")
                name = self.ident()
                params = self.params()
                ret = self.ret_type()
                self.expect(";")
                prog.externals.append(A.ExternDecl(name, params, ret, **p))
            elif self.accept("fn"):
                name = self.ident()
                if self.accept("::"):
                    dtor = self.accept("~")
                    member = self.ident()
                    params = self.params()
                    ret = self.ret_type()
                    body = self.block()
                    self.outline.append((name, member, dtor, params, ret, body, p))
                else:
                    params = self.params()
                    ret = self.ret_type()
                    prog.functions.append(A.FunctionDecl(name, params, ret, self.block(), **p))
            else:
                raise self.error(f"expected declaration, found {self.peek()[1]!r}")
        return prog

    def class_decl(self, p) -> A.ClassDecl:
        name = self.ident()
        base = self.ident() if self.accept(":") else None
        self.expect("{")
        fields, methods = [], []
        while not self.accept("}"):
            mp = self.pos()
            if self.accept("int"):
                fields.append((self.ident(), "int"))
                self.expect(";")
                continue
            virtual = inline = extern = False
            while True:
                if self.accept("virtual"):
                    virtual = True
                elif self.accept("inline"):
                    inline = True
                elif self.accept("extern"):
                    extern = True
                else:
                    break
            if self.accept("fn"):
                mname = self.ident()
                params = self.params()
                ret = self.ret_type()
                kind = "method"
            elif self.accept("~"):
                tok = self.peek()
                if self.ident() != name:
                    raise self.error(f"destructor must be named ~{name}", tok)
                mname, params, ret, kind = "~" + name, self.params(), "void", "dtor"
                if params:
                    raise self.error("destructors take no parameters", tok)
            else:
                tok = self.peek()
                if self.ident() != name:
                    raise self.error("expected member declaration", tok)
                mname, params, ret, kind = name, self.params(), "void", "ctor"
                if virtual:
                    raise self.error("constructors cannot be virtual", tok)
            body = None
            if not self.accept(";"):
                body = self.block()
                inline = True
            if body is not None and extern:
                raise SourceError("extern member cannot have a body", mp["line"], mp["col"])
            methods.append(
                A.MethodDecl(name, mname, kind, params, ret, body, virtual, inline, extern, **mp)
            )
        return A.ClassDecl(name, base, fields, methods, **p)

    def params(self) -> list:
        self.expect("(")
        out = []
        if not self.accept(")"):
            while True:
                p = self.pos()
                name = self.ident()
                self.expect(":")
                out.append(A.Param(name, self.type(), **p))
                if self.accept(")"):
                    break
                self.expect(",")
        return out

    def ret_type(self) -> str:
        return self.type() if self.accept(":") else "void"

    def type(self) -> str:
        if self.accept("int"):
            return "int"
        name = self.ident()
        self.expect("*")
        return ptr(name)

    # -- statements
    def block(self) -> list:
        self.expect("{")
        out = []
        while not self.accept("}"):
            if self.peek()[0] == "eof":
                raise self.error("expected '}', found end of input")
            out.append(self.statement())
        return out

    def statement(self):
        p = self.pos()
        if self.accept("var"):
            name = self.ident()
            ty = self.type() if self.accept(":") else None
            self.expect("=")
            init = self.expr()
            self.expect(";")
            return A.VarDecl(name, ty, init, **p)
        if self.accept("if"):
            return self.if_rest(p)
        if self.accept("while"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return A.While(cond, self.block(), **p)
        if self.accept("return"):
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return A.Return(value, **p)
        if self.accept("delete"):
            value = self.expr()
            self.expect(";")
            return A.Delete(value, **p)
        if self.accept("print"):
            self.expect("(")
            value = self.expr()
            self.expect(")")
            self.expect(";")
            return A.Print(value, **p)
        e = self.expr()
        if self.accept("="):
            if not isinstance(e, (A.Name, A.FieldRef)):
                raise SourceError("invalid assignment target", p["line"], p["col"])
            value = self.expr()
            self.expect(";")
            return A.Assign(e, value, **p)
        self.expect(";")
        return A.ExprStmt(e, **p)

    def if_rest(self, p):
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block()
        orelse = []
        if self.accept("else"):
            if self.at("if"):
                q = self.pos()
                self.i += 1
                orelse = [self.if_rest(q)]
            else:
                orelse = self.block()
        return A.If(cond, then, orelse, **p)

    # -- expressions
    def expr(self):
        p = self.pos()
        left = self.additive()
        for op in ("==", "!=", "<"):
            if self.accept(op):
                return A.Binary(op, left, self.additive(), **p)
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at("+") or self.at("-"):
            p = self.pos()
            op = self.peek()[1]
            self.i += 1
            left = A.Binary(op, left, self.multiplicative(), **p)
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at("*"):
            p = self.pos()
            self.i += 1
            left = A.Binary("*", left, self.unary(), **p)
        return left

    def unary(self):
        p = self.pos()
        if self.accept("-"):
            return A.Neg(self.unary(), **p)
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while True:
            p = self.pos()
            if self.accept("->"):
                name = self.ident()
                if self.at("("):
                    e = A.MemberCall(e, name, self.args(), **p)
                else:
                    e = A.FieldRef(e, name, **p)
            elif self.accept("as"):
                e = A.As(e, self.ident(), **p)
            else:
                return e

    def args(self) -> list:
        self.expect("(")
        out = []
        if not self.accept(")"):
            while True:
                out.append(self.expr())
                if self.accept(")"):
                    break
                self.expect(",")
        return out

    def primary(self):
        p = self.pos()
        tok = self.peek()
        if tok[0] == "int":
            self.i += 1
            return A.IntLit(int(tok[1]), **p)
        if self.accept("null"):
            return A.NullLit(**p)
        if self.accept("this"):
            return A.This(**p)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("new"):
            place = None
            if self.accept("("):
                place = self.expr()
                self.expect(")")
            cls = self.ident()
            return A.New(cls, self.args(), place, **p)
        if self.accept("launder"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return A.Launder(e, **p)
        if self.accept("ptr2int"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return A.Ptr2Int(e, **p)
        if self.accept("int2ptr"):
            self.expect("<")
            cls = self.ident()
            self.expect(">")
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return A.Int2Ptr(cls, e, **p)
        if tok[0] == "ident":
            self.i += 1
            if self.at("("):
                return A.Call(tok[1], self.args(), **p)
            return A.Name(tok[1], **p)
        found = "end of input" if tok[0] == "eof" else repr(tok[1])
        raise self.error(f"expected expression, found {found}")


def parse_source(text: str) -> A.SourceProgram:
    """Parse and resolve a MiniOO program; raises SourceError on any problem."""
    parser = _Parser(text)
    prog = parser.program()
    Resolver(prog, parser.outline).run()
    prog.resolved = True
    return prog


# ------------------------------------------------------------ resolution


class ClassTable:
    """Layout and dispatch facts about a resolved program's classes."""

    def __init__(self, prog: A.SourceProgram):
        self.prog = prog
        self.by_name = {c.name: c for c in prog.classes}

    def chain(self, name: str) -> list:
        """The class and its ancestors, most derived first."""
        out = []
        c = self.by_name.get(name)
        while c is not None:
            out.append(c)
            c = self.by_name.get(c.base) if c.base else None
        return out

    def is_subclass(self, sub: str, sup: str) -> bool:
        return any(c.name == sup for c in self.chain(sub))

    def method(self, cls: str, name: str):
        for c in self.chain(cls):
            m = c.own(name)
            if m is not None:
                return m
        return None

    def all_fields(self, cls: str) -> list:
        return [f for c in reversed(self.chain(cls)) for f in c.fields]

    def field_offsets(self, cls: str) -> dict:
        start = 8 if self.by_name[cls].dynamic else 0
        return {name: start + 8 * i for i, (name, _) in enumerate(self.all_fields(cls))}

    def size(self, cls: str) -> int:
        start = 8 if self.by_name[cls].dynamic else 0
        return max(8, start + 8 * len(self.all_fields(cls)))

    def union_size(self, name: str) -> int:
        u = self.prog.union(name)
        return max(self.size(a) for a in u.alternatives)

    def vtable_slots(self, cls: str) -> list:
        """Ordered (slot name, final overrider) pairs."""
        c = self.by_name[cls]
        slots = list(self.vtable_slots(c.base)) if c.base else []
        for m in c.methods:
            if m.kind == "ctor" or not m.is_virtual:
                continue
            for i, (sname, _) in enumerate(slots):
                if sname == m.slot_name:
                    slots[i] = (sname, m)
                    break
            else:
                slots.append((m.slot_name, m))
        return slots

    def slot_index(self, cls: str, slot_name: str) -> int:
        for i, (s, _) in enumerate(self.vtable_slots(cls)):
            if s == slot_name:
                return i
        raise KeyError(slot_name)

    def ctor(self, cls: str):
        return self.by_name[cls].own(cls, "ctor")

    def needs_ctor(self, cls: str) -> bool:
        c = self.by_name[cls]
        return c.dynamic or self.ctor(cls) is not None or (c.base is not None and self.needs_ctor(c.base))

    def dtor(self, cls: str):
        return self.by_name[cls].own("", "dtor")

    def has_dtor(self, cls: str) -> bool:
        return any(c.own("", "dtor") is not None for c in self.chain(cls))

    def dtor_is_virtual(self, cls: str) -> bool:
        return any(c.own("", "dtor") is not None and c.own("", "dtor").is_virtual for c in self.chain(cls))


class Resolver:
    def __init__(self, prog: A.SourceProgram, outline: list):
        self.prog = prog
        self.outline = outline
        self.table = ClassTable(prog)

    def run(self):
        self.check_names()
        for c in self.topo_classes():
            self.resolve_class(c)
        self.attach_outline()
        for c in self.prog.classes:
            self.key_function(c)
        for f in self.prog.functions:
            _BodyChecker(self, f.params, f.ret, None).check(f.body)
        for c in self.prog.classes:
            for m in c.methods:
                if m.body is not None:
                    _BodyChecker(self, m.params, m.ret, c.name).check(m.body)

    def check_names(self):
        seen = {}
        decls = (
            [(c.name, c) for c in self.prog.classes]
            + [(u.name, u) for u in self.prog.unions]
            + [(f.name, f) for f in self.prog.functions]
            + [(e.name, e) for e in self.prog.externals]
        )
        for name, d in decls:
            if name in seen:
                raise SourceError(f"duplicate declaration of {name}", d.line, d.col)
            if name in ("print", "alloc", "free"):
                raise SourceError(f"{name} is reserved", d.line, d.col)
            seen[name] = d
        for u in self.prog.unions:
            if not u.alternatives:
                raise SourceError(f"union {u.name} has no alternatives", u.line, u.col)
            for a in u.alternatives:
                if a not in self.table.by_name:
                    raise SourceError(f"unknown identifier {a}", u.line, u.col)
        for f in self.prog.functions + self.prog.externals:
            for p in f.params:
                self.check_type(p.type, p)
            self.check_type(f.ret, f, allow_void=True)

    def check_type(self, ty: str, node, allow_void=False):
        if ty == "int" or (allow_void and ty == "void"):
            return
        if is_ptr(ty) and (pointee(ty) in self.table.by_name or self.prog.union(pointee(ty))):
            return
        raise SourceError(f"unknown type {ty}", node.line, node.col)

    def topo_classes(self) -> list:
        order, state = [], {}

        def visit(c):
            if state.get(c.name) == "done":
                return
            if state.get(c.name) == "active":
                raise SourceError(f"inheritance cycle through {c.name}", c.line, c.col)
            state[c.name] = "active"
            if c.base:
                base = self.table.by_name.get(c.base)
                if base is None:
                    raise SourceError(f"unknown identifier {c.base}", c.line, c.col)
                visit(base)
            state[c.name] = "done"
            order.append(c)

        for c in self.prog.classes:
            visit(c)
        return order

    def resolve_class(self, c: A.ClassDecl):
        base = self.table.by_name.get(c.base) if c.base else None
        names = set()
        for fname, _ in c.fields:
            if fname in names:
                raise SourceError(f"duplicate field {fname}", c.line, c.col)
            names.add(fname)
        if base is not None:
            inherited = self.table.field_offsets(base.name)
            for fname in names:
                if fname in inherited:
                    raise SourceError(f"field {fname} shadows a base field", c.line, c.col)
        seen = set()
        for m in c.methods:
            key = (m.kind, m.name)
            if key in seen:
                raise SourceError(f"duplicate member {m.name}", m.line, m.col)
            seen.add(key)
            for p in m.params:
                self.check_type(p.type, p)
            self.check_type(m.ret, m, allow_void=True)
            if m.kind == "method" and base is not None:
                inherited = self.table.method(base.name, m.name)
                if inherited is not None:
                    if not inherited.is_virtual:
                        raise SourceError(f"override of non-virtual {inherited.symbol}", m.line, m.col)
                    if len(inherited.params) != len(m.params):
                        raise SourceError(f"override arity mismatch for {m.name}", m.line, m.col)
                    m.is_virtual = True
            if m.kind == "dtor" and base is not None and self.table.dtor_is_virtual(base.name):
                m.is_virtual = True
        own_virtual = any(m.is_virtual for m in c.methods)
        c.dynamic = own_virtual or (base is not None and base.dynamic)
        if c.dynamic and base is not None and not base.dynamic and self.table.all_fields(base.name):
            raise SourceError(f"dynamic class {c.name} over non-dynamic base {base.name} with fields", c.line, c.col)
        # implicit special members, inline with empty bodies
        if c.own(c.name, "ctor") is None and self.table.needs_ctor(c.name):
            c.methods.insert(0, A.MethodDecl(c.name, c.name, "ctor", [], "void", [], False, True, False, line=c.line, col=c.col))
        if c.own("", "dtor") is None and base is not None and self.table.has_dtor(base.name):
            virtual = self.table.dtor_is_virtual(base.name)
            c.methods.insert(1, A.MethodDecl(c.name, "~" + c.name, "dtor", [], "void", [], virtual, True, False, line=c.line, col=c.col))
        if base is not None and self.table.needs_ctor(base.name):
            bctor = self.table.ctor(base.name)
            if bctor is not None and bctor.params:
                raise SourceError(f"base constructor {bctor.symbol} requires arguments", c.line, c.col)

    def attach_outline(self):
        for cname, member, dtor, params, ret, body, p in self.outline:
            c = self.table.by_name.get(cname)
            if c is None:
                raise SourceError(f"unknown identifier {cname}", p["line"], p["col"])
            if dtor:
                m = c.own("", "dtor")
                if member != cname:
                    raise SourceError(f"destructor must be named ~{cname}", p["line"], p["col"])
            elif member == cname:
                m = c.own(cname, "ctor")
            else:
                m = c.own(member)
            if m is None:
                raise SourceError(f"{cname} has no member {member}", p["line"], p["col"])
            if m.body is not None:
                raise SourceError(f"duplicate definition of {m.symbol}", p["line"], p["col"])
            if m.is_extern or m.is_inline:
                raise SourceError(f"{m.symbol} is declared extern or inline", p["line"], p["col"])
            if [q.type for q in params] != [q.type for q in m.params] or ret != m.ret:
                raise SourceError(f"definition of {m.symbol} does not match its declaration", p["line"], p["col"])
            m.params = params
            m.body = body

    def key_function(self, c: A.ClassDecl):
        # First non-inline virtual member declared in the class itself.
        for m in c.methods:
            if m.is_virtual and not m.is_inline and m.kind != "ctor":
                c.key_function = m.symbol
                c.has_key_function = m.body is not None
                return
        c.key_function = None
        c.has_key_function = False


class _BodyChecker:
    def __init__(self, resolver: Resolver, params: list, ret: str, cls):
        self.r = resolver
        self.table = resolver.table
        self.ret = ret
        self.cls = cls
        self.scopes = [{p.name: p.type for p in params}]
        if len({p.name for p in params}) != len(params):
            raise SourceError("duplicate parameter name", params[0].line, params[0].col)

    def lookup(self, name: str):
        for s in reversed(self.scopes):
            if name in s:
                return s[name]
        return None

    def check(self, body: list):
        self.block(body)

    def block(self, stmts: list):
        self.scopes.append({})
        for s in stmts:
            self.stmt(s)
        self.scopes.pop()

    def assignable(self, src: str, dst: str, node):
        if src == dst:
            return
        if src == "null" and is_ptr(dst):
            return
        if (
            is_ptr(src) and is_ptr(dst)
            and pointee(src) in self.table.by_name and pointee(dst) in self.table.by_name
            and self.table.is_subclass(pointee(src), pointee(dst))
        ):
            return
        raise SourceError(f"type mismatch: {src} is not assignable to {dst}", node.line, node.col)

    def stmt(self, s):
        if isinstance(s, A.VarDecl):
            t = self.expr(s.init)
            if s.type is not None:
                self.r.check_type(s.type, s)
                self.assignable(t, s.type, s)
            else:
                if t in ("null", "bool", "void"):
                    raise SourceError(f"cannot infer a variable type from {t}", s.line, s.col)
                s.type = t
            if s.name in self.scopes[-1]:
                raise SourceError(f"duplicate variable {s.name}", s.line, s.col)
            self.scopes[-1][s.name] = s.type
        elif isinstance(s, A.Assign):
            if isinstance(s.target, A.Name):
                dst = self.lookup(s.target.id)
                if dst is None:
                    raise SourceError(f"unknown identifier {s.target.id}", s.target.line, s.target.col)
                s.target.ty = dst
            else:
                dst = self.expr(s.target)
            self.assignable(self.expr(s.value), dst, s)
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr)
        elif isinstance(s, A.If):
            self.cond(s.cond)
            self.block(s.then)
            self.block(s.orelse)
        elif isinstance(s, A.While):
            self.cond(s.cond)
            self.block(s.body)
        elif isinstance(s, A.Return):
            if s.value is None:
                if self.ret != "void":
                    raise SourceError("missing return value", s.line, s.col)
            else:
                if self.ret == "void":
                    raise SourceError("void function returns a value", s.line, s.col)
                self.assignable(self.expr(s.value), self.ret, s)
        elif isinstance(s, A.Delete):
            t = self.expr(s.value)
            if not is_ptr(t) or t == "null":
                raise SourceError("delete needs a pointer", s.line, s.col)
        elif isinstance(s, A.Print):
            if self.expr(s.value) != "int":
                raise SourceError("print takes an int", s.line, s.col)
        else:  # pragma: no cover
            raise TypeError(s)

    def cond(self, e):
        t = self.expr(e)
        if t not in ("bool", "int"):
            raise SourceError("condition must be a comparison or an int", e.line, e.col)

    def class_of(self, e, t: str) -> str:
        if not is_ptr(t) or t == "null" or pointee(t) not in self.table.by_name:
            raise SourceError(f"expected a class pointer, found {t}", e.line, e.col)
        return pointee(t)

    def call_args(self, params: list, args: list, node):
        if len(params) != len(args):
            raise SourceError(f"expected {len(params)} argument(s), got {len(args)}", node.line, node.col)
        for p, a in zip(params, args):
            self.assignable(self.expr(a), p.type, a)

    def expr(self, e) -> str:
        e.ty = self._expr(e)
        return e.ty

    def _expr(self, e) -> str:
        if isinstance(e, A.IntLit):
            return "int"
        if isinstance(e, A.NullLit):
            return "null"
        if isinstance(e, A.This):
            if self.cls is None:
                raise SourceError("this outside of a member function", e.line, e.col)
            return ptr(self.cls)
        if isinstance(e, A.Name):
            t = self.lookup(e.id)
            if t is None:
                raise SourceError(f"unknown identifier {e.id}", e.line, e.col)
            return t
        if isinstance(e, A.Call):
            if self.cls is not None and self.table.method(self.cls, e.name) is not None:
                m = self.table.method(self.cls, e.name)
                e.target = m
                self.call_args(m.params, e.args, e)
                return m.ret
            for f in self.r.prog.functions + self.r.prog.externals:
                if f.name == e.name:
                    e.target = f
                    self.call_args(f.params, e.args, e)
                    return f.ret
            raise SourceError(f"unknown identifier {e.name}", e.line, e.col)
        if isinstance(e, A.MemberCall):
            cls = self.class_of(e.obj, self.expr(e.obj))
            m = self.table.method(cls, e.name)
            if m is None:
                raise SourceError(f"unknown identifier {cls}::{e.name}", e.line, e.col)
            e.method = m
            self.call_args(m.params, e.args, e)
            return m.ret
        if isinstance(e, A.FieldRef):
            cls = self.class_of(e.obj, self.expr(e.obj))
            offs = self.table.field_offsets(cls)
            if e.name not in offs:
                raise SourceError(f"unknown identifier {cls}::{e.name}", e.line, e.col)
            e.offset = offs[e.name]
            return "int"
        if isinstance(e, A.New):
            if e.place is not None and not is_ptr(self.expr(e.place)):
                raise SourceError("placement address must be a pointer", e.line, e.col)
            if self.r.prog.union(e.cls) is not None:
                if e.args or e.place is not None:
                    raise SourceError("unions are allocated with plain new U()", e.line, e.col)
                return ptr(e.cls)
            if e.cls not in self.table.by_name:
                raise SourceError(f"unknown identifier {e.cls}", e.line, e.col)
            ctor = self.table.ctor(e.cls)
            self.call_args(ctor.params if ctor else [], e.args, e)
            return ptr(e.cls)
        if isinstance(e, A.Launder):
            t = self.expr(e.value)
            if not is_ptr(t) or t == "null":
                raise SourceError("launder needs a pointer", e.line, e.col)
            return t
        if isinstance(e, A.Ptr2Int):
            t = self.expr(e.value)
            if not is_ptr(t) or t == "null":
                raise SourceError("ptr2int needs a pointer", e.line, e.col)
            return "int"
        if isinstance(e, A.Int2Ptr):
            if self.expr(e.value) != "int":
                raise SourceError("int2ptr needs an int", e.line, e.col)
            self.r.check_type(ptr(e.cls), e)
            return ptr(e.cls)
        if isinstance(e, A.As):
            t = self.expr(e.value)
            u = self.r.prog.union(pointee(t)) if is_ptr(t) and t != "null" else None
            if u is None:
                raise SourceError("'as' needs a union pointer", e.line, e.col)
            if e.alt not in u.alternatives:
                raise SourceError(f"{e.alt} is not an alternative of {u.name}", e.line, e.col)
            return ptr(e.alt)
        if isinstance(e, A.Binary):
            lt, rt = self.expr(e.left), self.expr(e.right)
            if e.op in ("+", "-", "*", "<"):
                if lt != "int" or rt != "int":
                    raise SourceError(f"operator {e.op} needs ints", e.line, e.col)
                return "bool" if e.op == "<" else "int"
            if lt == "int" and rt == "int":
                return "bool"
            if is_ptr(lt) and is_ptr(rt):
                return "bool"
            raise SourceError(f"cannot compare {lt} with {rt}", e.line, e.col)
        if isinstance(e, A.Neg):
            if self.expr(e.value) != "int":
                raise SourceError("negation needs an int", e.line, e.col)
            return "int"
        raise TypeError(e)  # pragma: no cover
