"""Syntax tree for MiniOO, the small object-oriented source language."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


class SourceError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


def ptr(name: str) -> str:
    return name + "*"


def is_ptr(ty: Optional[str]) -> bool:
    return ty is not None and (ty.endswith("*") or ty == "null")


def pointee(ty: str) -> str:
    return ty[:-1]


@dataclass
class Node:
    line: int = field(default=0, kw_only=True, compare=False)
    col: int = field(default=0, kw_only=True, compare=False)


# ------------------------------------------------------------ expressions


@dataclass
class Expr(Node):
    ty: Optional[str] = field(default=None, kw_only=True, compare=False)


@dataclass
class IntLit(Expr):
    value: int


@dataclass
class NullLit(Expr):
    pass


@dataclass
class This(Expr):
    pass


@dataclass
class Name(Expr):
    id: str


@dataclass
class Call(Expr):
    """``f(args)``: a free function, external, or a method of ``this``."""

    name: str
    args: list
    target: object = field(default=None, compare=False)


@dataclass
class MemberCall(Expr):
    obj: Expr
    name: str
    args: list
    method: object = field(default=None, compare=False)


@dataclass
class FieldRef(Expr):
    obj: Expr
    name: str
    offset: int = field(default=0, compare=False)


@dataclass
class New(Expr):
    cls: str
    args: list
    place: Optional[Expr] = None


@dataclass
class Launder(Expr):
    value: Expr


@dataclass
class Ptr2Int(Expr):
    value: Expr


@dataclass
class Int2Ptr(Expr):
    cls: str
    value: Expr


@dataclass
class As(Expr):
    value: Expr
    alt: str


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass
class Neg(Expr):
    value: Expr


# ------------------------------------------------------------ statements


@dataclass
class VarDecl(Node):
    name: str
    type: Optional[str]
    init: Expr


@dataclass
class Assign(Node):
    target: Expr
    value: Expr


@dataclass
class ExprStmt(Node):
    expr: Expr


@dataclass
class If(Node):
    cond: Expr
    then: list
    orelse: list


@dataclass
class While(Node):
    cond: Expr
    body: list


@dataclass
class Return(Node):
    value: Optional[Expr]


@dataclass
class Delete(Node):
    value: Expr


@dataclass
class Print(Node):
    value: Expr


# ------------------------------------------------------------ declarations


@dataclass
class Param(Node):
    name: str
    type: str


@dataclass
class MethodDecl(Node):
    owner: str
    name: str
    kind: str  # "method", "ctor" or "dtor"
    params: list
    ret: str = "void"
    body: Optional[list] = None
    is_virtual: bool = False
    is_inline: bool = False
    is_extern: bool = False

    @property
    def symbol(self) -> str:
        if self.kind == "ctor":
            return f"{self.owner}::{self.owner}"
        if self.kind == "dtor":
            return f"{self.owner}::~{self.owner}"
        return f"{self.owner}::{self.name}"

    @property
    def slot_name(self) -> str:
        return "~" if self.kind == "dtor" else self.name

    @property
    def defined(self) -> bool:
        return self.body is not None


@dataclass
class ClassDecl(Node):
    name: str
    base: Optional[str]
    fields: list  # of (name, type)
    methods: list
    # filled in by resolution
    dynamic: bool = field(default=False, compare=False)
    key_function: Optional[str] = field(default=None, compare=False)
    has_key_function: bool = field(default=False, compare=False)

    def own(self, name: str, kind: str = "method") -> Optional[MethodDecl]:
        for m in self.methods:
            if m.kind == kind and (kind != "method" or m.name == name):
                return m
        return None


@dataclass
class UnionDecl(Node):
    name: str
    alternatives: list


@dataclass
class FunctionDecl(Node):
    name: str
    params: list
    ret: str
    body: list


@dataclass
class ExternDecl(Node):
    name: str
    params: list
    ret: str


@dataclass
class SourceProgram:
    classes: list = field(default_factory=list)
    unions: list = field(default_factory=list)
    functions: list = field(default_factory=list)
    externals: list = field(default_factory=list)
    resolved: bool = field(default=False, compare=False)

    def cls(self, name: str) -> Optional[ClassDecl]:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def union(self, name: str) -> Optional[UnionDecl]:
        for u in self.unions:
            if u.name == name:
                return u
        return None

    @property
    def dynamic_classes(self) -> list:
        return [c for c in self.classes if c.dynamic]
