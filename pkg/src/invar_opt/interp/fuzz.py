"""Random MiniOO programs for differential testing.

The generator tracks object lifetimes syntactically: every variable records
the object it points to and the object's epoch when the variable was made.
Placement new bumps the epoch, so older variables become stale and are only
dereferenced when the generator deliberately plants undefined behavior.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

STALE_USE_RATE = 0.1


@dataclass
class _Obj:
    cls: str
    epoch: int = 0
    live: bool = True
    in_union: str = ""


@dataclass
class _Var:
    name: str
    obj: int
    epoch: int


@dataclass
class _State:
    rng: random.Random
    classes: list
    has_union: bool
    objs: list = field(default_factory=list)
    vars: list = field(default_factory=list)
    unions: list = field(default_factory=list)
    counter: int = 0
    lines: list = field(default_factory=list)
    planted_ub: bool = False

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def valid(self) -> list:
        return [v for v in self.vars if self.objs[v.obj].live and self.objs[v.obj].epoch == v.epoch]

    def stale(self) -> list:
        return [v for v in self.vars if self.objs[v.obj].live and self.objs[v.obj].epoch != v.epoch]

    def emit(self, line: str, depth: int = 1):
        self.lines.append("  " * depth + line)


def _class_block(rng: random.Random, n_classes: int, with_dtor: bool) -> tuple:
    names = ["A", "B", "C"][:n_classes]
    bases = {"A": None, "B": "A", "C": rng.choice(["A", "B"]) if n_classes == 3 else None}
    out = []
    for i, name in enumerate(names):
        base = bases[name]
        head = f"class {name} : {base} {{" if base else f"class {name} {{"
        out.append(head)
        if base is None:
            out.append("  int v;")
        out.append(f"  virtual fn f() {{ print({10 * (i + 1)}); }}")
        k = rng.randint(1, 9)
        out.append(f"  virtual fn g(x: int): int {{ return x * {k} + this->v; }}")
        if base is None:
            out.append("  fn morph() { new(this) B(); }")
            if with_dtor:
                out.append(f"  virtual ~{name}() {{ print(99); }}")
        out.append("}")
    return names, out


def _pick_class(s: _State) -> str:
    return s.rng.choice(s.classes)


def _new_object(s: _State):
    cls = _pick_class(s)
    name = s.fresh("p")
    s.objs.append(_Obj(cls))
    s.vars.append(_Var(name, len(s.objs) - 1, 0))
    s.emit(f"var {name}: A* = new {cls}();")


def _deref_target(s: _State):
    """A variable to dereference, occasionally a stale one."""
    valid = s.valid()
    stale = s.stale()
    if stale and s.rng.random() < STALE_USE_RATE:
        s.planted_ub = True
        return s.rng.choice(stale)
    return s.rng.choice(valid) if valid else None


def _safe_stmt(s: _State, depth: int):
    """Statements that change no lifetime facts, usable inside branches and loops."""
    v = s.rng.choice(s.valid()) if s.valid() else None
    if v is None:
        s.emit(f"print({s.rng.randint(0, 9)});", depth)
        return
    r = s.rng.random()
    if r < 0.35:
        s.emit(f"{v.name}->f();", depth)
    elif r < 0.6:
        s.emit(f"print({v.name}->g({s.rng.randint(-5, 5)}));", depth)
    elif r < 0.75:
        s.emit(f"{v.name}->v = {v.name}->v + {s.rng.randint(1, 4)};", depth)
    elif r < 0.85:
        s.emit(f"print({v.name}->v);", depth)
    else:
        s.emit(f"print(helper({v.name}, {s.rng.randint(0, 4)}));", depth)


def _stmt(s: _State):
    rng = s.rng
    r = rng.random()
    valid = s.valid()
    if not valid or r < 0.12:
        _new_object(s)
        return
    if r < 0.30:
        target = _deref_target(s)
        if target is None:
            return
        call = rng.choice(["f()", "g(3)"])
        if call == "f()":
            s.emit(f"{target.name}->f();")
        else:
            s.emit(f"print({target.name}->g(3));")
        return
    if r < 0.42:
        # placement new ends the old object's lifetime
        v = rng.choice(valid)
        obj = s.objs[v.obj]
        if obj.in_union:
            return
        cls = _pick_class(s)
        obj.cls = cls
        obj.epoch += 1
        name = s.fresh("q")
        s.vars.append(_Var(name, v.obj, obj.epoch))
        s.emit(f"var {name}: A* = new({v.name}) {cls}();")
        if rng.random() < 0.5:
            s.emit(f"if ({v.name} == {name}) {{")
            _safe_stmt(s, 2)
            s.emit("}")
        return
    if r < 0.50:
        stale = s.stale()
        if stale:
            v = rng.choice(stale)
            v.epoch = s.objs[v.obj].epoch
            s.emit(f"{v.name} = launder({v.name});")
        return
    if r < 0.56:
        v = rng.choice(valid)
        obj = s.objs[v.obj]
        if obj.in_union:
            return
        obj.cls = "B"
        obj.epoch += 1
        s.emit(f"{v.name}->morph();")
        return
    if r < 0.64:
        a, b = rng.choice(s.vars), rng.choice(s.vars)
        lhs = a.name if rng.random() < 0.7 else f"launder({a.name})"
        s.emit(f"if ({lhs} == {b.name}) {{")
        _safe_stmt(s, 2)
        s.emit("} else {")
        s.emit(f"print({rng.randint(0, 9)});", 2)
        s.emit("}")
        return
    if r < 0.70:
        v = rng.choice(s.vars)
        name = s.fresh("r")
        obj = s.objs[v.obj]
        s.vars.append(_Var(name, v.obj, obj.epoch))
        s.emit(f"var {name} = int2ptr<A>(ptr2int({v.name}));")
        if rng.random() < 0.5:
            s.emit(f"print(ptr2int({name}) - ptr2int({v.name}));")
        return
    if r < 0.76 and s.has_union:
        if not s.unions or rng.random() < 0.4:
            u = s.fresh("u")
            s.unions.append(u)
            s.emit(f"var {u} = new U();")
        u = rng.choice(s.unions)
        cls = rng.choice(["A", "B"])
        name = s.fresh("m")
        s.objs.append(_Obj(cls, in_union=u))
        s.vars.append(_Var(name, len(s.objs) - 1, 0))
        s.emit(f"var {name}: A* = new({u} as {cls}) {cls}();")
        s.emit(f"({u} as {cls})->f();")
        # a later placement into the same union ends earlier members
        for o in s.objs[:-1]:
            if o.in_union == u:
                o.live = False
        return
    if r < 0.84:
        n = rng.randint(1, 4)
        i = s.fresh("i")
        s.emit(f"var {i} = 0;")
        s.emit(f"while ({i} < {n}) {{")
        for _ in range(rng.randint(1, 2)):
            _safe_stmt(s, 2)
        s.emit(f"{i} = {i} + 1;", 2)
        s.emit("}")
        return
    if r < 0.90:
        v = rng.choice(valid)
        s.emit(f"ext({v.name});")
        return
    if r < 0.94:
        v = rng.choice(valid)
        obj = s.objs[v.obj]
        if obj.in_union:
            return
        obj.live = False
        s.emit(f"delete {v.name};")
        return
    _safe_stmt(s, 1)


def generate_program(rng: random.Random) -> str:
    n_classes = rng.choice([2, 3])
    classes, decls = _class_block(rng, n_classes, rng.random() < 0.3)
    s = _State(rng, classes, has_union=rng.random() < 0.5)
    head = list(decls)
    if s.has_union:
        head.append("union U { A; B; }")
    head.append("extern fn ext(p: A*);")
    head.append("fn helper(p: A*, n: int): int {")
    head.append("  var s = 0;")
    head.append("  var i = 0;")
    head.append("  while (i < n) { s = s + p->g(i); i = i + 1; }")
    head.append("  return s;")
    head.append("}")
    for _ in range(rng.randint(4, 14)):
        _stmt(s)
    return "\n".join(head + ["fn main() {"] + s.lines + ["}"]) + "\n"


def enumerate_fuzz_programs(seed: int, count: int) -> list:
    """count MiniOO programs, a pure function of (seed, count)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = random.Random(seed)
    return [generate_program(random.Random(rng.getrandbits(64))) for _ in range(count)]
