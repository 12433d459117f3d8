"""Invariant-group load forwarding, assume folding, devirtualization and
dead store elimination."""

from __future__ import annotations

from ..analysis import AliasResult, address_expr, alias_query, invariant_group_key, resolve_vtable_slot
from ..ir import INVARIANT_GROUP, INVARIANT_LOAD, IRFunction, IRModule, Opcode
from ..ir.cfg import DominatorTree, constant_value, dead_code_elimination, positions, replace_all_uses
from .report import PassReport

# calls that neither read nor write program memory
MEMORY_NEUTRAL_CALLS = frozenset({"print"})


def _resolve(subst: dict, v: str) -> str:
    while v in subst:
        v = subst[v]
    return v


def forward_invariant_loads(f: IRFunction, m: IRModule) -> tuple:
    """Replace invariant-group loads by a dominating access through the same
    SSA pointer, and invariant loads by a dominating load of the same address
    or by the vtable slot they read.

    Calls do not kill invariant-group facts.
    """
    dt = DominatorTree(f)
    blocks = f.block_map()
    subst = {}
    dead = set()
    forwarded = 0
    ig_scopes = [{}]
    il_scopes = [{}]

    def lookup(scopes, key):
        for s in reversed(scopes):
            if key in s:
                return s[key]
        return None

    defs = f.definitions()
    # explicit stack so deep dominator trees stay off the Python stack
    stack = [(dt.rpo[0], False)]
    while stack:
        label, leaving = stack.pop()
        if leaving:
            ig_scopes.pop()
            il_scopes.pop()
            continue
        ig_scopes.append({})
        il_scopes.append({})
        stack.append((label, True))
        for inst in blocks[label].instructions:
            if inst.opcode is not Opcode.Phi:
                inst.args = [_resolve(subst, a) for a in inst.args]
            if inst.opcode is Opcode.Store and inst.has_md(INVARIANT_GROUP):
                key = invariant_group_key(inst.args[1], f, defs)
                if key.valid:
                    ig_scopes[-1][key.root] = inst.args[0]
            elif inst.opcode is Opcode.Load and inst.has_md(INVARIANT_GROUP):
                key = invariant_group_key(inst.args[0], f, defs)
                if not key.valid:
                    continue
                known = lookup(ig_scopes, key.root)
                if known is not None:
                    subst[inst.result] = known
                    dead.add(id(inst))
                    forwarded += 1
                else:
                    ig_scopes[-1][key.root] = inst.result
            elif inst.opcode is Opcode.Load and inst.has_md(INVARIANT_LOAD):
                symbol = resolve_vtable_slot(inst, m, f, defs)
                if symbol is not None:
                    inst.opcode = Opcode.GlobalRef
                    inst.symbol = symbol
                    inst.args = []
                    inst.metadata = frozenset()
                    forwarded += 1
                    continue
                addr = address_expr(inst.args[0], f, defs)
                known = lookup(il_scopes, addr)
                if known is not None:
                    subst[inst.result] = known
                    dead.add(id(inst))
                    forwarded += 1
                else:
                    il_scopes[-1][addr] = inst.result
        for child in reversed(dt.children[label]):
            stack.append((child, False))
    if subst:
        for inst in f.instructions():
            inst.args = [_resolve(subst, a) for a in inst.args]
        for b in f.blocks:
            b.instructions = [i for i in b.instructions if id(i) not in dead]
    return f, PassReport(forwarded_invariant_loads=forwarded)


def fold_assumes(f: IRFunction) -> tuple:
    """Use assume(a == constant) to rewrite dominated uses of a, and delete
    assume(true)."""
    defs = f.definitions()
    dt = DominatorTree(f)
    folded = 0
    for b in f.blocks:
        for i, inst in enumerate(list(b.instructions)):
            if inst.opcode is not Opcode.IntrinsicAssume:
                continue
            cond = defs.get(inst.args[0])
            if cond is None:
                continue
            if cond.opcode is Opcode.ConstInt and cond.imm == 1:
                b.instructions.remove(inst)
                folded += 1
                continue
            if cond.opcode is not Opcode.ICmpEq:
                continue
            x, y = cond.args
            if constant_value(defs.get(x)) is not None and constant_value(defs.get(y)) is None:
                x, y = y, x
            if constant_value(defs.get(y)) is None or constant_value(defs.get(x)) is not None:
                continue
            if _rewrite_dominated_uses(f, dt, b.label, inst, x, y):
                folded += 1
    dead_code_elimination(f)
    return f, PassReport(folded_assumes=folded)


def _rewrite_dominated_uses(f: IRFunction, dt: DominatorTree, label: str, anchor, old: str, new: str) -> int:
    n = 0
    block = f.block(label)
    idx = block.instructions.index(anchor)
    pos = positions(f)
    if new in pos:
        nb, ni = pos[new]
        # the constant itself must be available at every rewritten use
        if not (dt.dominates(nb, label) and (nb != label or ni < idx)):
            return 0
    for b in f.blocks:
        for j, inst in enumerate(b.instructions):
            if old not in inst.args:
                continue
            if inst.opcode is Opcode.Phi:
                for k, (a, l) in enumerate(zip(inst.args, inst.labels)):
                    if a == old and dt.reachable(l) and dt.dominates(label, l):
                        inst.args[k] = new
                        n += 1
            elif b.label == label:
                if j > idx:
                    n += inst.replace_arg(old, new)
            elif dt.reachable(b.label) and dt.dominates(label, b.label):
                n += inst.replace_arg(old, new)
    return n


def devirtualize_calls(f: IRFunction, m: IRModule) -> tuple:
    """Turn indirect calls through a known function symbol into direct calls."""
    defs = f.definitions()
    count = 0
    for inst in f.instructions():
        if inst.opcode is not Opcode.CallIndirect:
            continue
        callee = defs.get(inst.args[0])
        symbol = None
        if callee is not None and callee.opcode is Opcode.GlobalRef:
            symbol = callee.symbol
        elif callee is not None:
            symbol = resolve_vtable_slot(callee, m, f, defs)
        target = m.callable(symbol) if symbol else None
        if target is None or len(target.params) != len(inst.args) - 1:
            continue
        if (target.ret_type == "void") != (inst.type is None):
            continue
        inst.opcode = Opcode.CallDirect
        inst.symbol = symbol
        inst.args = inst.args[1:]
        inst.arg_attrs = inst.arg_attrs[1:]
        count += 1
    if count:
        dead_code_elimination(f)
    return f, PassReport(devirtualized_calls=count)


# ------------------------------------------------------------ dead stores


def _reads_memory(inst) -> bool:
    if inst.opcode is Opcode.CallDirect:
        return inst.symbol not in MEMORY_NEUTRAL_CALLS
    return inst.opcode is Opcode.CallIndirect


def eliminate_dead_stores(f: IRFunction) -> tuple:
    """Remove stores overwritten before any possible read, and stores into
    allocations that are never read."""
    defs = f.definitions()
    dead = set()
    for b in f.blocks:
        insts = b.instructions
        for i, s in enumerate(insts):
            if s.opcode is not Opcode.Store:
                continue
            for later in insts[i + 1:]:
                if later.opcode is Opcode.Store:
                    r = alias_query(s.args[1], later.args[1], f, defs)
                    if r is AliasResult.MustAlias:
                        dead.add(id(s))
                        break
                    continue
                if later.opcode is Opcode.Load and alias_query(s.args[1], later.args[0], f, defs) is not AliasResult.NoAlias:
                    break
                if _reads_memory(later) or later.is_terminator:
                    break
    for store in _stores_into_unread_allocs(f, defs):
        dead.add(id(store))
    n = 0
    for b in f.blocks:
        keep = [i for i in b.instructions if id(i) not in dead]
        n += len(b.instructions) - len(keep)
        b.instructions = keep
    if n:
        dead_code_elimination(f)
    return f, PassReport(eliminated_stores=n)


def _stores_into_unread_allocs(f: IRFunction, defs: dict) -> list:
    users = {}
    for inst in f.instructions():
        for a in inst.args:
            users.setdefault(a, []).append(inst)
    out = []
    for inst in f.instructions():
        if inst.opcode is not Opcode.Alloc:
            continue
        stores = []
        work, seen, ok = [inst.result], set(), True
        while work and ok:
            v = work.pop()
            if v in seen:
                continue
            seen.add(v)
            for u in users.get(v, []):
                if u.opcode in (Opcode.FieldAddr, Opcode.IntrinsicLaunder, Opcode.IntrinsicStrip):
                    work.append(u.result)
                elif u.opcode is Opcode.Store and u.args[1] == v and u.args[0] != v:
                    stores.append(u)
                else:
                    ok = False
                    break
        if ok:
            out.extend(stores)
    return out
