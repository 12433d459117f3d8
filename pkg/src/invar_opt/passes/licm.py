"""Loop-invariant hoisting of vptr and vtable slot loads."""

from __future__ import annotations

from ..analysis import invariant_group_key
from ..ir import INVARIANT_GROUP, INVARIANT_LOAD, BasicBlock, Instruction, IRFunction, NameGen, Opcode
from ..ir.cfg import DominatorTree, natural_loops, predecessors
from .memory import MEMORY_NEUTRAL_CALLS
from .report import PassReport

_PURE = frozenset(
    {
        Opcode.FieldAddr,
        Opcode.IntrinsicStrip,
        Opcode.ConstInt,
        Opcode.ConstNull,
        Opcode.ConstUndef,
        Opcode.GlobalRef,
        Opcode.Add,
        Opcode.Sub,
        Opcode.Mul,
        Opcode.ICmpEq,
        Opcode.ICmpNe,
        Opcode.ICmpSlt,
        Opcode.PtrToInt,
    }
)


def _writes_memory(inst: Instruction) -> bool:
    if inst.opcode is Opcode.Store:
        return True
    if inst.opcode is Opcode.CallDirect:
        return inst.symbol not in MEMORY_NEUTRAL_CALLS
    # launder is modeled as touching inaccessible memory only
    return inst.opcode is Opcode.CallIndirect


def hoist_invariant_loads(f: IRFunction) -> tuple:
    """Move loop-invariant computations, invariant-group vptr loads and the
    slot loads that depend on them into loop preheaders. Never hoists launder."""
    hoisted = 0
    done = set()
    while True:
        dt = DominatorTree(f)
        loops = natural_loops(f, dt)
        pending = [h for h in loops if h not in done]
        if not pending:
            break
        header = min(pending, key=lambda h: (len(loops[h]), dt.index[h]))
        done.add(header)
        hoisted += _hoist_loop(f, dt, header, loops[header])
    return f, PassReport(hoisted_loads=hoisted)


def _hoist_loop(f: IRFunction, dt: DominatorTree, header: str, body: set) -> int:
    blocks = f.block_map()
    if all(p in body for p in predecessors(f)[header]):
        return 0  # no entry edge to place a preheader on
    defined_in_loop = {}
    for label in body:
        for inst in blocks[label].instructions:
            if inst.result is not None:
                defined_in_loop[inst.result] = label
    exiting = [l for l in body if any(s not in body for s in blocks[l].successors())]
    defs = f.definitions()

    def always_runs(label: str) -> bool:
        return all(dt.dominates(label, e) for e in exiting)

    on_path = _first_iteration_path(blocks, header, body)
    moved_ids = set()
    order = []
    changed = True
    while changed:
        changed = False
        for label in dt.rpo:
            if label not in body:
                continue
            for idx, inst in enumerate(blocks[label].instructions):
                if id(inst) in moved_ids or inst.result is None:
                    continue
                if any(a in defined_in_loop for a in inst.args):
                    continue
                ok = False
                counted = False
                if inst.opcode in _PURE:
                    ok = True
                elif inst.opcode is Opcode.Load and inst.has_md(INVARIANT_LOAD) and always_runs(label):
                    ok = counted = True
                elif inst.opcode is Opcode.Load and inst.has_md(INVARIANT_GROUP) and always_runs(label):
                    key = invariant_group_key(inst.args[0], f, defs)
                    ok = counted = key.valid and not _write_before(blocks, on_path, header, label, idx)
                if ok:
                    moved_ids.add(id(inst))
                    order.append((inst, counted))
                    del defined_in_loop[inst.result]
                    changed = True
    if not order:
        return 0
    pre = _preheader(f, header, body)
    for b in f.blocks:
        if b.label in body:
            b.instructions = [i for i in b.instructions if id(i) not in moved_ids]
    term = pre.instructions.pop()
    pre.instructions.extend(inst for inst, _ in order)
    pre.instructions.append(term)
    return sum(1 for _, counted in order if counted)


def _first_iteration_path(blocks: dict, header: str, body: set) -> set:
    """Loop blocks reachable from the header without re-entering it."""
    seen = {header}
    work = [header]
    while work:
        label = work.pop()
        for s in blocks[label].successors():
            if s in body and s not in seen and s != header:
                seen.add(s)
                work.append(s)
    return seen


def _write_before(blocks: dict, on_path: set, header: str, label: str, idx: int) -> bool:
    """Whether a memory write may run between loop entry and position idx of
    label on the first iteration."""
    if any(_writes_memory(i) for i in blocks[label].instructions[:idx]):
        return True
    if label == header:
        return False
    # blocks from which label is reachable, restricted to the first-iteration region
    back = {label}
    work = [label]
    preds = {}
    for l in on_path:
        for s in blocks[l].successors():
            preds.setdefault(s, []).append(l)
    while work:
        cur = work.pop()
        for p in preds.get(cur, []):
            if p in on_path and p not in back:
                back.add(p)
                if p != header:
                    work.append(p)
    back.discard(label)
    return any(_writes_memory(i) for l in back for i in blocks[l].instructions)


def _preheader(f: IRFunction, header: str, body: set) -> BasicBlock:
    preds = predecessors(f)
    outside = [p for p in preds[header] if p not in body]
    blocks = f.block_map()
    if len(outside) == 1 and blocks[outside[0]].successors() == [header]:
        return blocks[outside[0]]
    names = NameGen(f)
    pre = BasicBlock(names.label(f"{header}.preheader"))
    hdr = blocks[header]
    for phi in hdr.phis():
        incoming = [(a, l) for a, l in zip(phi.args, phi.labels) if l in outside]
        inside = [(a, l) for a, l in zip(phi.args, phi.labels) if l not in outside]
        if len(incoming) == 1:
            value = incoming[0][0]
        else:
            value = names.value(phi.result)
            pre.instructions.append(
                Instruction(Opcode.Phi, value, phi.type, [a for a, _ in incoming], labels=[l for _, l in incoming])
            )
        phi.args = [a for a, _ in inside] + [value]
        phi.labels = [l for _, l in inside] + [pre.label]
    pre.instructions.append(Instruction(Opcode.Br, labels=[header]))
    for p in outside:
        term = blocks[p].terminator
        term.labels = [pre.label if l == header else l for l in term.labels]
    f.blocks.insert(f.blocks.index(hdr), pre)
    return pre
