"""Control-flow graph helpers: predecessors, dominators, loops, def-use."""

from __future__ import annotations

from collections import defaultdict

from .nodes import REMOVABLE, IRFunction, Instruction, Opcode


def predecessors(f: IRFunction) -> dict:
    preds = {b.label: [] for b in f.blocks}
    for b in f.blocks:
        for s in b.successors():
            if s in preds and b.label not in preds[s]:
                preds[s].append(b.label)
    return preds


def reverse_postorder(f: IRFunction) -> list:
    blocks = f.block_map()
    seen = set()
    order = []
    # iterative DFS keeps deep CFGs off the Python stack
    stack = [(f.entry.label, iter(f.entry.successors()))]
    seen.add(f.entry.label)
    while stack:
        label, it = stack[-1]
        for s in it:
            if s in blocks and s not in seen:
                seen.add(s)
                stack.append((s, iter(blocks[s].successors())))
                break
        else:
            stack.pop()
            order.append(label)
    order.reverse()
    return order


class DominatorTree:
    """Immediate dominators via the Cooper/Harvey/Kennedy iteration."""

    def __init__(self, f: IRFunction):
        self.rpo = reverse_postorder(f)
        self.index = {label: i for i, label in enumerate(self.rpo)}
        preds = predecessors(f)
        entry = self.rpo[0]
        idom = {entry: entry}
        changed = True
        while changed:
            changed = False
            for label in self.rpo[1:]:
                new = None
                for p in preds[label]:
                    if p not in idom:
                        continue
                    new = p if new is None else self._intersect(idom, p, new)
                if new is not None and idom.get(label) != new:
                    idom[label] = new
                    changed = True
        self.idom = idom
        self.children = defaultdict(list)
        for label in self.rpo[1:]:
            self.children[idom[label]].append(label)

    def _intersect(self, idom, a, b):
        while a != b:
            while self.index[a] > self.index[b]:
                a = idom[a]
            while self.index[b] > self.index[a]:
                b = idom[b]
        return a

    def reachable(self, label: str) -> bool:
        return label in self.idom

    def dominates(self, a: str, b: str) -> bool:
        """Block ``a`` dominates block ``b`` (reflexive)."""
        if b not in self.idom or a not in self.idom:
            return False
        entry = self.rpo[0]
        while True:
            if a == b:
                return True
            if b == entry:
                return False
            b = self.idom[b]

    def preorder(self) -> list:
        out = []
        stack = [self.rpo[0]]
        while stack:
            label = stack.pop()
            out.append(label)
            stack.extend(reversed(self.children[label]))
        return out


def positions(f: IRFunction) -> dict:
    """Map each SSA result to (block label, index)."""
    pos = {}
    for b in f.blocks:
        for i, inst in enumerate(b.instructions):
            if inst.result is not None:
                pos[inst.result] = (b.label, i)
    return pos


def value_dominates_use(dt: DominatorTree, pos: dict, value: str, use_block: str, use_index: int) -> bool:
    """True when the definition of ``value`` dominates the given use point.

    Parameters (absent from ``pos``) dominate everything.
    """
    if value not in pos:
        return True
    db, di = pos[value]
    if db == use_block:
        return di < use_index
    return dt.dominates(db, use_block)


def uses(f: IRFunction) -> dict:
    """Map each SSA name to the list of instructions using it."""
    out = defaultdict(list)
    for inst in f.instructions():
        for a in inst.args:
            out[a].append(inst)
    return out


def replace_all_uses(f: IRFunction, old: str, new: str) -> int:
    n = 0
    for inst in f.instructions():
        if inst.replace_arg(old, new):
            n += 1
    return n


def remove_instruction(f: IRFunction, target: Instruction) -> None:
    for b in f.blocks:
        for i, inst in enumerate(b.instructions):
            if inst is target:
                del b.instructions[i]
                return
    raise ValueError("instruction not in function")


def dead_code_elimination(f: IRFunction) -> int:
    """Delete side-effect-free instructions whose results are unused."""
    removed = 0
    while True:
        counts = defaultdict(int)
        for inst in f.instructions():
            for a in inst.args:
                counts[a] += 1
        dead = False
        for b in f.blocks:
            keep = []
            for inst in b.instructions:
                if inst.opcode in REMOVABLE and inst.result is not None and counts[inst.result] == 0:
                    removed += 1
                    dead = True
                else:
                    keep.append(inst)
            b.instructions = keep
        if not dead:
            return removed


def remove_unreachable_blocks(f: IRFunction) -> int:
    live = set(reverse_postorder(f))
    dead = [b.label for b in f.blocks if b.label not in live]
    if not dead:
        return 0
    f.blocks = [b for b in f.blocks if b.label in live]
    dead_set = set(dead)
    for b in f.blocks:
        for phi in b.phis():
            keep = [(a, l) for a, l in zip(phi.args, phi.labels) if l not in dead_set]
            phi.args = [a for a, _ in keep]
            phi.labels = [l for _, l in keep]
    return len(dead)


def natural_loops(f: IRFunction, dt: DominatorTree) -> dict:
    """Header label -> set of block labels of its natural loop(s), merged."""
    preds = predecessors(f)
    loops = {}
    for b in f.blocks:
        if not dt.reachable(b.label):
            continue
        for s in b.successors():
            if dt.dominates(s, b.label):
                body = loops.setdefault(s, {s})
                work = [b.label]
                while work:
                    n = work.pop()
                    if n in body:
                        continue
                    body.add(n)
                    work.extend(p for p in preds[n] if dt.reachable(p))
    return loops


def retarget_phis(f: IRFunction, block_label: str, old_pred: str, new_pred: str) -> None:
    for phi in f.block(block_label).phis():
        phi.labels = [new_pred if l == old_pred else l for l in phi.labels]


def constant_value(inst: Instruction):
    """A hashable identity for constant-producing instructions, else None."""
    if inst is None:
        return None
    if inst.opcode is Opcode.ConstInt:
        return ("int", inst.type, inst.imm)
    if inst.opcode is Opcode.ConstNull:
        return ("null",)
    if inst.opcode is Opcode.GlobalRef:
        return ("global", inst.symbol)
    return None


def merge_straight_line_blocks(f: IRFunction) -> int:
    """Fold a block into its unique predecessor when that predecessor ends in
    an unconditional branch to it."""
    merged = 0
    changed = True
    while changed:
        changed = False
        preds = predecessors(f)
        blocks = f.block_map()
        for b in f.blocks:
            term = b.terminator
            if term is None or term.opcode is not Opcode.Br:
                continue
            target = term.labels[0]
            if target == b.label or target == f.entry.label or preds[target] != [b.label]:
                continue
            succ = blocks[target]
            body = succ.instructions
            for phi in list(succ.phis()):
                replace_all_uses(f, phi.result, phi.args[0])
            body = [i for i in succ.instructions if i.opcode is not Opcode.Phi]
            b.instructions = b.instructions[:-1] + body
            for s in b.successors():
                retarget_phis(f, s, target, b.label)
            f.blocks = [x for x in f.blocks if x is not succ]
            merged += 1
            changed = True
            break
    return merged
