"""Inlining of direct calls to functions whose body is in the module."""

from __future__ import annotations

import copy

from ..ir import BasicBlock, Instruction, IRFunction, IRModule, NameGen, Opcode
from ..ir.cfg import merge_straight_line_blocks, predecessors, replace_all_uses
from .report import PassReport


def recursive_functions(m: IRModule) -> set:
    """Functions that lie on a cycle of the direct call graph (Tarjan SCC)."""
    graph = {
        f.name: sorted({i.symbol for i in f.instructions() if i.opcode is Opcode.CallDirect and m.function(i.symbol)})
        for f in m.functions
    }
    index, low, on_stack, stack = {}, {}, set(), []
    out = set()
    counter = 0
    for root in graph:
        if root in index:
            continue
        work = [(root, iter(graph[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(graph[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                scc = []
                while True:
                    v = stack.pop()
                    on_stack.discard(v)
                    scc.append(v)
                    if v == node:
                        break
                if len(scc) > 1 or node in graph[node]:
                    out.update(scc)
    return out


def _label_prefix(symbol: str) -> str:
    return symbol.replace("::~", ".d.").replace("::", ".").replace("~", "d")


def inline_calls(f: IRFunction, m: IRModule, cfg=None) -> tuple:
    """Inline the direct call sites present on entry whose callee has a body,
    is small enough, and is not recursive."""
    threshold = cfg.inline_threshold if cfg is not None else 100
    recursive = recursive_functions(m)
    sites = []
    for inst in f.instructions():
        if inst.opcode is not Opcode.CallDirect or inst.symbol == f.name:
            continue
        callee = m.function(inst.symbol)
        if callee is None or callee.name in recursive or callee.size() > threshold:
            continue
        if predecessors(callee)[callee.entry.label]:
            continue
        sites.append((inst, copy.deepcopy(callee)))
    for call, callee in sites:
        _inline_site(f, call, callee)
    if sites:
        merge_straight_line_blocks(f)
    return f, PassReport(inlined_calls=len(sites))


def _inline_site(f: IRFunction, call: Instruction, callee: IRFunction) -> None:
    names = NameGen(f)
    block = next(b for b in f.blocks if any(i is call for i in b.instructions))
    idx = next(i for i, inst in enumerate(block.instructions) if inst is call)
    prefix = _label_prefix(callee.name)

    cont = BasicBlock(names.label(f"{block.label}.cont"), block.instructions[idx + 1:])
    block.instructions = block.instructions[:idx]
    for s in cont.successors():
        for phi in f.block(s).phis():
            phi.labels = [cont.label if l == block.label else l for l in phi.labels]

    values = {p.name: a for p, a in zip(callee.params, call.args)}
    for inst in callee.instructions():
        if inst.result is not None:
            values[inst.result] = names.value(inst.result)
    labels = {b.label: names.label(f"{prefix}.{b.label}") for b in callee.blocks}

    returns = []
    copied = []
    for b in callee.blocks:
        nb = BasicBlock(labels[b.label])
        for inst in b.instructions:
            if inst.opcode is Opcode.Ret:
                returns.append(([values[a] for a in inst.args], nb.label))
                nb.instructions.append(Instruction(Opcode.Br, labels=[cont.label]))
                continue
            ni = copy.copy(inst)
            ni.args = [values[a] for a in inst.args]
            ni.labels = [labels[l] for l in inst.labels]
            if inst.result is not None:
                ni.result = values[inst.result]
            nb.instructions.append(ni)
        copied.append(nb)

    block.instructions.append(Instruction(Opcode.Br, labels=[labels[callee.entry.label]]))
    at = f.blocks.index(block) + 1
    f.blocks[at:at] = copied + [cont]
    if call.result is not None:
        if len(returns) == 1:
            result = returns[0][0][0]
        elif returns:
            result = names.value(call.result)
            cont.instructions.insert(
                0,
                Instruction(Opcode.Phi, result, call.type, [r[0][0] for r in returns], labels=[r[1] for r in returns]),
            )
        else:
            result = names.value(call.result)
            cont.instructions.insert(0, Instruction(Opcode.ConstUndef, result, call.type))
        replace_all_uses(f, call.result, result)
