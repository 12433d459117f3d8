"""Term-level model of the launder/strip algebra.

Terms are strings over ``L`` and ``S`` applied outermost-first to a base
``x``: ``"SL"`` is strip(launder(x)). The rewrite rules mirror the identities
applied by the intrinsic simplifier; normalization is checked for every
rewrite order.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

# (outer, inner) -> replacement for the pair
RULES = {
    ("S", "S"): "S",
    ("S", "L"): "S",
    ("L", "L"): "L",
    ("L", "S"): "L",
}


def enumerate_terms(max_depth: int) -> list:
    return ["".join(t) for d in range(1, max_depth + 1) for t in product("LS", repeat=d)]


def rewrites(term: str) -> list:
    """Every term reachable in one rewrite step."""
    out = []
    for i in range(len(term) - 1):
        rep = RULES.get((term[i], term[i + 1]))
        if rep is not None:
            out.append(term[:i] + rep + term[i + 2:])
    return out


def is_normal(term: str) -> bool:
    return not rewrites(term)


@lru_cache(maxsize=None)
def normal_forms(term: str) -> frozenset:
    """(normal form, steps) for every maximal rewrite sequence from term."""
    nxt = rewrites(term)
    if not nxt:
        return frozenset({(term, 0)})
    return frozenset((nf, steps + 1) for t in nxt for nf, steps in normal_forms(t))


def normalize(term: str) -> tuple:
    """Normal form and step count along the leftmost rewrite order."""
    steps = 0
    while True:
        nxt = rewrites(term)
        if not nxt:
            return term, steps
        term = nxt[0]
        steps += 1


def render(term: str, base: str = "x") -> str:
    out = base
    for op in reversed(term):
        out = f"{'launder' if op == 'L' else 'strip'}({out})"
    return out
