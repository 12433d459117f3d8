"""Pass statistics and pipeline configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

COUNTERS = (
    "devirtualized_calls",
    "forwarded_invariant_loads",
    "folded_comparisons",
    "hoisted_loads",
    "eliminated_stores",
    "removed_intrinsics",
    "inlined_calls",
    "folded_assumes",
)

CORE_PASSES = (
    "inline",
    "simplify-intrinsics",
    "forward-invariant-loads",
    "fold-assumes",
    "fold-pointer-comparisons",
    "devirtualize",
    "hoist-invariant-loads",
    "dse",
)
LOWER_PASS = "lower-for-codegen"
EXTRA_PASSES = ("propagate-attrs",)
ALL_PASSES = CORE_PASSES + EXTRA_PASSES + (LOWER_PASS,)


@dataclass
class PassReport:
    devirtualized_calls: int = 0
    forwarded_invariant_loads: int = 0
    folded_comparisons: int = 0
    hoisted_loads: int = 0
    eliminated_stores: int = 0
    removed_intrinsics: int = 0
    inlined_calls: int = 0
    folded_assumes: int = 0
    by_function: dict = field(default_factory=dict, compare=False, repr=False)

    def counts(self) -> dict:
        return {k: getattr(self, k) for k in COUNTERS}

    def total(self) -> int:
        return sum(self.counts().values())

    def add(self, other: PassReport, function: str = None) -> PassReport:
        for k in COUNTERS:
            setattr(self, k, getattr(self, k) + getattr(other, k))
        if function is not None:
            self.by_function.setdefault(function, PassReport()).add(other)
        else:
            for name, sub in other.by_function.items():
                self.by_function.setdefault(name, PassReport()).add(sub)
        return self

    def function(self, name: str) -> PassReport:
        return self.by_function.get(name, PassReport())

    def to_text(self) -> str:
        lines = [f"{k}={v}" for k, v in self.counts().items()]
        for name in sorted(self.by_function):
            for k, v in self.by_function[name].counts().items():
                if v:
                    lines.append(f"{name}.{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> PassReport:
        out = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition("=")
            head, _, counter = key.rpartition(".")
            if head and counter in COUNTERS and key not in COUNTERS:
                sub = out.by_function.setdefault(head, cls())
                setattr(sub, counter, int(value))
            elif key in COUNTERS:
                setattr(out, key, int(value))
            else:
                raise ValueError(f"unknown report key {key!r}")
        return out


@dataclass
class PipelineConfig:
    passes: list = field(default_factory=lambda: list(CORE_PASSES) + [LOWER_PASS])
    inline_threshold: int = 100
    fixpoint_iterations: int = 4

    def validate(self) -> None:
        for name in self.passes:
            if name not in ALL_PASSES:
                raise ValueError(f"unknown pass {name!r}")
        if LOWER_PASS in self.passes and self.passes.index(LOWER_PASS) != len(self.passes) - 1:
            raise ValueError(f"{LOWER_PASS} must be the last pass")
        if self.inline_threshold < 0 or self.fixpoint_iterations < 1:
            raise ValueError("inline_threshold must be >= 0 and fixpoint_iterations >= 1")

