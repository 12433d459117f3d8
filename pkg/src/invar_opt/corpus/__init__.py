"""Small MiniOO programs mirroring the classic devirtualization examples."""

from __future__ import annotations

from importlib import resources

# programs with defined behavior; every one must survive differential testing
PROGRAMS = (
    "test",
    "g",
    "foo_bar",
    "corner",
    "placement_value",
    "store_launder",
    "launder_compare",
    "outline_ctor",
    "arithmetic",
    "spin",
    "stale_pointer_laundered",
    "launder_twice",
)
# programs whose checked run must report undefined behavior
UB_PROGRAMS = ("stale_pointer",)


def names() -> tuple:
    return PROGRAMS + UB_PROGRAMS


def load(name: str) -> str:
    if name not in names():
        raise KeyError(f"no corpus program named {name!r}")
    return resources.files(__name__).joinpath(f"{name}.moo").read_text(encoding="utf-8")
