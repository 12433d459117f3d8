from .ast import SourceError, SourceProgram
from .lower import LoweringOptions, emit_vtables, lower_to_ir, vtable_name
from .parser import ClassTable, parse_source


def compile_source(text: str, opts: LoweringOptions = None, name: str = "main"):
    """Parse, resolve and lower MiniOO text in one step."""
    return lower_to_ir(parse_source(text), opts, name)


__all__ = [
    "ClassTable",
    "LoweringOptions",
    "SourceError",
    "SourceProgram",
    "compile_source",
    "emit_vtables",
    "lower_to_ir",
    "parse_source",
    "vtable_name",
]
