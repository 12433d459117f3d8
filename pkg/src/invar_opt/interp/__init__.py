from .machine import (
    MODES,
    NULL,
    STRIPPED,
    UB_KINDS,
    ExecTrace,
    FunctionHandle,
    InterpreterError,
    MemoryState,
    RuntimePointer,
    UBReport,
    eval_module,
)

__all__ = [
    "MODES",
    "NULL",
    "STRIPPED",
    "UB_KINDS",
    "ExecTrace",
    "FunctionHandle",
    "InterpreterError",
    "MemoryState",
    "RuntimePointer",
    "UBReport",
    "eval_module",
]
