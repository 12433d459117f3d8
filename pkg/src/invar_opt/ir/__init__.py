from .nodes import (
    INVARIANT_GROUP,
    INVARIANT_LOAD,
    LAUNDER_SYMBOL,
    NO_ATTRS,
    SLOT_SIZE,
    STRIP_SYMBOL,
    ASSUME_SYMBOL,
    BasicBlock,
    Declaration,
    Instruction,
    IRFunction,
    IRModule,
    Linkage,
    NameGen,
    Opcode,
    Param,
    ParamAttributeSet,
    VTableGlobal,
)
from .text import IRSyntaxError, format_instruction, parse_ir, print_ir
from .verify import Diagnostic, VerificationError, check_module, verify_module

__all__ = [
    "ASSUME_SYMBOL",
    "INVARIANT_GROUP",
    "INVARIANT_LOAD",
    "LAUNDER_SYMBOL",
    "NO_ATTRS",
    "SLOT_SIZE",
    "STRIP_SYMBOL",
    "BasicBlock",
    "Declaration",
    "Diagnostic",
    "Instruction",
    "IRFunction",
    "IRModule",
    "IRSyntaxError",
    "Linkage",
    "NameGen",
    "Opcode",
    "Param",
    "ParamAttributeSet",
    "VerificationError",
    "VTableGlobal",
    "check_module",
    "format_instruction",
    "parse_ir",
    "print_ir",
    "verify_module",
]
