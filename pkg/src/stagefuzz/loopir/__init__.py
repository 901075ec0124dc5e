"""Loop-nest IR, lowering from graphs, interpreter and text format."""

from .interp import compile_loop, fma_f32, interpret_loop
from .ir import (NAN, SERIAL, Alloc, Ann, Bin, Buffer, Cast, Cmp, Const, Fma, For, If, Load,
                 LoopProgram, Seq, Store, Un, Var, strip_annotations, walk)
from .lower import lower_graph
from .text import load_loop, parse_loop, save_loop, serialize_loop
from .validate import LoopViolation, validate_loop

__all__ = [
    "NAN", "SERIAL", "Alloc", "Ann", "Bin", "Buffer", "Cast", "Cmp", "Const", "Fma", "For", "If",
    "Load", "LoopProgram", "Seq", "Store", "Un", "Var", "compile_loop", "fma_f32",
    "interpret_loop", "load_loop", "lower_graph", "parse_loop", "save_loop", "serialize_loop",
    "strip_annotations", "validate_loop", "walk", "LoopViolation",
]
