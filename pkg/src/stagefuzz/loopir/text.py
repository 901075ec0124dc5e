"""Canonical, indentation-based text form of loop programs.

```
program matmul
input a: F32[4,3]
output out0: F32[4,2]
intrinsics fma
body:
  alloc t2: F32[4,2] @global
  for i0 in 0..4 @parallel:
    for i1 in 0..2:
      t2[i0, i1] = f32(0.0)
```
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..graph.types import DType
from .ir import (Alloc, Ann, Bin, Buffer, Cast, Cmp, Const, Fma, For, If, Load, LoopProgram, Seq,
                 Store, Un, Var)

INDENT = "  "
_LIT_NAMES = {"f32": DType.F32, "i32": DType.I32, "i8": DType.I8, "bool": DType.BOOL}
_LIT_PREFIX = {v: k for k, v in _LIT_NAMES.items()}


def format_expr(e) -> str:
    if isinstance(e, Const):
        if e.dtype is None:
            return str(e.value)
        if e.dtype is DType.F32:
            v = float(e.value)
            text = "nan" if math.isnan(v) else str(np.float32(v))
            return f"f32({text})"
        return f"{_LIT_PREFIX[e.dtype]}({int(e.value)})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Load):
        return f"{e.buf}[{', '.join(format_expr(i) for i in e.index)}]"
    if isinstance(e, Bin):
        if e.op == "max":
            return f"max({format_expr(e.a)}, {format_expr(e.b)})"
        return f"({format_expr(e.a)} {e.op} {format_expr(e.b)})"
    if isinstance(e, Cmp):
        return f"({format_expr(e.a)} {e.op} {format_expr(e.b)})"
    if isinstance(e, Un):
        return f"{e.op}({format_expr(e.a)})"
    if isinstance(e, Cast):
        return f"cast<{e.to.value}>({format_expr(e.a)})"
    if isinstance(e, Fma):
        return f"fma({format_expr(e.a)}, {format_expr(e.b)}, {format_expr(e.c)})"
    raise TypeError(f"not an expression: {e!r}")


def _suffix(ann: Ann) -> str:
    s = str(ann)
    return f" {s}" if s else ""


def _format_stmt(s, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    if isinstance(s, Seq):
        if not s.stmts:
            out.append(pad + "pass")
        for x in s.stmts:
            _format_stmt(x, depth, out)
    elif isinstance(s, For):
        out.append(f"{pad}for {s.var} in {format_expr(s.lo)}..{format_expr(s.hi)}"
                   f"{_suffix(s.ann)}:")
        _format_stmt(s.body, depth + 1, out)
    elif isinstance(s, If):
        out.append(f"{pad}if {' && '.join(format_expr(c) for c in s.cond)}:")
        _format_stmt(s.body, depth + 1, out)
    elif isinstance(s, Alloc):
        out.append(f"{pad}alloc {s.buffer} @{s.scope}")
    elif isinstance(s, Store):
        idx = ", ".join(format_expr(i) for i in s.index)
        out.append(f"{pad}{s.buf}[{idx}] = {format_expr(s.value)}")
    else:
        raise TypeError(f"not a statement: {s!r}")


def serialize_loop(p: LoopProgram) -> str:
    lines = [f"program {p.name}"]
    lines += [f"input {b}" for b in p.inputs]
    lines += [f"output {b}" for b in p.outputs]
    if p.intrinsics_used:
        lines.append("intrinsics " + ",".join(sorted(p.intrinsics_used)))
    lines.append("body:")
    _format_stmt(p.body, 1, lines)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<lit>(?:f32|i32|i8|bool)\([^()]*\))
  | (?P<cast>cast<[A-Za-z0-9]+>)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\.\.|&&|<=|>=|==|[-+*/<>()\[\],:=@])
""", re.VERBOSE)


class _Tokens:
    def __init__(self, text: str, line: int):
        self.line = line
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", line, pos + 1)
            if m.lastgroup != "ws":
                self.toks.append((m.lastgroup, m.group(), pos + 1))
            pos = m.end()
        self.i = 0

    def peek(self, k: int = 0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else ("eof", "", 0)

    def next(self):
        tok = self.peek()
        if tok[0] == "eof":
            raise ParseError("unexpected end of line", self.line, 0)
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, col = self.next()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text!r}", self.line, col)

    def accept(self, value: str) -> bool:
        if self.peek()[1] == value:
            self.i += 1
            return True
        return False

    def name(self) -> str:
        kind, text, col = self.next()
        if kind != "name":
            raise ParseError(f"expected a name, found {text!r}", self.line, col)
        return text

    def integer(self) -> int:
        neg = self.accept("-")
        kind, text, col = self.next()
        if kind != "int":
            raise ParseError(f"expected an integer, found {text!r}", self.line, col)
        return -int(text) if neg else int(text)

    def done(self):
        kind, text, col = self.peek()
        if kind != "eof":
            raise ParseError(f"trailing input {text!r}", self.line, col)

    def error(self, msg: str):
        return ParseError(msg, self.line, self.peek()[2])


def _literal(tok: str, t: _Tokens) -> Const:
    head, _, rest = tok.partition("(")
    body = rest[:-1].strip()
    dtype = _LIT_NAMES[head]
    try:
        if dtype is DType.F32:
            return Const(float(np.float32(float(body))), dtype)
        if dtype is DType.BOOL:
            if body not in ("0", "1"):
                raise ValueError(body)
            return Const(body == "1", dtype)
        return Const(int(body), dtype)
    except ValueError:
        raise t.error(f"bad literal {tok!r}") from None


def _expr_list(t: _Tokens, close: str) -> tuple:
    items = []
    if t.accept(close):
        return ()
    while True:
        items.append(_expr(t))
        if t.accept(close):
            return tuple(items)
        t.expect(",")


def _expr(t: _Tokens):
    kind, text, col = t.peek()
    if kind == "int" or (text == "-" and t.peek(1)[0] == "int"):
        return Const(t.integer())
    t.next()
    if kind == "lit":
        return _literal(text, t)
    if kind == "cast":
        try:
            dtype = DType.parse(text[5:-1])
        except Exception:
            raise ParseError(f"unknown dtype in {text!r}", t.line, col) from None
        t.expect("(")
        (a,) = _expr_list(t, ")") or (None,)
        if a is None:
            raise ParseError("cast needs an operand", t.line, col)
        return Cast(dtype, a)
    if text == "(":
        a = _expr(t)
        op = t.next()[1]
        b = _expr(t)
        t.expect(")")
        if op in ("+", "-", "*", "/"):
            return Bin(op, a, b)
        if op in ("<", "<=", ">", ">=", "=="):
            return Cmp(op, a, b)
        raise ParseError(f"unknown operator {op!r}", t.line, col)
    if kind != "name":
        raise ParseError(f"unexpected {text!r}", t.line, col)
    if t.accept("["):
        return Load(text, _expr_list(t, "]"))
    if t.accept("("):
        args = _expr_list(t, ")")
        arity = {"max": 2, "neg": 1, "sigmoid": 1, "fma": 3}.get(text)
        if arity is None:
            raise ParseError(f"unknown function {text!r}", t.line, col)
        if len(args) != arity:
            raise ParseError(f"{text} takes {arity} operands", t.line, col)
        if text == "max":
            return Bin("max", *args)
        if text == "fma":
            return Fma(*args)
        return Un(text, args[0])
    return Var(text)


def parse_expr(text: str, line: int = 0):
    t = _Tokens(text, line)
    e = _expr(t)
    t.done()
    return e


def _annotation(t: _Tokens) -> Ann:
    if not t.accept("@"):
        return Ann()
    col = t.peek()[2]
    tag = t.name()
    param = None
    if t.accept("("):
        param = t.integer()
        t.expect(")")
    ann = Ann(tag, param)
    if tag not in ("serial", "parallel", "vectorize", "unroll", "pipelined") or not ann.legal:
        raise ParseError(f"unknown annotation @{tag}{'' if param is None else f'({param})'}",
                         t.line, col)
    return ann


def _buffer_decl(t: _Tokens) -> Buffer:
    name = t.name()
    t.expect(":")
    kind, text, col = t.next()
    try:
        dtype = DType.parse(text)
    except Exception:
        raise ParseError(f"unknown dtype {text!r}", t.line, col) from None
    t.expect("[")
    extents = []
    if not t.accept("]"):
        while True:
            extents.append(t.integer())
            if t.accept("]"):
                break
            t.expect(",")
    return Buffer(name, dtype, tuple(extents))


def _parse_line(text: str, lineno: int):
    """Return ``(stmt_or_header, opens_block)``."""
    t = _Tokens(text, lineno)
    head = t.peek()[1]
    if head == "for" and t.peek(1)[0] == "name" and t.peek(2)[1] == "in":
        t.next()
        var = t.name()
        t.expect("in")
        lo = _expr(t)
        t.expect("..")
        hi = _expr(t)
        ann = _annotation(t)
        t.expect(":")
        t.done()
        return ("for", var, lo, hi, ann), True
    if head == "if" and t.peek(1)[1] == "(":
        t.next()
        conds = [_expr(t)]
        while t.accept("&&"):
            conds.append(_expr(t))
        t.expect(":")
        t.done()
        if not all(isinstance(c, Cmp) for c in conds):
            raise ParseError("if condition must be comparisons", lineno, 1)
        return ("if", tuple(conds)), True
    if head == "alloc" and t.peek(1)[0] == "name" and t.peek(2)[1] == ":":
        t.next()
        buf = _buffer_decl(t)
        t.expect("@")
        scope = t.name()
        if scope not in ("global", "local", "cache"):
            raise ParseError(f"unknown scope {scope!r}", lineno, 1)
        t.done()
        return Alloc(buf, scope), False
    if head == "pass" and len(t.toks) == 1:
        return None, False
    name = t.name()
    t.expect("[")
    index = _expr_list(t, "]")
    t.expect("=")
    value = _expr(t)
    t.done()
    return Store(name, index, value), False


def parse_loop(text: str) -> LoopProgram:
    raw = [(i + 1, ln.rstrip()) for i, ln in enumerate(text.splitlines())]
    lines = [(n, ln) for n, ln in raw if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("empty program", 1, 1)
    n0, first = lines[0]
    if not first.startswith("program "):
        raise ParseError("expected 'program <name>'", n0, 1)
    name = first.split(None, 1)[1].strip()
    inputs, outputs, intrinsics = [], [], set()
    pos = 1
    while pos < len(lines):
        n, ln = lines[pos]
        if ln == "body:":
            break
        word, _, rest = ln.partition(" ")
        if word in ("input", "output"):
            t = _Tokens(rest, n)
            buf = _buffer_decl(t)
            t.done()
            (inputs if word == "input" else outputs).append(buf)
        elif word == "intrinsics":
            intrinsics |= {s.strip() for s in rest.split(",") if s.strip()}
        else:
            raise ParseError(f"unexpected header line {ln!r}", n, 1)
        pos += 1
    else:
        raise ParseError("missing 'body:'", lines[-1][0], 1)

    body_lines = []
    for n, ln in lines[pos + 1:]:
        stripped = ln.lstrip(" ")
        width = len(ln) - len(stripped)
        if "\t" in ln[:width] or width % len(INDENT) or width == 0:
            raise ParseError("bad indentation", n, 1)
        body_lines.append((n, width // len(INDENT), stripped))

    def block(i: int, depth: int) -> tuple[Seq, int]:
        stmts = []
        while i < len(body_lines):
            n, d, text_ = body_lines[i]
            if d < depth:
                break
            if d > depth:
                raise ParseError("unexpected indentation", n, 1)
            item, opens = _parse_line(text_, n)
            i += 1
            if opens:
                if i >= len(body_lines) or body_lines[i][1] <= depth:
                    raise ParseError("block has no body", n, len(text_))
                inner, i = block(i, depth + 1)
                if item[0] == "for":
                    stmts.append(For(item[1], item[2], item[3], item[4], inner))
                else:
                    stmts.append(If(item[1], inner))
            elif item is not None:
                stmts.append(item)
        return Seq(tuple(stmts)), i

    body, end = block(0, 1)
    if end != len(body_lines):
        raise ParseError("unexpected indentation", body_lines[end][0], 1)
    return LoopProgram(name, tuple(inputs), tuple(outputs), body, frozenset(intrinsics))


def load_loop(path) -> LoopProgram:
    return parse_loop(Path(path).read_text())


def save_loop(p: LoopProgram, path) -> None:
    Path(path).write_text(serialize_loop(p))
