"""Canonical line-oriented text format for graphs.

::

    graph <name>
    node <id> <Kind> inputs=[<id>,...] params={k=v,...} type=<dtype>[d0,...] [data=[...]]
    outputs=[<id>,...]

Lines starting with ``#`` are comments. Constants with more than 64
elements may store their payload in a sidecar file (``data=@relpath``),
one element per whitespace-separated token.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ParseError
from .ir import NAN, Graph, Node, payload_tuple
from .types import DType, TensorType

INLINE_LIMIT = 64


def format_scalar(v, dtype: DType) -> str:
    if dtype is DType.F32:
        return str(np.float32(v))
    if dtype is DType.BOOL:
        return "true" if v else "false"
    return str(int(v))


def _parse_scalar(tok: str, dtype: DType):
    if dtype is DType.F32:
        v = float(np.float32(tok))
        return NAN if v != v else v
    if dtype is DType.BOOL:
        if tok not in ("true", "false"):
            raise ValueError(tok)
        return tok == "true"
    return int(tok)


def _format_value(v: Any) -> str:
    if isinstance(v, DType):
        return v.value
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):  # FusedGroup body
        return ";".join(f"{op}({','.join(args)})" for op, args in v)
    if isinstance(v, (tuple, list)):
        return "[" + ",".join(str(x) for x in v) + "]"
    return str(v)


def format_node(node: Node, sidecar: str | None = None) -> str:
    params = ",".join(f"{k}={_format_value(v)}" for k, v in sorted(node.params.items()))
    line = (f"node {node.id} {node.kind} inputs=[{','.join(map(str, node.inputs))}] "
            f"params={{{params}}} type={node.out_type}")
    if node.data is not None:
        if sidecar is not None:
            line += f" data=@{sidecar}"
        else:
            dt = node.out_type.dtype
            line += " data=[" + ",".join(format_scalar(x, dt) for x in node.data) + "]"
    return line


def serialize_graph(g: Graph) -> str:
    """Canonical text: nodes in ascending id order, payloads inline."""
    lines = [f"graph {g.name}"]
    lines += [format_node(n) for n in g.nodes.values()]
    lines.append(f"outputs=[{','.join(map(str, g.outputs))}]")
    return "\n".join(lines) + "\n"


def save_graph(g: Graph, path: str | Path) -> None:
    """Write ``g`` to ``path``; large constant payloads go to sidecar files."""
    path = Path(path)
    lines = [f"graph {g.name}"]
    for n in g.nodes.values():
        if n.data is not None and len(n.data) > INLINE_LIMIT:
            rel = f"{path.stem}.c{n.id}.txt"
            dt = n.out_type.dtype
            (path.parent / rel).write_text(" ".join(format_scalar(x, dt) for x in n.data) + "\n")
            lines.append(format_node(n, sidecar=rel))
        else:
            lines.append(format_node(n))
    lines.append(f"outputs=[{','.join(map(str, g.outputs))}]")
    path.write_text("\n".join(lines) + "\n")


def load_graph(path: str | Path) -> Graph:
    path = Path(path)
    return parse_graph(path.read_text(), base_dir=path.parent)


_NODE_RE = re.compile(r"^node\s+(-?\d+)\s+([A-Za-z][A-Za-z0-9]*)\s+(.*)$")
_TYPE_RE = re.compile(r"^([A-Z0-9]+)\[([0-9,\s]*)\]$")


def _split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside brackets and parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur or parts:
        parts.append("".join(cur))
    return [p.strip() for p in parts]


def _fields(rest: str) -> dict[str, str]:
    """Split ``k=v k=v`` where values may contain bracketed spaces."""
    out: dict[str, str] = {}
    i, n = 0, len(rest)
    while i < n:
        while i < n and rest[i] == " ":
            i += 1
        if i >= n:
            break
        eq = rest.find("=", i)
        if eq < 0:
            raise ValueError(f"expected key=value near {rest[i:i + 20]!r}")
        key = rest[i:eq]
        j, depth = eq + 1, 0
        while j < n and (depth > 0 or rest[j] != " "):
            if rest[j] in "([{":
                depth += 1
            elif rest[j] in ")]}":
                depth -= 1
            j += 1
        out[key] = rest[eq + 1:j]
        i = j
    return out


def _int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"expected [..], got {text!r}")
    inner = text[1:-1].strip()
    return tuple(int(x) for x in inner.split(",")) if inner else ()


def _param_value(key: str, text: str):
    if key == "body":
        steps = []
        for step in text.split(";"):
            m = re.match(r"^([A-Za-z]+)\(([^)]*)\)$", step.strip())
            if not m:
                raise ValueError(f"bad fused step {step!r}")
            steps.append((m.group(1), tuple(a.strip() for a in m.group(2).split(","))))
        return tuple(steps)
    if text.startswith("["):
        return _int_list(text)
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if text in DType.__members__ and key == "to":
        return DType(text)
    return text


def _parse_type(text: str) -> TensorType:
    m = _TYPE_RE.match(text)
    if not m:
        raise ValueError(f"bad type {text!r}")
    dims = m.group(2).strip()
    return TensorType(DType.parse(m.group(1)),
                      tuple(int(d) for d in dims.split(",")) if dims else ())


def parse_graph(text: str, base_dir: str | Path | None = None) -> Graph:
    """Inverse of :func:`serialize_graph`; raises ParseError with line/column."""
    nodes: dict[int, Node] = {}
    name = "g"
    outputs = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        col = raw.find(line[0]) + 1
        if outputs is not None:
            raise ParseError("content after outputs line", lineno, col)
        if line.startswith("graph "):
            name = line[6:].strip()
            continue
        if line.startswith("outputs="):
            try:
                outputs = _int_list(line[len("outputs="):])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, col + 8) from None
            continue
        m = _NODE_RE.match(line)
        if not m:
            raise ParseError(f"unrecognized line {line[:40]!r}", lineno, col)
        try:
            nid, kind = int(m.group(1)), m.group(2)
            f = _fields(m.group(3))
            inputs = _int_list(f.pop("inputs"))
            ptext = f.pop("params")
            if not (ptext.startswith("{") and ptext.endswith("}")):
                raise ValueError("params must be {...}")
            params = {}
            for item in _split_top(ptext[1:-1]):
                if not item:
                    continue
                k, _, v = item.partition("=")
                params[k.strip()] = _param_value(k.strip(), v.strip())
            ttype = _parse_type(f.pop("type"))
            data = None
            if "data" in f:
                data = _parse_data(f.pop("data"), ttype.dtype, base_dir)
            if f:
                raise ValueError(f"unknown fields {sorted(f)}")
        except (ValueError, KeyError) as exc:
            raise ParseError(f"bad node line: {exc}", lineno, col) from None
        if nid in nodes:
            raise ParseError(f"duplicate node id {nid}", lineno, col)
        nodes[nid] = Node(nid, kind, params, inputs, ttype, data)
    if outputs is None:
        raise ParseError("missing outputs=[...] line", len(text.splitlines()) + 1, 1)
    return Graph(nodes, outputs, name)


def _parse_data(text: str, dtype: DType, base_dir) -> tuple:
    if text.startswith("@"):
        if base_dir is None:
            raise ValueError("sidecar payload without a base directory")
        toks = (Path(base_dir) / text[1:]).read_text().split()
    else:
        inner = text.strip()[1:-1].strip()
        toks = inner.split(",") if inner else []
    vals = [_parse_scalar(t.strip(), dtype) for t in toks]
    return payload_tuple(np.asarray(vals, dtype=dtype.np), dtype) if vals else ()
