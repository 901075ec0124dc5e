"""Structural and typing checks for graphs."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import GraphTypeError
from .ir import Graph
from .ops import LEAF_KINDS, get_kind, infer_shape, normalize_params
from .types import MAX_RANK, DType


@dataclass(frozen=True)
class Violation:
    code: str  # DanglingInput | CycleDetected | Arity | Shape | Param | Output | ...
    node: int | None = None
    ref: int | None = None
    detail: str = ""

    def __str__(self):
        where = "" if self.node is None else f" at node {self.node}"
        ref = "" if self.ref is None else f"({self.ref})"
        return f"{self.code}{ref}{where}: {self.detail}".rstrip(": ")


def validate_graph(g: Graph) -> list[Violation]:
    """List every violation in ``g``; an empty list means it is executable."""
    out: list[Violation] = []
    if not g.outputs:
        out.append(Violation("EmptyOutputs", detail="graph has no outputs"))
    for o in g.outputs:
        if o not in g.nodes:
            out.append(Violation("MissingOutput", ref=o))
    if not any(n.kind in LEAF_KINDS for n in g.nodes.values()):
        out.append(Violation("NoSource", detail="no Input or Constant node"))

    names: dict[str, int] = {}
    dangling = False
    for node in g.nodes.values():
        if node.id != int(node.id):
            out.append(Violation("BadId", node=node.id))
        for src in node.inputs:
            if src not in g.nodes:
                out.append(Violation("DanglingInput", node=node.id, ref=src))
                dangling = True
        try:
            kind = get_kind(node.kind)
        except GraphTypeError as exc:
            out.append(Violation("Param", node=node.id, detail=str(exc)))
            continue
        if kind.arity is not None and len(node.inputs) != kind.arity:
            out.append(Violation("Arity", node=node.id,
                                 detail=f"{node.kind} takes {kind.arity}, has {len(node.inputs)}"))
        elif kind.arity is None and not node.inputs:
            out.append(Violation("Arity", node=node.id, detail=f"{node.kind} has no inputs"))
        try:
            params = normalize_params(node.kind, node.params)
        except GraphTypeError as exc:
            out.append(Violation("Param", node=node.id, detail=str(exc)))
            continue
        if node.out_type.rank > MAX_RANK:
            out.append(Violation("Shape", node=node.id, detail="rank above cap"))
        if node.kind == "Input":
            name = params["name"]
            if name in names:
                out.append(Violation("DuplicateInputName", node=node.id, ref=names[name],
                                     detail=name))
            names[name] = node.id
        elif node.kind == "Constant":
            if node.data is None or len(node.data) != node.out_type.size:
                out.append(Violation("Payload", node=node.id,
                                     detail=f"payload does not match {node.out_type}"))
            elif node.out_type.dtype is DType.I8 and any(not -128 <= v <= 127 for v in node.data):
                out.append(Violation("Payload", node=node.id, detail="I8 payload out of range"))

    try:
        order = g.topo_order()
    except ValueError as exc:
        if not dangling:
            out.append(Violation("CycleDetected", detail=str(exc)))
        return out

    for nid in order:
        node = g.nodes[nid]
        if node.kind in LEAF_KINDS or any(v.node == nid for v in out):
            continue
        try:
            expect = infer_shape(node.kind, node.params,
                                 [g.nodes[s].out_type for s in node.inputs])
        except GraphTypeError as exc:
            code = "Param" if type(exc).__name__ == "InvalidParam" else "Shape"
            out.append(Violation(code, node=nid, detail=str(exc)))
            continue
        if expect != node.out_type:
            out.append(Violation("Shape", node=nid,
                                 detail=f"declared {node.out_type}, inferred {expect}"))
    return out
