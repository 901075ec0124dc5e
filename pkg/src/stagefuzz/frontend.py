"""The compiler's model loader: converts operator records into graph IR.

This is the stage under test in loader campaigns. Each operator kind has a
conversion rule (``convert.<Kind>``) that maps framework-style parameters
onto the IR's canonical form and rejects malformed instances with
:class:`ConversionError`. Seeded bugs L1 to L4 live here.
"""

from __future__ import annotations

from typing import Callable

from . import bugs
from .errors import ConversionError, GraphTypeError
from .graph.ir import Graph, GraphBuilder, Node
from .graph.ops import normalize_params
from .graph.types import DType, TensorType
from .opera.records import OperatorInstanceRecord
from .opera.wrap import graph_name, leaf_nodes

Rule = Callable[[GraphBuilder, str, list[int], dict], int]
_RULES: dict[str, Rule] = {}


def _rule(*kinds: str):
    def deco(fn: Rule) -> Rule:
        for k in kinds:
            _RULES[k] = fn
        return fn
    return deco


def _emit(b: GraphBuilder, kind: str, ids: list[int], params: dict) -> int:
    try:
        return b.op(kind, ids, **params)
    except GraphTypeError as exc:
        raise ConversionError(f"{kind}: {exc}") from exc


@_rule("Add", "Sub", "Mul", "Div", "Neg", "ReLU", "Sigmoid", "MatMul", "Reshape", "ReduceSum",
       "Pad")
def _generic(b, kind, ids, params):
    return _emit(b, kind, ids, params)


@_rule("Conv2D")
def _conv(b, kind, ids, params):
    p = dict(params)
    pad = tuple(p.get("pad", (0, 0)))
    if len(pad) == 2:
        pad = (pad[0], pad[1], pad[0], pad[1])
    elif len(pad) == 4 and bugs.enabled("L1"):
        buggy = (pad[0], pad[1], pad[0], pad[1])
        if buggy != pad:
            bugs.hit("L1")
        pad = buggy
    p["pad"] = pad
    return _emit(b, "Conv2D", ids, p)


@_rule("Concat")
def _concat(b, kind, ids, params):
    p = dict(params)
    rank = b.type_of(ids[0]).rank
    axis = p.get("axis", 0)
    if axis < 0:
        if bugs.enabled("L3"):
            bugs.hit("L3")
            axis = rank + axis - 1
        else:
            axis = rank + axis
    if not 0 <= axis < max(rank, 1):
        raise ConversionError(f"Concat axis {p.get('axis')} out of range for rank {rank}")
    p["axis"] = axis
    return _emit(b, "Concat", ids, p)


@_rule("Transpose")
def _transpose(b, kind, ids, params):
    perm = tuple(params["perm"])
    x = b.type_of(ids[0])
    if len(perm) != x.rank or any(not 0 <= q < x.rank for q in perm):
        raise ConversionError(f"Transpose perm {list(perm)} does not fit rank {x.rank}")
    if len(set(perm)) != len(perm):
        if not bugs.enabled("L4"):
            raise ConversionError(f"Transpose perm {list(perm)} repeats an axis")
        bugs.hit("L4")
        # accepted: the result type follows the (bogus) permutation
        nid = b._take_id()
        b.nodes[nid] = Node(nid, "Transpose", normalize_params("Transpose", {"perm": perm}),
                            tuple(ids), TensorType(x.dtype, tuple(x.shape[q] for q in perm)))
        return nid
    return _emit(b, "Transpose", ids, {"perm": perm})


@_rule("Cast")
def _cast(b, kind, ids, params):
    try:
        to = DType.parse(str(params["to"].value if isinstance(params["to"], DType)
                             else params["to"]))
    except ValueError as exc:
        raise ConversionError(str(exc)) from exc
    src = b.type_of(ids[0]).dtype
    if bugs.enabled("L2") and src is DType.I32 and to is not DType.I32:
        bugs.hit("L2")
        return ids[0]
    return _emit(b, "Cast", ids, {"to": to})


def conversion_rule(kind: str) -> str:
    return f"convert.{kind}"


def load_record(record: OperatorInstanceRecord) -> Graph:
    """Convert ``record`` to a graph whose single output is the operator.

    Raises ConversionError for instances the loader must reject.
    """
    rule = _RULES.get(record.kind)
    if rule is None:
        raise ConversionError(f"no conversion rule for {record.kind}")
    b = GraphBuilder(graph_name(record))
    ids = leaf_nodes(b, record)
    out = rule(b, record.kind, ids, dict(record.params))
    return b.build([out])
