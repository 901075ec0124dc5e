"""Template wrapping of an operator instance into a single-operator graph."""

from __future__ import annotations

import re

import numpy as np

from ..errors import GraphTypeError, ShapeMismatch
from ..graph.ir import Graph, GraphBuilder
from ..graph.types import TensorType, TensorValue, random_tensor
from .records import InputSpec, OperatorInstanceRecord


def input_name(k: int) -> str:
    return f"x{k}"


def graph_name(record: OperatorInstanceRecord) -> str:
    return re.sub(r"\W", "_", record.origin) or record.kind.lower()


def leaf_nodes(b: GraphBuilder, record: OperatorInstanceRecord) -> list[int]:
    """Input nodes for random sources, Constant nodes for inline data."""
    ids = []
    for k, spec in enumerate(record.inputs):
        if spec.inline:
            arr = np.array(spec.data, dtype=spec.dtype.np).reshape(spec.shape)
            ids.append(b.const(arr, spec.dtype))
        else:
            ids.append(b.input(input_name(k), spec.dtype, spec.shape))
    return ids


def wrap_instance(record: OperatorInstanceRecord) -> Graph:
    """Leaves per input spec, one ``record.kind`` node, that node as output.

    Raises ShapeMismatch when the operands break the kind's shape rule;
    such records are kept as negative tests.
    """
    b = GraphBuilder(graph_name(record))
    ids = leaf_nodes(b, record)
    try:
        nid = b.op(record.kind, ids, **record.params)
    except ShapeMismatch:
        raise
    except GraphTypeError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return b.build([nid])


def input_values(record: OperatorInstanceRecord, round_: int = 0) -> dict[str, TensorValue]:
    """Concrete tensors for the random sources; ``round_`` reseeds replays."""
    out = {}
    for k, spec in enumerate(record.inputs):
        if not spec.inline:
            rng = np.random.default_rng([spec.seed, round_]) if round_ else \
                np.random.default_rng(spec.seed)
            out[input_name(k)] = random_tensor(TensorType(spec.dtype, spec.shape), rng)
    return out


__all__ = ["InputSpec", "graph_name", "input_name", "input_values", "leaf_nodes", "wrap_instance"]
