"""High-level graph IR of the reference tensor compiler."""

from .interp import eval_kernel, interpret_graph, random_inputs
from .ir import Graph, GraphBuilder, Node, make_node
from .ops import KIND_NAMES, OPERATORS, OperatorKind, get_kind, infer_shape, normalize_params
from .text import load_graph, parse_graph, save_graph, serialize_graph
from .types import DType, TensorType, TensorValue, random_tensor
from .validate import Violation, validate_graph

__all__ = [
    "DType", "TensorType", "TensorValue", "random_tensor",
    "OperatorKind", "OPERATORS", "KIND_NAMES", "get_kind", "infer_shape", "normalize_params",
    "Node", "Graph", "GraphBuilder", "make_node",
    "Violation", "validate_graph",
    "interpret_graph", "eval_kernel", "random_inputs",
    "serialize_graph", "parse_graph", "save_graph", "load_graph",
]
