"""The six hardware-independent graph passes."""

from __future__ import annotations

import numpy as np

from .. import bugs
from ..errors import NumericDomain
from ..graph.interp import binary, eval_kernel, unary
from ..graph.ir import Node, make_node, payload_tuple
from ..graph.ops import ELEMENTWISE, ELEMENTWISE_BINARY
from ..graph.types import DType
from .core import Editor, PassId, register

FOLD_LIMIT = 1024

_FOLD_RULE = {
    **{k: "fold.binary" for k in ELEMENTWISE_BINARY},
    "Neg": "fold.unary", "ReLU": "fold.unary", "Sigmoid": "fold.unary", "Cast": "fold.unary",
    "Reshape": "fold.layout", "Transpose": "fold.layout", "Concat": "fold.layout",
    "Pad": "fold.layout",
    "MatMul": "fold.compute", "Conv2D": "fold.compute", "ReduceSum": "fold.compute",
    "FusedGroup": "fold.compute",
}


def _fold_value(node: Node, args, in_types):
    value = eval_kernel(node.kind, node.params, args, in_types, node.out_type)
    if (bugs.enabled("H1") and node.out_type.dtype is DType.I8
            and node.kind in ("Add", "Sub", "Mul", "Neg")):
        if node.kind == "Neg":
            exact = unary("Neg", args[0], DType.I32)
        else:
            exact = binary(node.kind, args[0].astype(np.int32), args[1].astype(np.int32),
                           DType.I32)
        saturated = np.clip(exact, -128, 127).astype(np.int8)
        if not np.array_equal(saturated, value):
            bugs.hit("H1")
        value = saturated
    return value


@register(PassId.ConstFold)
def const_fold(ed: Editor) -> None:
    for nid in ed.topo():
        node = ed.nodes[nid]
        if node.kind in ("Input", "Constant") or not node.inputs:
            continue
        srcs = [ed.nodes[s] for s in node.inputs]
        if any(s.kind != "Constant" for s in srcs) or node.out_type.size > FOLD_LIMIT:
            continue
        try:
            value = _fold_value(node, [s.payload() for s in srcs], [s.out_type for s in srcs])
        except NumericDomain:
            continue  # leave the fault to run time
        ed.put(Node(nid, "Constant", {}, (), node.out_type,
                    payload_tuple(value, node.out_type.dtype)))
        for s in set(node.inputs):
            if ed.use_count(s) == 0:
                ed.remove(s)
        ed.trace(_FOLD_RULE[node.kind], {nid}, {nid})


def _all_equal(node: Node, value) -> bool:
    return node.kind == "Constant" and len(node.data) > 0 and all(v == value for v in node.data)


@register(PassId.AlgebraicSimplify)
def algebraic_simplify(ed: Editor) -> None:
    for nid in ed.topo():
        node = ed.nodes.get(nid)
        if node is None:
            continue
        target = rule = None
        matched = {nid}
        if node.kind in ("Add", "Mul"):
            ident = 0 if node.kind == "Add" else 1
            a, b = (ed.nodes[s] for s in node.inputs)
            for x, c in ((a, b), (b, a)):
                if _all_equal(c, ident) and x.out_type == node.out_type:
                    target = x.id
                    rule = "simplify.add_zero" if ident == 0 else "simplify.mul_one"
                    break
        elif node.kind == "Transpose":
            inner = ed.nodes[node.inputs[0]]
            if inner.kind == "Transpose":
                p, q = inner.params["perm"], node.params["perm"]
                if all(p[q[i]] == i for i in range(len(q))):
                    target, rule = inner.inputs[0], "simplify.transpose_pair"
                    matched.add(inner.id)
        elif node.kind == "Reshape":
            src = ed.nodes[node.inputs[0]]
            if tuple(node.params["shape"]) == src.out_type.shape:
                target, rule = src.id, "simplify.reshape_identity"
        if target is not None:
            ed.replace_uses(nid, target)
            ed.remove(nid)
            ed.trace(rule, matched, {target})


def _cse_key(node: Node):
    params = tuple(sorted(node.params.items()))
    if node.kind == "Constant":
        data = None if bugs.enabled("H3") else node.data
        return ("Constant", node.out_type, data)
    return (node.kind, params, node.inputs, node.out_type)


@register(PassId.CSE)
def cse(ed: Editor) -> None:
    seen: dict = {}
    for nid in ed.topo():
        node = ed.nodes[nid]
        if node.kind == "Input":
            continue
        key = _cse_key(node)
        rep = seen.get(key)
        if rep is None:
            seen[key] = nid
            continue
        if node.kind == "Constant" and ed.nodes[rep].data != node.data:
            bugs.hit("H3")
        ed.replace_uses(nid, rep)
        ed.remove(nid)
        ed.trace("cse.merge", {rep, nid}, {rep})


@register(PassId.DeadNodeElim)
def dead_node_elim(ed: Editor) -> None:
    live = ed.graph().reachable_from_outputs()
    dead = [nid for nid in ed.nodes if nid not in live]
    if dead:
        for nid in dead:
            ed.remove(nid)
        ed.trace("dce.unreachable", dead, ())


FUSABLE = set(ELEMENTWISE)


@register(PassId.FuseElementwise)
def fuse_elementwise(ed: Editor) -> None:
    order = ed.topo()
    absorbed: set[int] = set()
    for root in reversed(order):
        node = ed.nodes.get(root)
        if node is None or root in absorbed or node.kind not in FUSABLE:
            continue
        region = {root}
        stolen: dict[int, list[int]] = {}
        frontier = list(node.inputs)
        while frontier:
            p = frontier.pop()
            pn = ed.nodes[p]
            if p in region or pn.kind not in FUSABLE or p in absorbed:
                continue
            if p in ed.outputs:
                continue
            users = ed.users(p)
            if ed.use_count(p) != 1:
                # seeded defect H2: fuse anyway and hand the other consumers
                # the group result
                if not bugs.enabled("H2") or pn.out_type != node.out_type:
                    continue
                outside = [u for u in users if u not in region]
                if not outside or not all(_depends_not_on(ed, u, root) for u in outside):
                    continue
                stolen[p] = outside
            region.add(p)
            frontier.extend(pn.inputs)
        if len(region) < 2:
            continue
        _emit_group(ed, root, region, order, stolen)
        absorbed |= region


def _depends_not_on(ed: Editor, user: int, root: int) -> bool:
    """True when ``root`` does not (transitively) depend on ``user``."""
    stack, seen = [root], set()
    while stack:
        n = stack.pop()
        if n == user:
            return False
        if n in seen:
            continue
        seen.add(n)
        stack.extend(ed.nodes[n].inputs)
    return True


def _emit_group(ed: Editor, root: int, region: set[int], order, stolen) -> None:
    members = [n for n in order if n in region]
    ext: list[int] = []
    refs: dict[int, str] = {}
    body = []
    tree = False
    for m in members:
        mn = ed.nodes[m]
        args = []
        inner_args = 0
        for s in mn.inputs:
            if s in region:
                args.append(refs[s])
                inner_args += 1
            else:
                if s not in ext:
                    ext.append(s)
                args.append(f"i{ext.index(s)}")
        tree = tree or inner_args > 1
        refs[m] = f"t{len(body)}"
        body.append((mn.kind, tuple(args)))
    group = make_node(root, "FusedGroup", ext, [ed.nodes[s].out_type for s in ext],
                      body=tuple(body))
    for m in members:
        if m != root:
            ed.remove(m)
    ed.put(group)
    for p, users in stolen.items():
        if users:
            bugs.hit("H2")
            for u in users:
                ed.replace_uses(p, root, only={u})
    ed.trace("fuse.tree" if tree else "fuse.chain", members, {root})


NCHW_TO_NHWC = (0, 2, 3, 1)
NHWC_TO_NCHW = (0, 3, 1, 2)


@register(PassId.LayoutTransform)
def layout_transform(ed: Editor) -> None:
    for nid in ed.topo():
        node = ed.nodes[nid]
        if node.kind != "Conv2D" or node.params["layout"] != "NCHW":
            continue
        x, w = node.inputs
        t_in = make_node(ed.fresh_id(), "Transpose", [x], [ed.nodes[x].out_type],
                         perm=NCHW_TO_NHWC)
        conv = make_node(ed.fresh_id(), "Conv2D", [t_in.id, w],
                         [t_in.out_type, ed.nodes[w].out_type],
                         stride=node.params["stride"], pad=node.params["pad"], layout="NHWC")
        ed.put(t_in)
        ed.put(conv)
        if bugs.enabled("H4"):
            bugs.hit("H4")
            ed.remove(nid)
            ed.replace_uses(nid, conv.id)
            ed.trace("layout.conv_nhwc", {nid}, {t_in.id, conv.id})
            continue
        t_out = Node(nid, "Transpose", {"perm": NHWC_TO_NCHW}, (conv.id,), node.out_type)
        ed.put(t_out)
        ed.trace("layout.conv_nhwc", {nid}, {t_in.id, conv.id, nid})

    for nid in ed.topo():
        node = ed.nodes.get(nid)
        if node is None or node.kind != "Transpose":
            continue
        inner = ed.nodes[node.inputs[0]]
        if inner.kind != "Transpose":
            continue
        p, q = inner.params["perm"], node.params["perm"]
        if all(p[q[i]] == i for i in range(len(q))):
            target = inner.inputs[0]
            ed.replace_uses(nid, target)
            ed.remove(nid)
            if ed.use_count(inner.id) == 0:
                ed.remove(inner.id)
            ed.trace("layout.cancel_transpose", {nid, inner.id}, {target})
