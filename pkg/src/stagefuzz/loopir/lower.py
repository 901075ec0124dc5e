"""Lowering from the graph IR to loop programs: one nest per node."""

from __future__ import annotations

import re

from ..errors import LoweringUnsupported
from ..graph.ir import Graph, Node
from ..graph.ops import conv_pads, normalize_axis
from ..graph.types import DType
from .ir import (SERIAL, Alloc, Bin, Buffer, Cast, Cmp, Const, For, If, Load, LoopProgram, Seq,
                 Store, Un, Var, add, mul, sub)

_BIN = {"Add": "+", "Sub": "-", "Mul": "*", "Div": "/"}
_RESERVED = re.compile(r"^(t|out|acc)\d+$")


def zero(dtype: DType) -> Const:
    if dtype is DType.F32:
        return Const(0.0, dtype)
    if dtype is DType.BOOL:
        return Const(False, dtype)
    return Const(0, dtype)


def apply_op(kind: str, args: list, dtype: DType):
    """Scalar expression for one elementwise operator."""
    if kind in _BIN:
        return Bin(_BIN[kind], args[0], args[1])
    if kind == "Neg":
        return Un("neg", args[0])
    if kind == "ReLU":
        return Bin("max", args[0], zero(dtype))
    if kind == "Sigmoid":
        return Un("sigmoid", args[0])
    raise LoweringUnsupported(f"{kind} is not elementwise")


class _Lowerer:
    def __init__(self, g: Graph):
        self.g = g
        self.nvar = 0
        names = {n.params["name"] for n in g.input_nodes()}
        self.prefix = ""
        while any(_RESERVED.match(nm[len(self.prefix):]) and nm.startswith(self.prefix)
                  for nm in names):
            self.prefix += "_"

    def var(self) -> str:
        self.nvar += 1
        return f"i{self.nvar - 1}"

    def buf(self, nid: int) -> str:
        node = self.g.nodes[nid]
        if node.kind == "Input":
            return node.params["name"]
        return f"{self.prefix}t{nid}"

    def shape(self, nid: int) -> tuple:
        return self.g.nodes[nid].out_type.shape

    def nest(self, shape, body_fn) -> list:
        """Loops over ``shape`` (row-major) around ``body_fn(vars)``."""
        vs = [self.var() for _ in shape]
        inner = Seq(tuple(body_fn(vs)))
        for v, ext in reversed(list(zip(vs, shape))):
            inner = Seq((For(v, Const(0), Const(ext), SERIAL, inner),))
        return list(inner.stmts)

    def operand(self, nid: int, out_shape, vs) -> Load:
        """Broadcasting load of ``nid`` at output position ``vs``."""
        shape = self.shape(nid)
        off = len(out_shape) - len(shape)
        index = tuple(Const(0) if d == 1 and out_shape[off + j] != 1 else Var(vs[off + j])
                      for j, d in enumerate(shape))
        return Load(self.buf(nid), index)

    # ------------------------------------------------------------------
    def lower_node(self, node: Node) -> list:
        kind, out = node.kind, self.buf(node.id)
        shape, dtype = node.out_type.shape, node.out_type.dtype
        ins = node.inputs
        if kind == "Constant":
            return [Store(out, (Const(f),), Const(v, dtype)) for f, v in enumerate(node.data)]
        if kind in _BIN or kind in ("Neg", "ReLU", "Sigmoid"):
            in_dtype = self.g.nodes[ins[0]].out_type.dtype
            return self.nest(shape, lambda vs: [Store(out, tuple(map(Var, vs)), apply_op(
                kind, [self.operand(s, shape, vs) for s in ins], in_dtype))])
        if kind == "FusedGroup":
            return self.nest(shape, lambda vs: [Store(out, tuple(map(Var, vs)),
                                                      self.fused_expr(node, vs))])
        if kind == "Cast":
            return self.nest(shape, lambda vs: [Store(out, tuple(map(Var, vs)), Cast(
                node.params["to"], self.operand(ins[0], shape, vs)))])
        if kind == "MatMul":
            return self.matmul(node)
        if kind == "Conv2D":
            return self.conv(node)
        if kind == "Reshape":
            src = self.buf(ins[0])
            return self.nest((node.out_type.size,), lambda vs: [
                Store(out, (Var(vs[0]),), Load(src, (Var(vs[0]),)))])
        if kind == "Transpose":
            perm = node.params["perm"]
            src = self.buf(ins[0])

            def body(vs):
                index = [None] * len(perm)
                for j, d in enumerate(perm):
                    index[d] = Var(vs[j])
                return [Store(out, tuple(map(Var, vs)), Load(src, tuple(index)))]
            return self.nest(shape, body)
        if kind == "Concat":
            axis = normalize_axis(node.params["axis"], len(shape))
            stmts, offset = [], 0
            for s in ins:
                src, sshape, base = self.buf(s), self.shape(s), offset

                def body(vs, src=src, base=base):
                    index = [Var(v) for v in vs]
                    index[axis] = add(index[axis], base)
                    return [Store(out, tuple(index), Load(src, tuple(map(Var, vs))))]
                stmts += self.nest(sshape, body)
                offset += sshape[axis]
            return stmts
        if kind == "ReduceSum":
            return self.reduce(node)
        if kind == "Pad":
            pads = node.params["pads"]
            src = self.buf(ins[0])
            fill = self.nest(shape, lambda vs: [Store(out, tuple(map(Var, vs)), zero(dtype))])
            copy = self.nest(self.shape(ins[0]), lambda vs: [Store(
                out, tuple(add(v, pads[2 * k]) for k, v in enumerate(vs)),
                Load(src, tuple(map(Var, vs))))])
            return fill + copy
        raise LoweringUnsupported(f"no lowering for {kind}")

    def fused_expr(self, node: Node, vs):
        shape = node.out_type.shape
        dtype = self.g.nodes[node.inputs[0]].out_type.dtype
        temps = []
        for op, refs in node.params["body"]:
            args = [self.operand(node.inputs[int(r[1:])], shape, vs) if r[0] == "i"
                    else temps[int(r[1:])] for r in refs]
            temps.append(apply_op(op, args, dtype))
        return temps[-1]

    def accumulate(self, acc: str, dtype: DType, loops: list, term, guard=()) -> list:
        """``acc = 0; for ...: acc += term``; returns the statements."""
        update = Store(acc, (Const(0),), Bin("+", Load(acc, (Const(0),)), term))
        inner = Seq((If(tuple(guard), Seq((update,))),)) if guard else Seq((update,))
        for v, ext in reversed(loops):
            inner = Seq((For(v, Const(0), Const(ext), SERIAL, inner),))
        return [Alloc(Buffer(acc, dtype, (1,)), "local"),
                Store(acc, (Const(0),), zero(dtype)), *inner.stmts]

    def matmul(self, node: Node) -> list:
        a, b = (self.buf(s) for s in node.inputs)
        kdim = self.shape(node.inputs[0])[1]
        out, dtype = self.buf(node.id), node.out_type.dtype
        acc = f"{self.prefix}acc{node.id}"

        def body(vs):
            i, j = vs
            k = self.var()
            term = Bin("*", Load(a, (Var(i), Var(k))), Load(b, (Var(k), Var(j))))
            return self.accumulate(acc, dtype, [(k, kdim)], term) + [
                Store(out, (Var(i), Var(j)), Load(acc, (Const(0),)))]
        return self.nest(node.out_type.shape, body)

    def conv(self, node: Node) -> list:
        x, w = node.inputs
        xb, wb = self.buf(x), self.buf(w)
        nhwc = node.params["layout"] == "NHWC"
        xs = self.shape(x)
        c, h, wd = (xs[3], xs[1], xs[2]) if nhwc else xs[1:]
        _, _, kh, kw = self.shape(w)
        sh, sw = node.params["stride"]
        top, left, _, _ = conv_pads(node.params["pad"])
        out, dtype = self.buf(node.id), node.out_type.dtype
        oshape = node.out_type.shape
        oh, ow = (oshape[1], oshape[2]) if nhwc else oshape[2:]
        acc = f"{self.prefix}acc{node.id}"

        def body(vs):
            if nhwc:
                n, y, xo, o = vs
            else:
                n, o, y, xo = vs
            ci, ki, kj = self.var(), self.var(), self.var()
            ih = sub(add(mul(Var(y), sh), Var(ki)), top)
            iw = sub(add(mul(Var(xo), sw), Var(kj)), left)
            guard = []
            if top > 0:
                guard.append(Cmp(">=", ih, Const(0)))
            if (oh - 1) * sh + kh - 1 - top >= h:
                guard.append(Cmp("<", ih, Const(h)))
            if left > 0:
                guard.append(Cmp(">=", iw, Const(0)))
            if (ow - 1) * sw + kw - 1 - left >= wd:
                guard.append(Cmp("<", iw, Const(wd)))
            xi = (Var(n), ih, iw, Var(ci)) if nhwc else (Var(n), Var(ci), ih, iw)
            term = Bin("*", Load(xb, xi), Load(wb, (Var(o), Var(ci), Var(ki), Var(kj))))
            return self.accumulate(acc, dtype, [(ci, c), (ki, kh), (kj, kw)], term, guard) + [
                Store(out, tuple(map(Var, vs)), Load(acc, (Const(0),)))]
        return self.nest(oshape, body)

    def reduce(self, node: Node) -> list:
        src = node.inputs[0]
        xshape = self.shape(src)
        rank = len(xshape)
        axes = sorted(normalize_axis(a, rank) for a in node.params["axes"])
        kept = [d for d in range(rank) if d not in axes]
        keep = node.params["keepdims"]
        out, dtype = self.buf(node.id), node.out_type.dtype
        acc = f"{self.prefix}acc{node.id}"

        def body(vs):
            rvars = [self.var() for _ in axes]
            index: list = [None] * rank
            for d, v in zip(kept, vs):
                index[d] = Var(v)
            for d, v in zip(axes, rvars):
                index[d] = Var(v)
            term = Load(self.buf(src), tuple(index))
            if keep:
                oidx = [Const(0)] * rank
                for d, v in zip(kept, vs):
                    oidx[d] = Var(v)
            else:
                oidx = [Var(v) for v in vs]
            return self.accumulate(acc, dtype, [(v, xshape[d]) for d, v in zip(axes, rvars)],
                                   term) + [Store(out, tuple(oidx), Load(acc, (Const(0),)))]
        return self.nest(tuple(xshape[d] for d in kept), body)


def lower_graph(g: Graph) -> LoopProgram:
    """Lower a valid graph; each non-leaf node becomes one loop nest.

    Intermediate tensors live in global buffers ``t<id>``; the k-th graph
    output is copied into ``out<k>``.
    """
    lw = _Lowerer(g)
    for node in g.nodes.values():
        if any(d == 0 for d in node.out_type.shape):
            raise LoweringUnsupported(f"node {node.id} has a zero-sized extent")
    order = g.topo_order()
    inputs = tuple(Buffer(g.nodes[n].params["name"], g.nodes[n].out_type.dtype,
                          g.nodes[n].out_type.shape)
                   for n in sorted(order) if g.nodes[n].kind == "Input")
    stmts: list = []
    for nid in order:
        node = g.nodes[nid]
        if node.kind != "Input":
            stmts.append(Alloc(Buffer(lw.buf(nid), node.out_type.dtype, node.out_type.shape)))
    for nid in order:
        node = g.nodes[nid]
        if node.kind != "Input":
            stmts += lw.lower_node(node)
    outputs = []
    for k, o in enumerate(g.outputs):
        t = g.nodes[o].out_type
        name = f"{lw.prefix}out{k}"
        outputs.append(Buffer(name, t.dtype, t.shape))
        src = lw.buf(o)
        stmts += lw.nest(t.shape, lambda vs, src=src, name=name: [
            Store(name, tuple(map(Var, vs)), Load(src, tuple(map(Var, vs))))])
    return LoopProgram(g.name, inputs, tuple(outputs), Seq(tuple(stmts)))
