"""Semantic features, clustering and diversity-aware test ordering."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from ..graph.ops import OPERATORS
from ..graph.types import DType
from .records import MAX_RANK, RECORD_KINDS, OperatorInstanceRecord

BUCKETS = 16
MAX_INPUTS = 3
PARAM_NAMES = tuple(sorted({p.name for k in RECORD_KINDS for p in OPERATORS[k].params}))
DTYPES = tuple(DType)


def param_bucket(name: str, value) -> int:
    """Stable 16-way hash bucket of one parameter value."""
    if isinstance(value, DType):
        value = value.value
    if isinstance(value, tuple):
        value = list(value)
    key = f"{name}={json.dumps(value, sort_keys=True)}"
    return zlib.crc32(key.encode()) % BUCKETS


def _slices():
    out, pos = {}, 0
    for name, width in (("kind", len(RECORD_KINDS)), ("params", len(PARAM_NAMES) * BUCKETS),
                        ("ranks", MAX_INPUTS * (MAX_RANK + 1)),
                        ("dtypes", MAX_INPUTS * len(DTYPES))):
        out[name] = slice(pos, pos + width)
        pos += width
    return out, pos


SLICES, FEATURE_LEN = _slices()


def feature_vector(r: OperatorInstanceRecord) -> np.ndarray:
    """0/1 vector: kind one-hot, per-parameter bucket one-hot, input ranks, dtypes."""
    v = np.zeros(FEATURE_LEN, np.uint8)
    v[SLICES["kind"].start + RECORD_KINDS.index(r.kind)] = 1
    base = SLICES["params"].start
    for name, value in r.params.items():
        v[base + PARAM_NAMES.index(name) * BUCKETS + param_bucket(name, value)] = 1
    base = SLICES["ranks"].start
    for k, spec in enumerate(r.inputs[:MAX_INPUTS]):
        v[base + k * (MAX_RANK + 1) + len(spec.shape)] = 1
    base = SLICES["dtypes"].start
    for k, spec in enumerate(r.inputs[:MAX_INPUTS]):
        v[base + k * len(DTYPES) + DTYPES.index(spec.dtype)] = 1
    return v


def signature(r: OperatorInstanceRecord) -> tuple:
    """Clustering key: kind, parameter buckets, input ranks and dtypes."""
    buckets = tuple(sorted((n, param_bucket(n, v)) for n, v in r.params.items()))
    ranks = tuple(sorted((len(s.shape), s.dtype.value) for s in r.inputs))
    return (r.kind, buckets, ranks)


@dataclass
class Cluster:
    signature: tuple  # feature vector of the cluster's first member
    key: tuple
    members: list[int]

    def __len__(self):
        return len(self.members)


def cluster_instances(records: Sequence[OperatorInstanceRecord],
                      distance_threshold: float = 0.0) -> list[Cluster]:
    """Partition records by signature; a positive threshold merges clusters
    whose representatives lie within that normalized Hamming distance
    (single linkage)."""
    if not records:
        raise ValueError("cannot cluster an empty record list")
    groups: dict[tuple, list[int]] = {}
    for i, r in enumerate(records):
        groups.setdefault(signature(r), []).append(i)
    keys = list(groups)
    if distance_threshold > 0 and len(keys) > 1:
        reps = np.array([feature_vector(records[groups[k][0]]) for k in keys], bool)
        labels = fcluster(linkage(reps, method="single", metric="hamming"),
                          t=distance_threshold, criterion="distance")
        merged: dict[int, list[int]] = {}
        for k, lab in zip(keys, labels):
            merged.setdefault(int(lab), []).extend(groups[k])
        parts = sorted((sorted(m) for m in merged.values()), key=lambda m: m[0])
    else:
        parts = [groups[k] for k in keys]
    return [Cluster(tuple(int(x) for x in feature_vector(records[m[0]])),
                    signature(records[m[0]]), list(m)) for m in parts]


def prioritize(clusters: Sequence[Cluster], rng_seed: int) -> list[int]:
    """Round-robin over clusters, largest first; members shuffled per cluster."""
    rng = np.random.default_rng(rng_seed)
    ordered = sorted(clusters, key=lambda c: (-len(c), c.members[0]))
    queues = []
    for c in ordered:
        members = list(c.members)
        rng.shuffle(members)
        queues.append(members)
    out: list[int] = []
    depth = 0
    while len(out) < sum(len(q) for q in queues):
        for q in queues:
            if depth < len(q):
                out.append(q[depth])
        depth += 1
    return out


def random_order(n: int, rng_seed: int) -> list[int]:
    return [int(i) for i in np.random.default_rng(rng_seed).permutation(n)]


def fifo_order(n: int) -> list[int]:
    return list(range(n))


def order_records(records, order: str, rng_seed: int, distance_threshold: float = 0.0):
    if order == "diversity":
        return prioritize(cluster_instances(records, distance_threshold), rng_seed)
    if order == "random":
        return random_order(len(records), rng_seed)
    if order == "fifo":
        return fifo_order(len(records))
    raise ValueError(f"unknown order {order!r}")
