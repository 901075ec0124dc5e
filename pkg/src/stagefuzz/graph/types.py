"""Tensor element types, tensor types and concrete tensor values."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

MAX_RANK = 5


class DType(enum.Enum):
    F32 = "F32"
    I32 = "I32"
    I8 = "I8"
    BOOL = "BOOL"

    @property
    def np(self) -> np.dtype:
        return _NP_DTYPES[self]

    @property
    def is_int(self) -> bool:
        return self in (DType.I32, DType.I8)

    @property
    def is_numeric(self) -> bool:
        return self is not DType.BOOL

    @property
    def bits(self) -> int:
        return {DType.F32: 32, DType.I32: 32, DType.I8: 8, DType.BOOL: 1}[self]

    @classmethod
    def parse(cls, text: str) -> "DType":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown dtype {text!r}") from None

    def __str__(self) -> str:
        return self.value


_NP_DTYPES = {
    DType.F32: np.dtype(np.float32),
    DType.I32: np.dtype(np.int32),
    DType.I8: np.dtype(np.int8),
    DType.BOOL: np.dtype(np.bool_),
}

INT_RANGE = {DType.I32: (-(2**31), 2**31 - 1), DType.I8: (-128, 127)}


def wrap_int(value: int, dtype: DType) -> int:
    """Two's-complement wrap of a Python int into ``dtype``."""
    bits = dtype.bits
    half = 1 << (bits - 1)
    return ((value + half) % (1 << bits)) - half


@dataclass(frozen=True)
class TensorType:
    dtype: DType
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if len(self.shape) > MAX_RANK:
            raise ValueError(f"rank {len(self.shape)} exceeds {MAX_RANK}")
        if any(d < 0 for d in self.shape):
            raise ValueError(f"negative extent in {self.shape}")

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def __str__(self) -> str:
        return f"{self.dtype.value}[{','.join(map(str, self.shape))}]"


class TensorValue:
    """A typed tensor with row-major data held as a numpy array."""

    __slots__ = ("ttype", "data")

    def __init__(self, ttype: TensorType, data):
        arr = np.asarray(data, dtype=ttype.dtype.np)
        if arr.size != ttype.size:
            raise ValueError(f"{arr.size} elements for type {ttype}")
        self.ttype = ttype
        self.data = arr.reshape(ttype.shape)
        self.data.flags.writeable = False

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "TensorValue":
        arr = np.asarray(arr)
        for dt, npdt in _NP_DTYPES.items():
            if arr.dtype == npdt:
                return cls(TensorType(dt, arr.shape), arr)
        raise TypeError(f"unsupported array dtype {arr.dtype}")

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, TensorValue):
            return NotImplemented
        return self.ttype == other.ttype and np.array_equal(
            self.data, other.data, equal_nan=self.ttype.dtype is DType.F32
        )

    def __repr__(self):
        return f"TensorValue({self.ttype}, {self.flat.tolist()})"


def random_tensor(ttype: TensorType, rng: np.random.Generator) -> TensorValue:
    """Draw test data for ``ttype``.

    Integer tensors use the full I8 range and a wide I32 range so that
    wrap-around semantics are exercised.
    """
    n = ttype.size
    dt = ttype.dtype
    if dt is DType.F32:
        data = rng.uniform(-4.0, 4.0, n).astype(np.float32)
    elif dt is DType.I8:
        data = rng.integers(-128, 128, n)
    elif dt is DType.I32:
        data = rng.integers(-(2**20), 2**20, n)
    else:
        data = rng.integers(0, 2, n).astype(bool)
    return TensorValue(ttype, data)
