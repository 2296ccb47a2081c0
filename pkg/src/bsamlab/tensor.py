"""Flat float64 storage types: tensors, parameter vectors, batches.

All numeric state lives in contiguous float64 numpy arrays. ParamVector is
the single currency between models, optimizers and probes: one flat vector
plus a layout that maps segments back to named layer pieces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVectorError, ShapeError


def _as_f64(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    return arr


@dataclass
class Tensor:
    """Dense row-major float64 tensor."""

    shape: tuple
    data: np.ndarray

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.data = _as_f64(self.data).reshape(-1)
        if any(s <= 0 for s in self.shape):
            raise ShapeError(f"non-positive dimension in shape {self.shape}")
        if self.data.size != math.prod(self.shape):
            raise ShapeError(
                f"data length {self.data.size} does not match shape {self.shape}"
            )

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        arr = _as_f64(arr)
        return cls(arr.shape, arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.data.reshape(self.shape)


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: tuple


@dataclass
class ParamVector:
    """Flat trainable-parameter vector with a named segment layout.

    Segments tile [0, len) exactly; unflatten(flatten(p)) is the identity.
    """

    values: np.ndarray
    layout: tuple

    def __post_init__(self):
        self.values = _as_f64(self.values).reshape(-1)
        self.layout = tuple(
            seg if isinstance(seg, Segment) else Segment(seg[0], int(seg[1]), tuple(seg[2]))
            for seg in self.layout
        )
        pos = 0
        for seg in self.layout:
            if seg.offset != pos:
                raise ShapeError(f"segment {seg.name!r} at offset {seg.offset}, expected {pos}")
            pos += math.prod(seg.shape)
        if pos != self.values.size:
            raise ShapeError(f"layout covers {pos} values, vector has {self.values.size}")

    def __len__(self) -> int:
        return self.values.size

    def segment(self, name: str) -> np.ndarray:
        for seg in self.layout:
            if seg.name == name:
                n = math.prod(seg.shape)
                return self.values[seg.offset : seg.offset + n].reshape(seg.shape)
        raise KeyError(name)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def like(self, values: np.ndarray) -> "ParamVector":
        """New vector with this layout around the given flat values."""
        return ParamVector(values, self.layout)

    def zeros_like(self) -> "ParamVector":
        return self.like(np.zeros(self.values.size))

    def unflatten(self) -> dict:
        return {seg.name: self.segment(seg.name) for seg in self.layout}


def flatten(named: dict, layout) -> ParamVector:
    """Inverse of ParamVector.unflatten for the given layout."""
    out = np.empty(sum(math.prod(s.shape) for s in layout))
    for seg in layout:
        n = math.prod(seg.shape)
        out[seg.offset : seg.offset + n] = _as_f64(named[seg.name]).reshape(-1)
    return ParamVector(out, layout)


@dataclass
class Batch:
    """Mini-batch of features (b, d) and integer labels in [0, C)."""

    features: Tensor
    labels: np.ndarray

    def __post_init__(self):
        if len(self.features.shape) != 2:
            raise ShapeError(f"batch features must be rank 2, got {self.features.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] != self.labels.size:
            raise ShapeError(
                f"{self.features.shape[0]} feature rows vs {self.labels.size} labels"
            )
        if self.features.shape[0] < 1:
            raise ShapeError("empty batch")

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass
class PassCounter:
    """Counts forward/backward evaluations charged to a training run."""

    fwd: int = 0
    bwd: int = 0


def l2_norm(v: ParamVector) -> float:
    return float(np.linalg.norm(v.values))


def cosine_similarity(u: ParamVector, v: ParamVector) -> float:
    nu = np.linalg.norm(u.values)
    nv = np.linalg.norm(v.values)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero vector is undefined")
    c = float(np.dot(u.values, v.values) / (nu * nv))
    return min(1.0, max(-1.0, c))
