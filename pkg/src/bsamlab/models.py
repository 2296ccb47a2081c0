"""Model family: small MLP classifiers plus analytic test landscapes.

The two analytic landscapes have known curvature and serve as ground-truth
fixtures: a PSD quadratic bowl, and a one-dimensional double well with one
sharp and one flat minimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .kernels import param_count
from .rng import stream
from .tensor import Batch, ParamVector, Segment, Tensor

MLP = "mlp"
QUADRATIC = "quadratic"
DOUBLE_WELL = "double_well"


@dataclass
class ModelSpec:
    kind: str
    # mlp
    layers: tuple = ()
    classes: int = 0
    # quadratic: L = 0.5 (w - w*)^T H (w - w*)
    h: np.ndarray = None
    w_star: np.ndarray = None
    # double well: minima at a (curvature kappa_sharp) and b (kappa_flat)
    a: float = 0.0
    b: float = 0.0
    kappa_sharp: float = 0.0
    kappa_flat: float = 0.0

    @property
    def dim(self) -> int:
        if self.kind == MLP:
            return param_count(self.layers)
        if self.kind == QUADRATIC:
            return self.h.shape[0]
        return 1

    @property
    def input_dim(self) -> int:
        return self.layers[0]


def mlp_spec(layer_sizes, classes: int) -> ModelSpec:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigError(f"MLP needs at least 2 layers, got {sizes}")
    if classes < 2:
        raise ConfigError(f"need at least 2 classes, got {classes}")
    if sizes[-1] != classes:
        raise ConfigError(f"last layer size {sizes[-1]} must equal class count {classes}")
    if any(s < 1 for s in sizes):
        raise ConfigError(f"non-positive layer size in {sizes}")
    return ModelSpec(kind=MLP, layers=sizes, classes=classes)


def quadratic_spec(h, w_star=None) -> ModelSpec:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigError(f"H must be square, got shape {h.shape}")
    if h.shape[0] > 50:
        raise ConfigError("quadratic fixture capped at dimension 50")
    if np.max(np.abs(h - h.T)) > 1e-12:
        raise ConfigError("H must be symmetric within 1e-12")
    if np.linalg.eigvalsh(h).min() < -1e-10:
        raise ConfigError("H must be positive semidefinite")
    if w_star is None:
        w_star = np.zeros(h.shape[0])
    w_star = np.asarray(w_star, dtype=np.float64).reshape(-1)
    if w_star.size != h.shape[0]:
        raise ConfigError("w* dimension does not match H")
    return ModelSpec(kind=QUADRATIC, h=h, w_star=w_star)


def double_well_spec(a: float, b: float, kappa_sharp: float, kappa_flat: float) -> ModelSpec:
    if not a < b:
        raise ConfigError("sharp minimum a must lie left of flat minimum b")
    if kappa_flat <= 0 or kappa_sharp <= 0:
        raise ConfigError("curvatures must be positive")
    if kappa_sharp / kappa_flat < 10:
        raise ConfigError("fixture contract: kappa_sharp / kappa_flat >= 10")
    return ModelSpec(
        kind=DOUBLE_WELL, a=float(a), b=float(b),
        kappa_sharp=float(kappa_sharp), kappa_flat=float(kappa_flat),
    )


def mlp_layout(sizes) -> tuple:
    segs = []
    pos = 0
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        segs.append(Segment(f"w{i}", pos, (fan_in, fan_out)))
        pos += fan_in * fan_out
        segs.append(Segment(f"b{i}", pos, (fan_out,)))
        pos += fan_out
    return tuple(segs)


def scalar_layout(dim: int) -> tuple:
    return (Segment("w", 0, (dim,)),)


def build_mlp(layer_sizes, classes: int, seed: int):
    """Seeded uniform init scaled by 1/sqrt(fan_in); biases zero."""
    spec = mlp_spec(layer_sizes, classes)
    rng = stream(seed, "mlp-init")
    theta = np.zeros(param_count(spec.layers))
    params = ParamVector(theta, mlp_layout(spec.layers))
    for i in range(len(spec.layers) - 1):
        fan_in, fan_out = spec.layers[i], spec.layers[i + 1]
        params.segment(f"w{i}")[...] = rng.uniform(-1.0, 1.0, (fan_in, fan_out)) / math.sqrt(fan_in)
    return params, spec


def init_params(spec: ModelSpec, seed: int) -> ParamVector:
    """Initial parameters for any landscape kind."""
    if spec.kind == MLP:
        params, _ = build_mlp(spec.layers, spec.classes, seed)
        return params
    rng = stream(seed, "landscape-init")
    return ParamVector(rng.uniform(-1.0, 1.0, spec.dim), scalar_layout(spec.dim))


def quadratic_loss(w: ParamVector, spec: ModelSpec) -> float:
    if len(w) != spec.h.shape[0]:
        raise ShapeError(f"parameter dim {len(w)} vs H dim {spec.h.shape[0]}")
    d = w.values - spec.w_star
    return float(0.5 * d @ spec.h @ d)


def quadratic_grad(w: ParamVector, spec: ModelSpec) -> np.ndarray:
    if len(w) != spec.h.shape[0]:
        raise ShapeError(f"parameter dim {len(w)} vs H dim {spec.h.shape[0]}")
    return spec.h @ (w.values - spec.w_star)


# The double well is two quadratic bowls 0.5*kappa*(w-m)^2 blended over [a, b]
# by the 7th-order smoothstep s(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7. Its first
# three derivatives vanish at u=0 and u=1, so each minimum keeps exactly its
# bowl's curvature (and central-difference curvature probes see no blend
# leakage), the function is C^3, and it is a pure bowl outside [a, b].
def _smoothstep(u: float):
    s = u ** 4 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))
    ds = 140.0 * (u * (1.0 - u)) ** 3
    return s, ds


def _dw_eval(w: float, spec: ModelSpec):
    a, b = spec.a, spec.b
    ks, kf = spec.kappa_sharp, spec.kappa_flat
    fs = 0.5 * ks * (w - a) ** 2
    dfs = ks * (w - a)
    ff = 0.5 * kf * (w - b) ** 2
    dff = kf * (w - b)
    if w <= a:
        return fs, dfs
    if w >= b:
        return ff, dff
    u = (w - a) / (b - a)
    s, ds = _smoothstep(u)
    ds /= (b - a)
    loss = (1.0 - s) * fs + s * ff
    dloss = -ds * fs + (1.0 - s) * dfs + ds * ff + s * dff
    return loss, dloss


def double_well_loss(w: ParamVector, spec: ModelSpec) -> float:
    if len(w) != 1:
        raise ShapeError(f"double well is one-dimensional, got dim {len(w)}")
    return _dw_eval(float(w.values[0]), spec)[0]


def double_well_grad(w: ParamVector, spec: ModelSpec) -> np.ndarray:
    if len(w) != 1:
        raise ShapeError(f"double well is one-dimensional, got dim {len(w)}")
    return np.array([_dw_eval(float(w.values[0]), spec)[1]])


def tilt_batch(xi: np.ndarray) -> Batch:
    """Per-step stochastic tilt for analytic landscapes.

    A batch for an analytic landscape carries one feature row xi that adds
    xi . w to the loss (hence xi to the gradient). Sharing one tilt across
    the evaluations of a step mirrors sharing one data mini-batch.
    """
    xi = np.asarray(xi, dtype=np.float64).reshape(1, -1)
    return Batch(Tensor.from_array(xi), np.zeros(1, dtype=np.int64))
