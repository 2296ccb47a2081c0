"""Loss and gradient evaluation for every landscape kind.

MLP losses run through the selected kernel backend (reverse-mode backward
pass over a fresh forward tape each call); analytic landscapes use their
closed-form gradients. A central-difference oracle is provided for tests.
Evaluations are pure; pass counts are charged to an explicit PassCounter.
"""
from __future__ import annotations

import numpy as np

from . import kernels, models
from .errors import RangeError, ShapeError
from .models import ModelSpec
from .tensor import Batch, ParamVector, PassCounter


def _check_mlp_inputs(params: ParamVector, batch: Batch, spec: ModelSpec):
    if len(params) != spec.dim:
        raise ShapeError(f"parameter dim {len(params)} vs spec dim {spec.dim}")
    if batch.features.shape[1] != spec.input_dim:
        raise ShapeError(
            f"batch feature dim {batch.features.shape[1]} vs model input {spec.input_dim}"
        )
    if batch.labels.min() < 0 or batch.labels.max() >= spec.classes:
        raise ShapeError(f"labels outside [0, {spec.classes})")


def _analytic_loss_grad(params: ParamVector, batch, spec: ModelSpec):
    if spec.kind == models.QUADRATIC:
        loss, g = models.quadratic_loss(params, spec), models.quadratic_grad(params, spec)
    else:
        loss, g = models.double_well_loss(params, spec), models.double_well_grad(params, spec)
    if batch is not None:
        xi = batch.features.as_array()
        if xi.shape != (1, len(params)):
            raise ShapeError(f"tilt shape {xi.shape} vs parameter dim {len(params)}")
        loss = loss + float(xi[0] @ params.values)
        g = g + xi[0]
    return loss, g


def forward_loss(params: ParamVector, batch, spec: ModelSpec,
                 counter: PassCounter | None = None) -> float:
    if counter is not None:
        counter.fwd += 1
    if spec.kind == models.MLP:
        _check_mlp_inputs(params, batch, spec)
        return kernels.mlp_loss(params.values, spec.layers,
                                batch.features.as_array(), batch.labels)
    return _analytic_loss_grad(params, batch, spec)[0]


def grad(params: ParamVector, batch, spec: ModelSpec,
         counter: PassCounter | None = None):
    """Returns (loss, gradient). Charges one forward and one backward pass."""
    if counter is not None:
        counter.fwd += 1
        counter.bwd += 1
    if spec.kind == models.MLP:
        _check_mlp_inputs(params, batch, spec)
        loss, g = kernels.mlp_loss_grad(params.values, spec.layers,
                                        batch.features.as_array(), batch.labels)
    else:
        loss, g = _analytic_loss_grad(params, batch, spec)
    return loss, params.like(np.asarray(g))


def finite_difference_gradient(params: ParamVector, batch, spec: ModelSpec,
                               h: float) -> ParamVector:
    """Central-difference gradient oracle, one coordinate at a time."""
    if h <= 0:
        raise RangeError(f"finite-difference step must be positive, got {h}")
    out = np.empty(len(params))
    work = params.copy()
    for i in range(len(params)):
        orig = work.values[i]
        work.values[i] = orig + h
        lp = forward_loss(work, batch, spec)
        work.values[i] = orig - h
        lm = forward_loss(work, batch, spec)
        work.values[i] = orig
        out[i] = (lp - lm) / (2.0 * h)
    return params.like(out)
