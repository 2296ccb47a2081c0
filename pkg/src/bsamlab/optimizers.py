"""Step rules: SGD with momentum, SAM, and bilateral SAM (BSAM).

All three variants share one base update: a composite gradient (plus L2
weight decay applied once) is fed through a momentum buffer and a cosine
learning-rate schedule. They differ only in how the composite gradient is
assembled:

    SGD   g
    SAM   g_max,  the gradient at the ascent-perturbed point w + eps_max
    BSAM  g + g_max - (|g_max|/|g_min|) * g_min,  where g_min is the
          gradient at the descent-perturbed point w + eps_min

The descent radius rho_min is tied linearly to the current learning rate,
shrinking it late in training to avoid the gradient-conflict regime where
g and g_min point in opposite directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import grad
from .errors import ConfigError, RangeError
from .models import ModelSpec
from .tensor import ParamVector, PassCounter, l2_norm

ASCENT = "ascent"
DESCENT = "descent"

SGD = "sgd"
SAM = "sam"
BSAM = "bsam"
VARIANTS = (SGD, SAM, BSAM)


@dataclass
class LrSchedule:
    lr_max: float
    lr_min: float
    total_steps: int

    def __post_init__(self):
        if not (self.lr_max >= self.lr_min >= 0.0):
            raise ConfigError(f"need lr_max >= lr_min >= 0, got {self.lr_max}, {self.lr_min}")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")


@dataclass
class RhoMinSchedule:
    rho_hat: float    # value at lr_max
    rho_check: float  # value at lr_min

    def __post_init__(self):
        if not (self.rho_hat >= self.rho_check >= 0.0):
            raise ConfigError(
                f"need rho_hat >= rho_check >= 0, got {self.rho_hat}, {self.rho_check}"
            )


def cosine_lr(t: int, lrs: LrSchedule) -> float:
    if t < 0 or t > lrs.total_steps:
        raise RangeError(f"step {t} outside [0, {lrs.total_steps}]")
    return lrs.lr_min + 0.5 * (lrs.lr_max - lrs.lr_min) * (
        1.0 + math.cos(math.pi * t / lrs.total_steps)
    )


def rho_min_at(lr_t: float, sched: RhoMinSchedule, lrs: LrSchedule) -> float:
    if lr_t < lrs.lr_min - 1e-12 or lr_t > lrs.lr_max + 1e-12:
        raise RangeError(f"lr {lr_t} outside [{lrs.lr_min}, {lrs.lr_max}]")
    if lrs.lr_max == lrs.lr_min:
        return sched.rho_hat
    rho = sched.rho_check + (sched.rho_hat - sched.rho_check) * (
        (lr_t - lrs.lr_min) / (lrs.lr_max - lrs.lr_min)
    )
    return min(sched.rho_hat, max(sched.rho_check, rho))


def compute_perturbation(g: ParamVector, rho: float, direction: str,
                         p: float = 2.0, zero_grad_eps: float = 1e-12) -> ParamVector:
    """Closed-form extremizer of the linearized loss over the dual-norm ball.

    For p = 2 this is +-rho * g/|g|. For general p > 1 (1/p + 1/q = 1) it is
    +-rho * sign(g)|g|^(p-1) / (|g|_p^p)^(1/q), the maximizer of s.g over
    |s|_q <= rho. Ascent takes +, descent takes -.
    """
    if p <= 1.0:
        raise ConfigError(f"p-norm exponent must exceed 1, got {p}")
    if direction not in (ASCENT, DESCENT):
        raise ConfigError(f"direction must be ascent or descent, got {direction!r}")
    v = g.values
    if rho == 0.0 or np.linalg.norm(v) <= zero_grad_eps:
        return g.zeros_like()
    if p == 2.0:
        eps = rho * v / np.linalg.norm(v)
    else:
        q = p / (p - 1.0)
        norm_p_p = float(np.sum(np.abs(v) ** p))
        eps = rho * np.sign(v) * np.abs(v) ** (p - 1.0) / norm_p_p ** (1.0 / q)
    if direction == DESCENT:
        eps = -eps
    return g.like(eps)


def scale_factor(g_max: ParamVector, g_min: ParamVector,
                 zero_grad_eps: float = 1e-12) -> float:
    """|g_max| / |g_min|, or 0 when g_min is degenerate (drops the term)."""
    n_min = l2_norm(g_min)
    if n_min <= zero_grad_eps:
        return 0.0
    return l2_norm(g_max) / n_min


@dataclass
class OptimizerState:
    variant: str
    momentum_buf: ParamVector
    lr_sched: LrSchedule
    rho_min_sched: RhoMinSchedule
    t: int = 0
    momentum: float = 0.9
    weight_decay: float = 0.001
    rho_max: float = 0.05
    p_norm: float = 2.0
    zero_grad_eps: float = 1e-12

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown optimizer variant {self.variant!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise ConfigError("weight_decay must be >= 0")
        if self.rho_max < 0.0:
            raise ConfigError("rho_max must be >= 0")


def make_state(variant: str, params: ParamVector, lr_sched: LrSchedule,
               rho_min_sched: RhoMinSchedule | None = None, **kw) -> OptimizerState:
    return OptimizerState(
        variant=variant,
        momentum_buf=params.zeros_like(),
        lr_sched=lr_sched,
        rho_min_sched=rho_min_sched or RhoMinSchedule(0.05, 0.0),
        **kw,
    )


@dataclass
class StepStats:
    fwd: int
    bwd: int
    loss: float
    norm_g: float
    norm_gmax: float
    norm_gmin: float
    scale: float
    cos_g_gmin: float | None
    lr_t: float
    rho_min_t: float


def _apply(state: OptimizerState, params: ParamVector,
           composite: np.ndarray, lr_t: float) -> ParamVector:
    buf = state.momentum_buf.values
    buf *= state.momentum
    buf += composite
    state.t += 1
    return params.like(params.values - lr_t * buf)


def sgd_step(state, params, batch, spec: ModelSpec):
    assert state.variant == SGD
    counter = PassCounter()
    lr_t = cosine_lr(state.t, state.lr_sched)
    rho_min_t = rho_min_at(lr_t, state.rho_min_sched, state.lr_sched)
    loss, g = grad(params, batch, spec, counter)
    composite = g.values + state.weight_decay * params.values
    new_params = _apply(state, params, composite, lr_t)
    stats = StepStats(counter.fwd, counter.bwd, loss, l2_norm(g), 0.0, 0.0,
                      0.0, None, lr_t, rho_min_t)
    return new_params, stats


def sam_step(state, params, batch, spec: ModelSpec):
    assert state.variant == SAM
    counter = PassCounter()
    lr_t = cosine_lr(state.t, state.lr_sched)
    rho_min_t = rho_min_at(lr_t, state.rho_min_sched, state.lr_sched)
    loss, g = grad(params, batch, spec, counter)
    norm_g = l2_norm(g)
    if norm_g <= state.zero_grad_eps:
        # vanishing gradient: fall back to a plain SGD step on g
        composite = g.values + state.weight_decay * params.values
        new_params = _apply(state, params, composite, lr_t)
        return new_params, StepStats(counter.fwd, counter.bwd, loss, norm_g,
                                     0.0, 0.0, 0.0, None, lr_t, rho_min_t)
    eps_max = compute_perturbation(g, state.rho_max, ASCENT, state.p_norm,
                                   state.zero_grad_eps)
    _, g_max = grad(params.like(params.values + eps_max.values), batch, spec, counter)
    composite = g_max.values + state.weight_decay * params.values
    new_params = _apply(state, params, composite, lr_t)
    stats = StepStats(counter.fwd, counter.bwd, loss, norm_g, l2_norm(g_max),
                      0.0, 0.0, None, lr_t, rho_min_t)
    return new_params, stats


def bsam_step(state, params, batch, spec: ModelSpec):
    assert state.variant == BSAM
    counter = PassCounter()
    lr_t = cosine_lr(state.t, state.lr_sched)
    rho_min_t = rho_min_at(lr_t, state.rho_min_sched, state.lr_sched)
    loss, g = grad(params, batch, spec, counter)
    norm_g = l2_norm(g)
    if norm_g <= state.zero_grad_eps:
        # both sharpness terms dropped; plain SGD step on g
        composite = g.values + state.weight_decay * params.values
        new_params = _apply(state, params, composite, lr_t)
        return new_params, StepStats(counter.fwd, counter.bwd, loss, norm_g,
                                     0.0, 0.0, 0.0, None, lr_t, rho_min_t)
    eps_max = compute_perturbation(g, state.rho_max, ASCENT, state.p_norm,
                                   state.zero_grad_eps)
    _, g_max = grad(params.like(params.values + eps_max.values), batch, spec, counter)
    eps_min = compute_perturbation(g, rho_min_t, DESCENT, state.p_norm,
                                   state.zero_grad_eps)
    _, g_min = grad(params.like(params.values + eps_min.values), batch, spec, counter)
    scale = scale_factor(g_max, g_min, state.zero_grad_eps)
    composite = (g.values + g_max.values - scale * g_min.values
                 + state.weight_decay * params.values)
    norm_gmin = l2_norm(g_min)
    cos = None
    if norm_gmin > 0.0 and norm_g > 0.0:
        cos = float(np.dot(g.values, g_min.values) / (norm_g * norm_gmin))
    new_params = _apply(state, params, composite, lr_t)
    stats = StepStats(counter.fwd, counter.bwd, loss, norm_g, l2_norm(g_max),
                      norm_gmin, scale, cos, lr_t, rho_min_t)
    return new_params, stats


_STEP_FNS = {SGD: sgd_step, SAM: sam_step, BSAM: bsam_step}


def step(state: OptimizerState, params: ParamVector, batch, spec: ModelSpec):
    """Dispatch one optimization step by variant."""
    return _STEP_FNS[state.variant](state, params, batch, spec)
