"""Flatness probes: directional sharpness, Hessian spectrum, loss slices.

Sharpness values use the same closed-form first-order perturbations the
optimizers use. Top Hessian eigenvalues come from power iteration with
deflation over central-difference Hessian-vector products, which keeps the
probe self-contained and checkable against dense oracles at this scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import forward_loss, grad
from .errors import ConfigError, DegenerateVectorError, RangeError
from .models import ModelSpec
from .optimizers import ASCENT, DESCENT, compute_perturbation
from .rng import stream
from .tensor import ParamVector


@dataclass
class SharpnessReport:
    max_s: float
    min_s: float
    bil_s: float
    rho_used: float
    eigenvalues: list
    eig_residuals: list
    degenerate: bool = False


def _perturbed_delta(params, batch, spec, rho, direction):
    _, g = grad(params, batch, spec)
    if np.linalg.norm(g.values) <= 1e-12:
        return 0.0, True
    eps = compute_perturbation(g, rho, direction)
    base = forward_loss(params, batch, spec)
    moved = forward_loss(params.like(params.values + eps.values), batch, spec)
    return (base, moved), False


def max_sharpness(params, batch, spec: ModelSpec, rho: float) -> float:
    """L(w + eps_ascent) - L(w); 0 at a stationary point."""
    if rho < 0:
        raise RangeError("rho must be >= 0")
    vals, degenerate = _perturbed_delta(params, batch, spec, rho, ASCENT)
    if degenerate:
        return 0.0
    base, moved = vals
    return moved - base


def min_sharpness(params, batch, spec: ModelSpec, rho: float) -> float:
    """L(w) - L(w + eps_descent); 0 at a stationary point."""
    if rho < 0:
        raise RangeError("rho must be >= 0")
    vals, degenerate = _perturbed_delta(params, batch, spec, rho, DESCENT)
    if degenerate:
        return 0.0
    base, moved = vals
    return base - moved


def hvp(params: ParamVector, v: ParamVector, batch, spec: ModelSpec,
        h: float | None = None) -> ParamVector:
    """Central-difference Hessian-vector product H v."""
    nv = np.linalg.norm(v.values)
    if nv == 0.0:
        raise DegenerateVectorError("hvp requires a nonzero direction")
    if h is None:
        h = 1e-4 * max(1.0, np.linalg.norm(params.values))
    if h <= 0:
        raise RangeError("hvp step must be positive")
    vhat = v.values / nv
    _, gp = grad(params.like(params.values + h * vhat), batch, spec)
    _, gm = grad(params.like(params.values - h * vhat), batch, spec)
    return params.like((gp.values - gm.values) / (2.0 * h) * nv)


def _norm_estimate(params, batch, spec, seed, iters=25):
    """Power-iteration estimate of the Hessian's spectral radius."""
    rng = stream(seed, "hvp-norm-estimate")
    v = params.like(rng.standard_normal(len(params)))
    lam = 0.0
    for _ in range(iters):
        hv = hvp(params, params.like(v.values / np.linalg.norm(v.values)), batch, spec)
        lam = np.linalg.norm(hv.values)
        if lam == 0.0:
            return 0.0
        v = hv
    return lam


def top_eigenvalues(params: ParamVector, batch, spec: ModelSpec, k: int,
                    iters: int = 200, tol: float = 1e-6, seed: int = 0) -> list:
    """Top-k Hessian eigenvalues (descending) with residuals.

    Power iteration on the shifted operator H + cI (c = spectral-radius
    estimate) so the dominant eigenvalue is the most positive one even for
    indefinite Hessians; found pairs are deflated by projection.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    n = len(params)
    if k > n:
        raise RangeError(f"k={k} exceeds parameter dimension {n}")
    shift = _norm_estimate(params, batch, spec, seed) * 1.1 + 1e-8
    rng = stream(seed, "power-iteration")
    basis = []  # found eigenvectors, for deflation
    out = []
    for _ in range(k):
        v = rng.standard_normal(n)
        for u in basis:
            v -= np.dot(u, v) * u
        v /= np.linalg.norm(v)
        lam = 0.0
        residual = np.inf
        for _ in range(iters):
            hv = hvp(params, params.like(v), batch, spec).values
            w = hv + shift * v
            for u in basis:
                w -= np.dot(u, w) * u
            nw = np.linalg.norm(w)
            if nw == 0.0:
                lam = 0.0
                residual = 0.0
                break
            v = w / nw
            hv = hvp(params, params.like(v), batch, spec).values
            lam = float(np.dot(v, hv))
            residual = float(np.linalg.norm(hv - lam * v) / max(abs(lam), 1e-30))
            if residual <= tol:
                break
        basis.append(v.copy())
        out.append((lam, residual))
    out.sort(key=lambda t: -t[0])
    return out


def sharpness_report(params, batch, spec: ModelSpec, rho: float,
                     k: int = 3, iters: int = 200, tol: float = 1e-6,
                     seed: int = 0) -> SharpnessReport:
    ms = max_sharpness(params, batch, spec, rho)
    ns = min_sharpness(params, batch, spec, rho)
    _, g = grad(params, batch, spec)
    degenerate = np.linalg.norm(g.values) <= 1e-12
    pairs = top_eigenvalues(params, batch, spec, k, iters, tol, seed)
    return SharpnessReport(
        max_s=ms, min_s=ns, bil_s=ms + ns, rho_used=rho,
        eigenvalues=[p[0] for p in pairs],
        eig_residuals=[p[1] for p in pairs],
        degenerate=degenerate,
    )


def cosine_diagnostic(trace) -> dict:
    """Decile means of cos(g, g_min) over a run plus the final-decile
    fraction of negative-cosine steps."""
    cos = [s.cos_g_gmin for s in trace if s.cos_g_gmin is not None]
    if not cos:
        raise ConfigError("trace has no cosine values")
    cos = np.asarray(cos)
    n = len(cos)
    edges = [round(i * n / 10) for i in range(11)]
    decile_means = []
    for i in range(10):
        lo, hi = edges[i], edges[i + 1]
        decile_means.append(float(cos[lo:hi].mean()) if hi > lo else float("nan"))
    final = cos[edges[9]:] if edges[9] < n else cos[-1:]
    return {
        "decile_means": decile_means,
        "final_negative_fraction": float(np.mean(final < 0.0)),
    }


def _filter_normalize(d: ParamVector, params: ParamVector) -> np.ndarray:
    """Rescale each layout segment of d to the norm of the matching
    segment of params (segments with zero weight norm are left as-is)."""
    out = d.values.copy()
    for seg in params.layout:
        n = int(np.prod(seg.shape))
        sl = slice(seg.offset, seg.offset + n)
        wn = np.linalg.norm(params.values[sl])
        dn = np.linalg.norm(out[sl])
        if wn > 0.0 and dn > 0.0:
            out[sl] *= wn / dn
    return out


def loss_slice(params: ParamVector, spec: ModelSpec, batch, d1: ParamVector,
               d2: ParamVector, grid: int, extent: float):
    """Loss over the 2-D plane spanned by two filter-normalized directions.

    Returns (alphas, betas, matrix) with matrix[i, j] = L(w + a_i d1 + b_j d2).
    """
    if grid < 3 or grid % 2 == 0:
        raise ConfigError(f"grid must be odd and >= 3, got {grid}")
    u1 = _filter_normalize(d1, params)
    u2 = _filter_normalize(d2, params)
    # Gram-Schmidt: remove the d1 component from d2
    n1 = np.linalg.norm(u1)
    if n1 == 0.0:
        raise DegenerateVectorError("d1 is zero")
    u2 = u2 - (np.dot(u1, u2) / n1**2) * u1
    if np.linalg.norm(u2) <= 1e-12 * max(1.0, np.linalg.norm(u1)):
        raise DegenerateVectorError("directions are parallel after normalization")
    coords = np.linspace(-extent, extent, grid)
    out = np.empty((grid, grid))
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            if a == 0.0 and b == 0.0:
                out[i, j] = forward_loss(params, batch, spec)
            else:
                moved = params.like(params.values + a * u1 + b * u2)
                out[i, j] = forward_loss(moved, batch, spec)
    return coords, coords, out
