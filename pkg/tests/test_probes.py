import numpy as np
import pytest

from bsamlab import models, probes
from bsamlab.autodiff import forward_loss, grad
from bsamlab.data import gen_gaussian_blobs
from bsamlab.errors import ConfigError, DegenerateVectorError, RangeError
from bsamlab.optimizers import StepStats

QUAD1 = models.quadratic_spec([[1.0]])


def _stats(cos):
    return StepStats(3, 3, 0.0, 1.0, 1.0, 1.0, 1.0, cos, 0.1, 0.05)


# ----------------------------------------------------------------- sharpness

def test_max_sharpness_quadratic_analytic(pv):
    # w=1, rho=0.1: L(1.1) - L(1) = 0.105
    assert probes.max_sharpness(pv([1.0]), None, QUAD1, 0.1) == pytest.approx(0.105, abs=1e-12)


def test_min_sharpness_quadratic_analytic(pv):
    # w=1, rho=0.1: L(1) - L(0.9) = 0.095
    assert probes.min_sharpness(pv([1.0]), None, QUAD1, 0.1) == pytest.approx(0.095, abs=1e-12)


def test_sharpness_zero_rho(pv):
    assert probes.max_sharpness(pv([1.0]), None, QUAD1, 0.0) == 0.0
    assert probes.min_sharpness(pv([1.0]), None, QUAD1, 0.0) == 0.0


def test_sharpness_degenerate_at_minimum(pv):
    assert probes.max_sharpness(pv([0.0]), None, QUAD1, 0.1) == 0.0


def test_report_identity_and_asymmetry(pv):
    rep = probes.sharpness_report(pv([1.0]), None, QUAD1, 0.1, k=1)
    assert rep.bil_s == pytest.approx(0.2, abs=1e-12)
    assert abs(rep.bil_s - (rep.max_s + rep.min_s)) <= 1e-9
    # strictly convex, non-minimum: max_s > min_s > 0
    assert rep.max_s > rep.min_s > 0.0


def test_max_sharpness_beats_random_search():
    params, spec = models.build_mlp([3, 6, 2], 2, seed=2)
    batch = gen_gaussian_blobs(16, 3, 2, 4.0, 4).as_batch()
    rho = 1e-2
    got = probes.max_sharpness(params, batch, spec, rho)
    base = forward_loss(params, batch, spec)
    rng = np.random.default_rng(0)
    best = -np.inf
    for _ in range(1000):
        d = rng.standard_normal(len(params))
        d *= rho / np.linalg.norm(d)
        best = max(best, forward_loss(params.like(params.values + d), batch, spec) - base)
    assert got >= best - 0.1 * abs(best)


# ----------------------------------------------------------------------- hvp

def test_hvp_diagonal_quadratic(pv):
    spec = models.quadratic_spec(np.diag([1.0, 10.0]))
    out = probes.hvp(pv([1.0, 1.0]), pv([0.0, 1.0]), None, spec)
    np.testing.assert_allclose(out.values, [0.0, 10.0], atol=1e-6)


def test_hvp_matches_dense_matrix(pv):
    rng = np.random.default_rng(6)
    m = rng.standard_normal((5, 5))
    h = m @ m.T
    spec = models.quadratic_spec(h)
    w = pv(rng.standard_normal(5))
    v = rng.standard_normal(5)
    out = probes.hvp(w, pv(v), None, spec)
    expect = h @ v
    assert np.max(np.abs(out.values - expect)) <= 1e-6 * max(1, np.max(np.abs(expect)))


def test_hvp_linearity(pv):
    spec = models.quadratic_spec(np.diag([2.0, 5.0, 9.0]))
    w = pv([0.3, -0.2, 1.0])
    v = np.array([1.0, 2.0, -1.0])
    h1 = probes.hvp(w, pv(v), None, spec).values
    h2 = probes.hvp(w, pv(2.0 * v), None, spec).values
    assert np.max(np.abs(h2 - 2.0 * h1)) <= 1e-6 * np.max(np.abs(h2))


def test_hvp_symmetry(pv):
    rng = np.random.default_rng(7)
    m = rng.standard_normal((4, 4))
    spec = models.quadratic_spec(m @ m.T)
    w = pv(rng.standard_normal(4))
    u = rng.standard_normal(4)
    v = rng.standard_normal(4)
    uhv = float(u @ probes.hvp(w, pv(v), None, spec).values)
    vhu = float(v @ probes.hvp(w, pv(u), None, spec).values)
    assert abs(uhv - vhu) <= 1e-6 * max(1.0, abs(uhv))


def test_hvp_zero_vector_raises(pv):
    with pytest.raises(DegenerateVectorError):
        probes.hvp(pv([1.0]), pv([0.0]), None, QUAD1)


# --------------------------------------------------------------- eigenvalues

def test_top_eigenvalues_known_spectrum(pv):
    spec = models.quadratic_spec(np.diag(np.arange(1.0, 11.0)))
    pairs = probes.top_eigenvalues(pv(np.ones(10)), None, spec, 3,
                                   iters=500, tol=1e-8, seed=0)
    lams = [p[0] for p in pairs]
    np.testing.assert_allclose(lams, [10.0, 9.0, 8.0], atol=1e-4)
    assert lams == sorted(lams, reverse=True)


def test_top_eigenvalues_match_dense_oracle(pv):
    rng = np.random.default_rng(9)
    s = rng.standard_normal((20, 20))
    s = 0.5 * (s + s.T)
    s += (1e-6 - np.linalg.eigvalsh(s).min()) * np.eye(20)  # PSD fixture
    spec = models.quadratic_spec(0.5 * (s + s.T))
    dense = np.sort(np.linalg.eigvalsh(spec.h))[::-1]
    pairs = probes.top_eigenvalues(pv(rng.standard_normal(20)), None, spec, 5,
                                   iters=3000, tol=1e-9, seed=1)
    np.testing.assert_allclose([p[0] for p in pairs], dense[:5], atol=1e-4)


def test_top_eigenvalue_mlp_vs_dense_fd_hessian():
    params, spec = models.build_mlp([2, 3, 2], 2, seed=5)
    batch = gen_gaussian_blobs(8, 2, 2, 4.0, 3).as_batch()
    n = len(params)
    h = 1e-5
    dense = np.empty((n, n))
    for i in range(n):
        wp = params.copy(); wp.values[i] += h
        wm = params.copy(); wm.values[i] -= h
        _, gp = grad(wp, batch, spec)
        _, gm = grad(wm, batch, spec)
        dense[:, i] = (gp.values - gm.values) / (2 * h)
    dense = 0.5 * (dense + dense.T)
    lam_dense = np.linalg.eigvalsh(dense).max()
    pairs = probes.top_eigenvalues(params, batch, spec, 1, iters=500, tol=1e-8, seed=2)
    assert abs(pairs[0][0] - lam_dense) / abs(lam_dense) <= 0.01


def test_top_eigenvalues_k_too_large(pv):
    with pytest.raises(RangeError):
        probes.top_eigenvalues(pv([1.0]), None, QUAD1, 2)


def test_residuals_reported(pv):
    spec = models.quadratic_spec(np.diag([3.0, 1.0]))
    pairs = probes.top_eigenvalues(pv([1.0, 1.0]), None, spec, 2,
                                   iters=500, tol=1e-8, seed=0)
    for lam, res in pairs:
        assert res <= 1e-6


# ----------------------------------------------------------------- cos diag

def test_cosine_diagnostic_all_ones():
    out = probes.cosine_diagnostic([_stats(1.0)] * 40)
    assert all(m == 1.0 for m in out["decile_means"])
    assert out["final_negative_fraction"] == 0.0


def test_cosine_diagnostic_negative_tail():
    trace = [_stats(1.0)] * 90 + [_stats(-0.5)] * 10
    out = probes.cosine_diagnostic(trace)
    assert out["decile_means"][-1] == pytest.approx(-0.5)
    assert out["final_negative_fraction"] == 1.0


def test_cosine_diagnostic_empty_raises():
    with pytest.raises(ConfigError):
        probes.cosine_diagnostic([_stats(None)])


# -------------------------------------------------------------------- slices

def test_slice_center_is_current_loss():
    params, spec = models.build_mlp([2, 4, 2], 2, seed=1)
    batch = gen_gaussian_blobs(12, 2, 2, 4.0, 2).as_batch()
    rng = np.random.default_rng(3)
    d1 = params.like(rng.standard_normal(len(params)))
    d2 = params.like(rng.standard_normal(len(params)))
    _, _, grid = probes.loss_slice(params, spec, batch, d1, d2, 5, 0.5)
    assert grid[2, 2] == forward_loss(params, batch, spec)


def test_slice_quadratic_analytic(pv):
    spec = models.quadratic_spec(np.eye(2))
    w = pv([1.0, 1.0])
    d1 = pv([1.0, 0.0])
    d2 = pv([0.0, 1.0])
    alphas, betas, grid = probes.loss_slice(w, spec, None, d1, d2, 5, 1.0)
    # effective directions are filter-normalized to |w| = sqrt(2)
    s = np.sqrt(2.0)
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            expect = 0.5 * ((1.0 + a * s) ** 2 + (1.0 + b * s) ** 2)
            assert grid[i, j] == pytest.approx(expect, rel=1e-12)


def test_slice_symmetry_for_centered_quadratic(pv):
    rng = np.random.default_rng(12)
    m = rng.standard_normal((3, 3))
    spec = models.quadratic_spec(m @ m.T)
    w = pv([0.0, 0.0, 0.0])  # zero-norm segments keep raw directions
    d1 = pv(rng.standard_normal(3))
    d2 = pv(rng.standard_normal(3))
    _, _, grid = probes.loss_slice(w, spec, None, d1, d2, 7, 1.0)
    np.testing.assert_allclose(grid, grid[::-1, ::-1], rtol=1e-10)


def test_slice_rejects_bad_grid_and_parallel_dirs(pv):
    spec = models.quadratic_spec(np.eye(2))
    w = pv([1.0, 1.0])
    with pytest.raises(ConfigError):
        probes.loss_slice(w, spec, None, pv([1.0, 0.0]), pv([0.0, 1.0]), 4, 1.0)
    with pytest.raises(DegenerateVectorError):
        probes.loss_slice(w, spec, None, pv([1.0, 1.0]), pv([2.0, 2.0]), 5, 1.0)
