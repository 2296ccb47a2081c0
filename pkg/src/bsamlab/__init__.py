"""Bilateral sharpness-aware optimization lab.

SGD / SAM / BSAM optimizers on a small float64 autodiff core, flatness
probes (directional sharpness, Hessian spectrum, loss slices), synthetic
data with label noise, and a deterministic experiment CLI.
"""
from .kernels import BACKEND_NAME

__all__ = ["BACKEND_NAME"]
__version__ = "0.1.0"
