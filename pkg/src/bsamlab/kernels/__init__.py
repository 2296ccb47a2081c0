"""Kernel backend selection.

The compiled Cython extension is preferred when importable; the numpy
backend is the fallback. Override with BSAMLAB_KERNELS=python|cython.
Both backends implement the same flat-parameter MLP contract and agree
to ~1e-12 relative (summation order may differ in the last bits).
"""
import os

from . import python_backend

_choice = os.environ.get("BSAMLAB_KERNELS", "auto").lower()

if _choice == "python":
    backend = python_backend
else:
    try:
        from . import _speedups as backend
    except ImportError:
        if _choice == "cython":
            raise
        backend = python_backend

BACKEND_NAME = backend.BACKEND_NAME
param_count = backend.param_count
mlp_loss = backend.mlp_loss
mlp_loss_grad = backend.mlp_loss_grad
