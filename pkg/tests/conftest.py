import numpy as np
import pytest

from bsamlab.models import scalar_layout
from bsamlab.tensor import ParamVector


@pytest.fixture
def pv():
    """Factory: ParamVector over a single flat segment."""
    def make(values):
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        return ParamVector(values, scalar_layout(values.size))
    return make


def rel_err(x, y):
    """rel(x, y) = |x - y| / max(1, |x|, |y|), elementwise."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.abs(x - y) / np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
