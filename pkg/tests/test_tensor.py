import numpy as np
import pytest

from bsamlab.errors import DegenerateVectorError, ShapeError
from bsamlab.tensor import (Batch, ParamVector, Segment, Tensor,
                            cosine_similarity, flatten, l2_norm)


def test_tensor_shape_data_mismatch():
    with pytest.raises(ShapeError):
        Tensor((2, 3), np.zeros(5))


def test_tensor_from_array_roundtrip():
    a = np.arange(6.0).reshape(2, 3)
    t = Tensor.from_array(a)
    assert t.shape == (2, 3)
    np.testing.assert_array_equal(t.as_array(), a)


def test_layout_must_tile_exactly():
    with pytest.raises(ShapeError):
        ParamVector(np.zeros(5), (Segment("a", 0, (2,)), Segment("b", 3, (2,))))
    with pytest.raises(ShapeError):
        ParamVector(np.zeros(5), (Segment("a", 0, (2,)), Segment("b", 2, (2,))))


def test_flatten_unflatten_identity():
    layout = (Segment("w", 0, (2, 3)), Segment("b", 6, (3,)))
    p = ParamVector(np.arange(9.0), layout)
    named = p.unflatten()
    q = flatten(named, layout)
    assert np.array_equal(p.values, q.values)  # bit-exact round trip


def test_segment_views_share_storage():
    layout = (Segment("w", 0, (2, 2)),)
    p = ParamVector(np.zeros(4), layout)
    p.segment("w")[0, 0] = 5.0
    assert p.values[0] == 5.0


def test_batch_validation():
    x = Tensor.from_array(np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        Batch(x, np.zeros(2, dtype=np.int64))
    with pytest.raises(ShapeError):
        Batch(Tensor.from_array(np.zeros(3)), np.zeros(3, dtype=np.int64))


def test_l2_norm_three_four_five(pv):
    assert l2_norm(pv([3.0, 4.0])) == 5.0


def test_cosine_orthogonal_and_opposite(pv):
    assert cosine_similarity(pv([1.0, 0.0]), pv([0.0, 1.0])) == 0.0
    v = pv([2.0, -1.0, 3.0])
    assert cosine_similarity(v, pv(-v.values)) == -1.0


def test_cosine_zero_vector_raises(pv):
    with pytest.raises(DegenerateVectorError):
        cosine_similarity(pv([0.0, 0.0]), pv([1.0, 0.0]))


def test_norm_and_cosine_match_independent_arithmetic(pv):
    rng = np.random.default_rng(11)
    u = rng.standard_normal(100)
    v = rng.standard_normal(100)
    # independent oracle: plain sums of squares/products
    dot = sum(a * b for a, b in zip(u, v))
    nu = sum(a * a for a in u) ** 0.5
    nv = sum(b * b for b in v) ** 0.5
    assert abs(l2_norm(pv(u)) - nu) <= 1e-12 * nu
    assert abs(cosine_similarity(pv(u), pv(v)) - dot / (nu * nv)) <= 1e-12
