import numpy as np
import pytest

from bsamlab import data as data_mod
from bsamlab.data import (batches, gen_gaussian_blobs, inject_symmetric_noise,
                          load_csv_dataset, load_idx, save_csv_dataset,
                          split_indices)
from bsamlab.errors import ConfigError, ParseError, RangeError


def test_blobs_balanced_counts():
    ds = gen_gaussian_blobs(100, 2, 2, 6.0, seed=0)
    counts = np.bincount(ds.labels)
    assert list(counts) == [50, 50]


def test_blobs_deterministic():
    a = gen_gaussian_blobs(50, 3, 3, 4.0, seed=3)
    b = gen_gaussian_blobs(50, 3, 3, 4.0, seed=3)
    assert np.array_equal(a.features.data, b.features.data)
    assert np.array_equal(a.labels, b.labels)


def test_blobs_nearest_mean_separable():
    ds = gen_gaussian_blobs(500, 2, 2, 6.0, seed=1)
    tr, te = split_indices(ds.n, 0.2, seed=1)
    train, test = ds.subset(tr), ds.subset(te)
    x = train.features.as_array()
    means = np.stack([x[train.labels == c].mean(axis=0) for c in range(2)])
    xt = test.features.as_array()
    pred = np.argmin(((xt[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
    assert np.mean(pred == test.labels) >= 0.95


def test_blobs_validation():
    with pytest.raises(ConfigError):
        gen_gaussian_blobs(10, 0, 2, 1.0, seed=0)
    with pytest.raises(ConfigError):
        gen_gaussian_blobs(1, 2, 2, 1.0, seed=0)


def test_noise_rate_zero_keeps_labels():
    labels = np.array([0, 1, 2, 1, 0])
    out = inject_symmetric_noise(labels, 3, 0.0, seed=0)
    assert np.array_equal(out, labels)


def test_noise_rate_one_binary_flips_all():
    labels = np.array([0, 1, 1, 0, 1])
    out = inject_symmetric_noise(labels, 2, 1.0, seed=0)
    assert np.array_equal(out, 1 - labels)


def test_noise_rate_binomial_bound():
    labels = np.zeros(10_000, dtype=np.int64)
    out = inject_symmetric_noise(labels, 10, 0.4, seed=5)
    frac = np.mean(out != labels)
    assert 0.37 <= frac <= 0.43


def test_noise_never_same_or_out_of_range():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 5, 1000)
    out = inject_symmetric_noise(labels, 5, 0.9, seed=2)
    changed = out != labels
    assert np.all(out >= 0) and np.all(out < 5)
    assert np.all(out[changed] != labels[changed])


def test_noise_rate_out_of_range():
    with pytest.raises(RangeError):
        inject_symmetric_noise(np.zeros(3, dtype=np.int64), 2, 1.5, seed=0)


def test_split_partitions_exactly():
    tr, te = split_indices(100, 0.2, seed=0)
    assert len(tr) == 80 and len(te) == 20
    assert sorted(list(tr) + list(te)) == list(range(100))


def test_batches_single_full_batch():
    ds = gen_gaussian_blobs(20, 2, 2, 4.0, seed=0)
    bs = batches(ds, 20, epoch_seed=0)
    assert len(bs) == 1 and bs[0].size == 20


def test_batches_cover_each_index_once():
    ds = gen_gaussian_blobs(23, 2, 2, 4.0, seed=0)
    bs = batches(ds, 5, epoch_seed=1)
    assert [b.size for b in bs] == [5, 5, 5, 5, 3]
    rows = np.concatenate([b.features.as_array() for b in bs])
    orig = ds.features.as_array()
    # multiset equality via lexicographic sort of rows
    assert np.array_equal(np.sort(rows.view("f8,f8"), axis=0),
                          np.sort(orig.view("f8,f8"), axis=0))


def test_batches_seeded_order():
    ds = gen_gaussian_blobs(30, 2, 2, 4.0, seed=0)
    a = batches(ds, 10, epoch_seed=4)
    b = batches(ds, 10, epoch_seed=4)
    c = batches(ds, 10, epoch_seed=5)
    assert np.array_equal(a[0].features.data, b[0].features.data)
    assert not all(np.array_equal(x.features.data, y.features.data)
                   for x, y in zip(a, c))


def test_batches_bad_size():
    ds = gen_gaussian_blobs(10, 2, 2, 4.0, seed=0)
    with pytest.raises(ConfigError):
        batches(ds, 0, epoch_seed=0)


CSV_FIXTURE = "f0,f1,label\n0.5,1.0,0\n-1.25,3.5,1\n2.0,-0.5,1\n"


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(CSV_FIXTURE)
    ds = load_csv_dataset(p)
    assert (ds.n, ds.d, ds.classes) == (3, 2, 2)
    assert ds.features.as_array()[1, 0] == -1.25
    out = tmp_path / "e.csv"
    save_csv_dataset(ds, out)
    assert np.array_equal(load_csv_dataset(out).features.data, ds.features.data)


def test_csv_non_numeric_cell_names_position(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("f0,f1,label\n0.5,oops,0\n")
    with pytest.raises(ParseError, match="2.*column 1"):
        load_csv_dataset(p)


def test_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,0\n")
    with pytest.raises(ParseError, match=":1"):
        load_csv_dataset(p)


def test_csv_ragged_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("f0,f1,label\n1.0,2.0,0\n1.0,0\n")
    with pytest.raises(ParseError, match=":3"):
        load_csv_dataset(p)


def _write_idx(tmp_path, pixels, labels, rows=2, cols=2):
    import struct
    imgs = tmp_path / "imgs.idx3"
    labs = tmp_path / "labs.idx1"
    n = len(labels)
    imgs.write_bytes(struct.pack(">iiii", 0x803, n, rows, cols) + bytes(pixels))
    labs.write_bytes(struct.pack(">ii", 0x801, n) + bytes(labels))
    return imgs, labs


def test_idx_scaling(tmp_path):
    pixels = [255, 0, 128, 0] * 4
    imgs, labs = _write_idx(tmp_path, pixels, [0, 1, 1, 0])
    ds = load_idx(imgs, labs)
    assert (ds.n, ds.d, ds.classes) == (4, 4, 2)
    assert ds.features.as_array()[0, 0] == 1.0
    assert ds.features.as_array()[0, 2] == 128 / 255


def test_idx_bad_magic(tmp_path):
    import struct
    imgs = tmp_path / "imgs.idx3"
    imgs.write_bytes(struct.pack(">iiii", 0x123, 1, 1, 1) + b"\x00")
    labs = tmp_path / "labs.idx1"
    labs.write_bytes(struct.pack(">ii", 0x801, 1) + b"\x00")
    with pytest.raises(ParseError, match="magic"):
        load_idx(imgs, labs)


def test_idx_count_mismatch(tmp_path):
    imgs, labs = _write_idx(tmp_path, [0] * 8, [0, 1])
    import struct
    labs.write_bytes(struct.pack(">ii", 0x801, 3) + bytes([0, 1, 1]))
    with pytest.raises(ParseError, match="labels for"):
        load_idx(imgs, labs)
