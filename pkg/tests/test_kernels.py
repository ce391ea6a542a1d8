"""Backend equivalence for the hot kernels."""

import numpy as np
import pytest

from pipeline_pilot import _kernels
from pipeline_pilot._kernels import fallback

native = pytest.importorskip(
    "pipeline_pilot._kernels._native", reason="compiled kernels not built"
)


def _random_features(seed, n_features=300, n_rows=7):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, 24, size=n_features)
    ends = np.cumsum(lengths)
    starts = ends - lengths
    data = rng.integers(0, 256, size=int(ends[-1])).astype(np.uint8)
    rows = rng.integers(0, n_rows, size=n_features)
    return data, starts.astype(np.int64), ends.astype(np.int64), rows.astype(np.int64), n_rows


@pytest.mark.parametrize("seed", range(5))
def test_hash_kernel_bit_identical_across_backends(seed):
    data, starts, ends, rows, n_rows = _random_features(seed)
    a = native.accumulate_features(data, starts, ends, rows, n_rows, 64)
    b = fallback.accumulate_features(data, starts, ends, rows, n_rows, 64)
    assert np.array_equal(a, b)
    assert a.dtype == np.float64


def test_hash_kernel_empty_input():
    empty = np.empty(0, dtype=np.int64)
    data = np.empty(0, dtype=np.uint8)
    for impl in (native, fallback):
        out = impl.accumulate_features(data, empty, empty, empty, 3, 8)
        assert out.shape == (3, 8)
        assert not out.any()


@pytest.mark.parametrize("seed", range(5))
def test_scan_kernel_agrees_across_backends(seed):
    rng = np.random.default_rng(seed)
    matrix = rng.normal(size=(200, 32))
    query = rng.normal(size=32)
    ia, da = native.nearest_index(matrix, query)
    ib, db = fallback.nearest_index(matrix, query)
    assert ia == ib
    assert da == pytest.approx(db, rel=1e-12)


def test_scan_kernel_first_index_wins_on_ties():
    matrix = np.array([[1.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
    query = np.array([0.0, 0.0])
    for impl in (native, fallback):
        idx, sq = impl.nearest_index(matrix, query)
        assert idx == 0
        assert sq == 1.0


def test_scan_kernel_rejects_empty():
    for impl in (native, fallback):
        with pytest.raises(ValueError):
            impl.nearest_index(np.zeros((0, 4)), np.zeros(4))


def test_selected_backend_is_exposed():
    assert _kernels.BACKEND in ("native", "python")
    assert callable(_kernels.accumulate_features)
    assert callable(_kernels.nearest_index)
