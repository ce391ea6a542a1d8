"""NumPy implementations of the hot kernels.

These mirror ``pipeline_pilot._kernels._native``. The feature-hashing kernel
is bit-identical across backends: the hash is pure 64-bit integer arithmetic
and the accumulated values are exact small integers, so summation order does
not matter. The scan kernel can differ from the native one in the last ulp of
the returned squared distance because NumPy reduces pairwise; the selected
index agrees except on such rounding-level near-ties.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = np.uint64(0xCBF29CE484222325)
FNV_PRIME = np.uint64(0x100000001B3)

BACKEND_NAME = "python"


def accumulate_features(data, starts, ends, rows, n_rows, dim):
    """Hash byte-span features into signed count buckets.

    ``data`` is a uint8 array holding all feature bytes; feature *i* occupies
    ``data[starts[i]:ends[i]]`` and belongs to output row ``rows[i]``. Each
    feature is hashed with 64-bit FNV-1a; the low bits choose the bucket
    (``hash % dim``) and the top bit the sign. Returns an (n_rows, dim)
    float64 matrix of accumulated signed counts.
    """
    data = np.ascontiguousarray(data, dtype=np.uint8)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    ends = np.ascontiguousarray(ends, dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    out = np.zeros((n_rows, dim), dtype=np.float64)
    n_feat = starts.shape[0]
    if n_feat == 0:
        return out

    lengths = ends - starts
    max_len = int(lengths.max())
    hashes = np.full(n_feat, FNV_OFFSET, dtype=np.uint64)
    # One vectorized FNV-1a round per byte position; features shorter than
    # the position are masked out.
    for j in range(max_len):
        active = lengths > j
        byte = data[starts[active] + j].astype(np.uint64)
        hashes[active] = (hashes[active] ^ byte) * FNV_PRIME

    buckets = (hashes % np.uint64(dim)).astype(np.int64)
    signs = np.where((hashes >> np.uint64(63)).astype(bool), -1.0, 1.0)
    np.add.at(out, (rows, buckets), signs)
    return out


def nearest_index(matrix, query):
    """Exact linear scan: index and squared distance of the nearest row."""
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if matrix.shape[0] == 0:
        raise ValueError("empty candidate matrix")
    diff = matrix - query[None, :]
    sq = np.einsum("ij,ij->i", diff, diff)
    idx = int(np.argmin(sq))
    return idx, float(sq[idx])
