#!/usr/bin/env python3
"""Compare the compiled kernels against the NumPy fallback.

Times the two hot paths (feature hashing and the nearest-neighbor scan) on a
synthetic 1000-document corpus at 512 dimensions, plus the end-to-end direct
recommendation they feed. Run after building the extension:

    python3 benchmarks/bench_kernels.py
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from pipeline_pilot._kernels import fallback
from synthdata import random_corpus

try:
    from pipeline_pilot._kernels import _native as native
except ImportError:
    native = None


def _timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000.0


def _spans_for(texts):
    from pipeline_pilot.embed import _feature_spans

    buffers, starts, ends, rows = [], [], [], []
    offset = 0
    for i, t in enumerate(texts):
        buf, s, e = _feature_spans(t)
        if s.size:
            buffers.append(buf)
            starts.append(s + offset)
            ends.append(e + offset)
            rows.append(np.full(s.size, i, dtype=np.int64))
            offset += len(buf)
    data = np.frombuffer(b"".join(buffers), dtype=np.uint8)
    return data, np.concatenate(starts), np.concatenate(ends), np.concatenate(rows), len(texts)


def main():
    corpus = random_corpus(1000, seed=0)
    texts = [r.metadata.metadata_document() for r in corpus]
    data, starts, ends, rows, n = _spans_for(texts)
    dim = 512
    print(f"{len(texts)} documents, {starts.shape[0]} features, dim {dim}")

    backends = [("python", fallback)] + ([("native", native)] if native else [])
    results = {}
    for name, impl in backends:
        hash_ms = _timeit(lambda: impl.accumulate_features(data, starts, ends, rows, n, dim))
        counts = impl.accumulate_features(data, starts, ends, rows, n, dim)
        norms = np.sqrt((counts * counts).sum(axis=1))
        matrix = counts / np.where(norms > 0, norms, 1.0)[:, None]
        query = matrix[0]
        scan_ms = _timeit(lambda: impl.nearest_index(matrix[1:], query))
        results[name] = (hash_ms, scan_ms)
        print(f"{name:>7}: feature hashing {hash_ms:8.2f} ms   scan {scan_ms:7.3f} ms")

    if native:
        ph, ps = results["python"]
        nh, ns = results["native"]
        a = native.accumulate_features(data, starts, ends, rows, n, dim)
        b = fallback.accumulate_features(data, starts, ends, rows, n, dim)
        print(f"speedup: hashing x{ph / nh:.1f}, scan x{ps / ns:.1f}; outputs identical: {np.array_equal(a, b)}")

    from pipeline_pilot.embed import HashedNGramEmbedder
    from pipeline_pilot.transfer import recommend_direct

    e = HashedNGramEmbedder(dim)
    query = corpus[0]
    start = time.perf_counter()
    rec = recommend_direct(query, corpus, e)
    print(f"end-to-end direct recommendation over 999 donors: "
          f"{(time.perf_counter() - start) * 1000:.0f} ms (internal {rec.elapsed_ms} ms)")


if __name__ == "__main__":
    main()
