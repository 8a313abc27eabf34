"""Timing harness for the scaling claims: propagation grows with m, training does not."""

from __future__ import annotations

import statistics
import time

import numpy as np

from .graph import generate_random_digraph
from .model import LinearModel, TrainConfig, train
from .propagation import PropagationConfig, propagate_aggregate


def median_times(fns, repeats: int = 3) -> list:
    """Median wall time of each callable; runs are interleaved so drift hits all alike."""
    times = [[] for _ in fns]
    for _ in range(repeats):
        for fn, bucket in zip(fns, times):
            t0 = time.perf_counter()
            fn()
            bucket.append(time.perf_counter() - t0)
    return [statistics.median(t) for t in times]


def bench_propagation(n=100_000, m=1_000_000, f=64, K=3, repeats=3, seed=0, threads=1) -> dict:
    """Median precompute time (operator build, K steps, Last) at m and 2m edges."""
    X = np.random.default_rng(seed).standard_normal((n, f))
    cfg = PropagationConfig(q=0.25, K=K)
    graphs = [generate_random_digraph(n, edges, seed + i) for i, edges in enumerate((m, 2 * m))]
    fns = [lambda g=g: propagate_aggregate(g, X, cfg, threads=threads) for g in graphs]
    out = {"n": n, "f": f, "K": K, "repeats": repeats, "edges": [m, 2 * m]}
    out["seconds"] = median_times(fns, repeats)
    out["ratio"] = out["seconds"][1] / out["seconds"][0]
    return out


def bench_epoch(n=100_000, m=1_000_000, f=64, K=3, num_classes=7, epochs=5, repeats=5, seed=0) -> dict:
    """Median per-epoch training time on caches built from graphs with m and 2m edges."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, f))
    y = rng.integers(num_classes, size=n)
    cfg = PropagationConfig(q=0.25, K=K)
    tcfg = TrainConfig(learning_rate=0.01, epochs=epochs, seed=seed)
    designs = []
    for i, edges in enumerate((m, 2 * m)):
        agg = propagate_aggregate(generate_random_digraph(n, edges, seed + i), X, cfg)
        designs.append(np.hstack([agg.real, agg.imag]))
    model = LinearModel.zeros(designs[0].shape[1], num_classes)
    fns = [lambda D=D: train(model, D, y, tcfg) for D in designs]
    out = {"n": n, "f": f, "K": K, "epochs": epochs, "edges": [m, 2 * m]}
    out["epoch_seconds"] = [t / epochs for t in median_times(fns, repeats)]
    a, b = out["epoch_seconds"]
    out["relative_change"] = abs(b - a) / a
    return out
