"""Offline K-step complex feature propagation and weight-free aggregation.

The input signal is ``X + iX``; step ``k`` holds ``MGO^k (X + iX)`` as a pair of
real planes. Aggregation reduces the list ``[step 0, ..., step K]`` with one of
``last``, ``mean``, ``sum`` or ``concat`` and treats both planes identically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, NumericError
from .features import as_feature_matrix
from .graph import DirectedGraph
from .magnetic import ComplexSparseMatrix, check_q, complex_spmm, magnetic_graph_operator

K_MAX = 64
# above this, last/mean/sum stream instead of keeping every step
DEFAULT_MATERIALIZE_BYTES = 1 << 30


class Aggregation(str, enum.Enum):
    LAST = "last"
    MEAN = "mean"
    SUM = "sum"
    CONCAT = "concat"


AGG_TAGS = {Aggregation.LAST: 0, Aggregation.MEAN: 1, Aggregation.SUM: 2, Aggregation.CONCAT: 3}


def aggregation(value) -> Aggregation:
    if isinstance(value, Aggregation):
        return value
    try:
        return Aggregation(str(value).lower())
    except ValueError:
        raise InputError(f"unknown aggregation {value!r}; use last, mean, sum or concat") from None


@dataclass(frozen=True)
class PropagationConfig:
    q: float = 0.25
    K: int = 2
    aggregation: Aggregation = Aggregation.LAST
    k_max: int = K_MAX

    def __post_init__(self):
        check_q(self.q)
        if not (0 <= self.K <= self.k_max):
            raise InputError(f"K={self.K} outside [0, {self.k_max}]")
        object.__setattr__(self, "aggregation", aggregation(self.aggregation))


@dataclass
class ComplexFeatureSet:
    steps: list  # [(real, imag), ...] for k = 0..K
    config: PropagationConfig | None = None

    @property
    def K(self) -> int:
        return len(self.steps) - 1

    @property
    def f(self) -> int:
        return self.steps[0][0].shape[1]


@dataclass
class AggregatedFeatures:
    real: np.ndarray
    imag: np.ndarray
    config: PropagationConfig
    fingerprint: int = 0

    @property
    def n(self) -> int:
        return self.real.shape[0]

    @property
    def width(self) -> int:
        return self.real.shape[1]


def _check_finite(re, im, step):
    if not (np.isfinite(re).all() and np.isfinite(im).all()):
        raise NumericError(f"non-finite values after propagation step {step}")


def _operator(graph, q, operator):
    if operator is None:
        return magnetic_graph_operator(graph, q)
    if operator.n != graph.n:
        raise InputError("operator size does not match graph")
    return operator


def iter_propagate(
    graph: DirectedGraph, X, cfg: PropagationConfig,
    operator: ComplexSparseMatrix | None = None, threads: int = 1,
):
    """Yield ``(real, imag)`` for steps 0..K, one operator application per step."""
    X = as_feature_matrix(X, graph.n)
    M = _operator(graph, cfg.q, operator)
    re, im = X.copy(), X.copy()
    yield re, im
    for k in range(1, cfg.K + 1):
        re, im = complex_spmm(M, re, im, threads=threads)
        _check_finite(re, im, k)
        yield re, im


def propagate(
    graph: DirectedGraph, X, cfg: PropagationConfig,
    operator: ComplexSparseMatrix | None = None, threads: int = 1,
) -> ComplexFeatureSet:
    """All propagated steps ``[X~(0), ..., X~(K)]``; ``X~(0) = (X, X)``."""
    return ComplexFeatureSet(list(iter_propagate(graph, X, cfg, operator, threads)), cfg)


def aggregate(features: ComplexFeatureSet, mode) -> AggregatedFeatures:
    mode = aggregation(mode)
    steps = features.steps
    if not steps:
        raise InputError("empty feature set")
    planes = []
    for p in (0, 1):
        if mode is Aggregation.LAST:
            out = steps[-1][p].copy()
        elif mode is Aggregation.CONCAT:
            out = np.hstack([s[p] for s in steps])
        else:
            out = steps[0][p].copy()
            for s in steps[1:]:
                out += s[p]
            if mode is Aggregation.MEAN:
                out /= len(steps)
        planes.append(out)
    K = len(steps) - 1
    if features.config is not None and features.config.K == K:
        cfg = replace(features.config, aggregation=mode)
    else:
        cfg = PropagationConfig(q=0.0, K=K, aggregation=mode, k_max=max(K_MAX, K))
    return AggregatedFeatures(planes[0], planes[1], cfg)


def propagate_aggregate(
    graph: DirectedGraph, X, cfg: PropagationConfig,
    operator: ComplexSparseMatrix | None = None, threads: int = 1,
    max_materialize_bytes: int = DEFAULT_MATERIALIZE_BYTES,
) -> AggregatedFeatures:
    """Propagate and aggregate in one pass.

    Concat always materializes every step. The other modes keep all steps
    only when they fit under ``max_materialize_bytes``; otherwise they run
    with O(n f) accumulators. Both routes add steps in the same order, so the
    results are bit-identical.
    """
    X = as_feature_matrix(X, graph.n)
    need = 2 * (cfg.K + 1) * X.size * 8
    if cfg.aggregation is Aggregation.CONCAT or need <= max_materialize_bytes:
        agg = aggregate(propagate(graph, X, cfg, operator, threads), cfg.aggregation)
    else:
        acc_r = acc_i = None
        for re, im in iter_propagate(graph, X, cfg, operator, threads):
            if acc_r is None or cfg.aggregation is Aggregation.LAST:
                acc_r, acc_i = re.copy(), im.copy()
            else:
                acc_r += re
                acc_i += im
        if cfg.aggregation is Aggregation.MEAN:
            acc_r /= cfg.K + 1
            acc_i /= cfg.K + 1
        agg = AggregatedFeatures(acc_r, acc_i, cfg)
    agg.config = cfg
    agg.fingerprint = graph.fingerprint()
    return agg


def output_width(f: int, cfg: PropagationConfig) -> int:
    return f * (cfg.K + 1) if cfg.aggregation is Aggregation.CONCAT else f
