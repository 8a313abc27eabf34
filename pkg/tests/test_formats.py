import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightdic.errors import FormatError, StaleCacheError
from lightdic.formats import (
    cache_size,
    read_cache,
    read_checkpoint,
    read_features,
    read_labels,
    read_matrix,
    read_split,
    write_cache,
    write_checkpoint,
    write_features,
    write_matrix,
    write_split,
)
from lightdic.graph import generate_random_digraph
from lightdic.magnetic import magnetic_graph_operator
from lightdic.propagation import PropagationConfig, propagate_aggregate
from lightdic.splits import TaskKind, build_link_split, build_node_split


def test_features_header_layout(tmp_path):
    p = tmp_path / "x.ldcf"
    write_features(p, np.arange(6, dtype=np.float64).reshape(2, 3))
    raw = p.read_bytes()
    assert raw[:8] == b"LDCFv001"
    assert struct.unpack("<QQB", raw[8:25]) == (2, 3, 0)
    assert len(raw) == 25 + 6 * 8


@pytest.mark.parametrize("dtype,tag", [(np.float64, 0), (np.float32, 1), (np.int64, 2)])
def test_features_dtypes(tmp_path, dtype, tag):
    p = tmp_path / "x.ldcf"
    a = (np.arange(12) - 3).astype(dtype).reshape(4, 3)
    write_features(p, a)
    assert p.read_bytes()[24] == tag
    b = read_features(p)
    assert b.dtype == dtype and np.array_equal(a, b)


def test_labels_1d(tmp_path):
    p = tmp_path / "y.ldcf"
    write_features(p, np.array([2, 0, 1]))
    assert read_labels(p).tolist() == [2, 0, 1]


def test_truncated_and_bad_magic(tmp_path):
    p = tmp_path / "x.ldcf"
    write_features(p, np.ones((3, 3)))
    raw = p.read_bytes()
    p.write_bytes(raw[:-1])
    with pytest.raises(FormatError):
        read_features(p)
    p.write_bytes(b"XXXXv001" + raw[8:])
    with pytest.raises(FormatError):
        read_features(p)
    p.write_bytes(raw + b"\0")
    with pytest.raises(FormatError):
        read_features(p)


def test_matrix_round_trip(tmp_path, small_graph):
    M = magnetic_graph_operator(small_graph, 0.2)
    p = tmp_path / "m.ldcm"
    write_matrix(p, M)
    R = read_matrix(p)
    assert R.n == M.n
    for a, b in ((R.indptr, M.indptr), (R.indices, M.indices), (R.re, M.re), (R.im, M.im)):
        assert a.tobytes() == b.tobytes()


def test_cache_size_and_stale(tmp_path):
    g = generate_random_digraph(1000, 3000, seed=0)
    X = np.random.default_rng(0).standard_normal((1000, 64))
    agg = propagate_aggregate(g, X, PropagationConfig(q=0.1, K=4, aggregation="concat"))
    p = tmp_path / "c.ldcp"
    write_cache(agg, p)
    assert p.stat().st_size == 2 * 1000 * 64 * 5 * 8 + 8 + 41 == cache_size(1000, 320)
    other = generate_random_digraph(1000, 3000, seed=1)
    with pytest.raises(StaleCacheError):
        read_cache(p, expected_fingerprint=other.fingerprint())
    back = read_cache(p, expected_fingerprint=g.fingerprint())
    assert back.config == agg.config and back.fingerprint == g.fingerprint()


def test_cache_truncated(tmp_path, small_graph):
    agg = propagate_aggregate(small_graph, np.ones((20, 2)), PropagationConfig())
    p = tmp_path / "c.ldcp"
    write_cache(agg, p)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError):
        read_cache(p)


@settings(max_examples=20)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 8), st.sampled_from(["last", "mean", "sum", "concat"]),
       st.integers(0, 2**31))
def test_cache_round_trip(n, f, K, mode, seed):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(seed)
    g = generate_random_digraph(n, min(n * (n - 1), 2 * n), seed)
    agg = propagate_aggregate(g, rng.standard_normal((n, f)), PropagationConfig(q=0.25 * rng.random(), K=K, aggregation=mode))
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "c.ldcp"
        write_cache(agg, p)
        back = read_cache(p)
        assert back.real.tobytes() == agg.real.tobytes() and back.imag.tobytes() == agg.imag.tobytes()
        assert back.config == agg.config and back.fingerprint == agg.fingerprint


def test_checkpoint_round_trip(tmp_path, rng):
    p = tmp_path / "w.ldcw"
    W, b = rng.standard_normal((7, 3)), rng.standard_normal(3)
    write_checkpoint(p, W, b)
    W2, b2 = read_checkpoint(p)
    assert W2.tobytes() == W.tobytes() and b2.tobytes() == b.tobytes()
    write_checkpoint(p, W)
    assert read_checkpoint(p)[1] is None
    assert p.read_bytes()[:8] == b"LDCWv001"


@pytest.mark.parametrize("kind", [TaskKind.NODE, TaskKind.THREE_CLASS])
def test_split_round_trip(tmp_path, kind):
    g = generate_random_digraph(40, 120, seed=2)
    if kind is TaskKind.NODE:
        s = build_node_split(g, np.arange(40) % 3, 3, 5, seed=0)
    else:
        s = build_link_split(g, kind, seed=0)
    p = tmp_path / "split.txt"
    write_split(s, p)
    back = read_split(p)
    assert back.task_kind is kind and back.num_classes == s.num_classes
    for name in ("train", "val", "test"):
        assert np.array_equal(back.subset(name)[0], s.subset(name)[0])
        assert np.array_equal(back.subset(name)[1], s.subset(name)[1])
    assert p.read_text().startswith(f"# task_kind={kind.value}\n")


def test_split_bad_record(tmp_path):
    p = tmp_path / "split.txt"
    p.write_text("# task_kind=node_classification\n# num_classes=2\nholdout 3 1\n")
    with pytest.raises(FormatError):
        read_split(p)
