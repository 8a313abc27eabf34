"""Binary and text file formats.

All binary formats start with an 8-byte ASCII magic and store integers and
floats little-endian, arrays row-major:

* ``LDCFv001`` dense matrix: u64 rows, u64 cols, u8 dtype tag (0 f64, 1 f32, 2 i64), payload
* ``LDCMv001`` complex sparse matrix: u64 n, u64 nnz, row-ptr u64, col-idx u64, re f64, im f64
* ``LDCPv001`` propagated-feature cache: u64 n, u64 width, f64 q, u64 K, u8 aggregation tag,
  u64 graph fingerprint, then the real plane and the imaginary plane (f64)
* ``LDCWv001`` model checkpoint: u64 d_in, u64 classes, u8 has_bias, W (f64), bias (f64)

Split files are text, one record per line: ``split_name index [index2] label``,
with ``#`` lines for metadata.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, StaleCacheError
from .magnetic import ComplexSparseMatrix
from .propagation import AGG_TAGS, AggregatedFeatures, PropagationConfig
from .splits import SUBSETS, TaskKind, TaskSplit, task_kind

MAGIC_FEATURES = b"LDCFv001"
MAGIC_MATRIX = b"LDCMv001"
MAGIC_CACHE = b"LDCPv001"
MAGIC_WEIGHTS = b"LDCWv001"

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4"), 2: np.dtype("<i8")}
_DTYPE_TAGS = {np.dtype(np.float64): 0, np.dtype(np.float32): 1, np.dtype(np.int64): 2}

_CACHE_HEADER = struct.Struct("<QQdQBQ")


class _Reader:
    def __init__(self, path, magic):
        self.path = Path(path)
        self.buf = memoryview(self.path.read_bytes())
        self.pos = 0
        got = self.take(len(magic))
        if bytes(got) != magic:
            raise FormatError(f"{self.path}: bad magic {bytes(got)!r}, expected {magic!r}")

    def take(self, nbytes):
        if self.pos + nbytes > len(self.buf):
            raise FormatError(f"{self.path}: truncated file")
        out = self.buf[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return out

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype, count, shape=None):
        dtype = np.dtype(dtype)
        out = np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).copy()
        out = out.astype(dtype.newbyteorder("="), copy=False)
        return out.reshape(shape) if shape is not None else out

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.path}: {len(self.buf) - self.pos} trailing bytes")


def write_features(path, array) -> None:
    """Write a dense matrix (features as f64/f32, labels as i64) in LDCF format."""
    a = np.asarray(array)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise FormatError("LDCF holds 2-D arrays only")
    tag = _DTYPE_TAGS.get(a.dtype)
    if tag is None:
        if np.issubdtype(a.dtype, np.integer):
            a, tag = a.astype(np.int64), 2
        else:
            a, tag = a.astype(np.float64), 0
    with open(path, "wb") as fh:
        fh.write(MAGIC_FEATURES)
        fh.write(struct.pack("<QQB", a.shape[0], a.shape[1], tag))
        fh.write(np.ascontiguousarray(a, dtype=_DTYPES[tag]).tobytes())


def read_features(path) -> np.ndarray:
    r = _Reader(path, MAGIC_FEATURES)
    rows, cols, tag = r.unpack("<QQB")
    if tag not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype tag {tag}")
    out = r.array(_DTYPES[tag], rows * cols, (rows, cols))
    r.done()
    return out


def read_labels(path) -> np.ndarray:
    a = read_features(path)
    if a.shape[1] != 1 or not np.issubdtype(a.dtype, np.integer):
        raise FormatError(f"{path}: labels must be a single i64 column")
    return a[:, 0]


def write_matrix(path, M: ComplexSparseMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_MATRIX)
        fh.write(struct.pack("<QQ", M.n, M.nnz))
        for arr, dt in ((M.indptr, "<u8"), (M.indices, "<u8"), (M.re, "<f8"), (M.im, "<f8")):
            fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def read_matrix(path) -> ComplexSparseMatrix:
    r = _Reader(path, MAGIC_MATRIX)
    n, nnz = r.unpack("<QQ")
    indptr = r.array("<u8", n + 1).astype(np.int64)
    indices = r.array("<u8", nnz).astype(np.int64)
    re = r.array("<f8", nnz)
    im = r.array("<f8", nnz)
    r.done()
    if indptr[0] != 0 or indptr[-1] != nnz or np.any(np.diff(indptr) < 0):
        raise FormatError(f"{path}: inconsistent row pointers")
    return ComplexSparseMatrix(int(n), indptr, indices, re, im)


def write_cache(agg: AggregatedFeatures, path) -> None:
    cfg = agg.config
    with open(path, "wb") as fh:
        fh.write(MAGIC_CACHE)
        fh.write(_CACHE_HEADER.pack(
            agg.n, agg.width, cfg.q, cfg.K, AGG_TAGS[cfg.aggregation], agg.fingerprint
        ))
        fh.write(np.ascontiguousarray(agg.real, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(agg.imag, dtype="<f8").tobytes())


def cache_size(n: int, width: int) -> int:
    return len(MAGIC_CACHE) + _CACHE_HEADER.size + 2 * n * width * 8


def read_cache(path, expected_fingerprint: int | None = None) -> AggregatedFeatures:
    """Load an LDCP cache; a fingerprint mismatch raises :class:`StaleCacheError`."""
    r = _Reader(path, MAGIC_CACHE)
    n, width, q, K, tag, fp = r.unpack(_CACHE_HEADER.format)
    if expected_fingerprint is not None and fp != expected_fingerprint:
        raise StaleCacheError(
            f"{path}: cache built for graph {fp:016x}, current graph is {expected_fingerprint:016x}"
        )
    tags = {v: k for k, v in AGG_TAGS.items()}
    if tag not in tags:
        raise FormatError(f"{path}: unknown aggregation tag {tag}")
    real = r.array("<f8", n * width, (n, width))
    imag = r.array("<f8", n * width, (n, width))
    r.done()
    cfg = PropagationConfig(q=q, K=int(K), aggregation=tags[tag], k_max=max(64, int(K)))
    return AggregatedFeatures(real, imag, cfg, int(fp))


def write_checkpoint(path, W, bias=None) -> None:
    W = np.asarray(W, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC_WEIGHTS)
        fh.write(struct.pack("<QQB", W.shape[0], W.shape[1], int(bias is not None)))
        fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
        if bias is not None:
            fh.write(np.ascontiguousarray(bias, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Returns ``(W, bias)``; ``bias`` is None when the checkpoint has none."""
    r = _Reader(path, MAGIC_WEIGHTS)
    d_in, classes, has_bias = r.unpack("<QQB")
    W = r.array("<f8", d_in * classes, (d_in, classes))
    bias = r.array("<f8", classes) if has_bias else None
    r.done()
    return W, bias


def write_split(split: TaskSplit, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# task_kind={split.task_kind.value}\n")
        fh.write(f"# num_classes={split.num_classes}\n")
        for name in SUBSETS:
            idx, labels = split.subset(name)
            for row, lab in zip(np.asarray(idx).tolist(), labels.tolist()):
                ids = " ".join(map(str, row)) if isinstance(row, list) else str(row)
                fh.write(f"{name} {ids} {lab}\n")


def read_split(path) -> TaskSplit:
    """Parse a split file. The propagation graph is not stored, so it comes back None."""
    meta = {}
    rows = {s: [] for s in SUBSETS}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, _, value = s[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            parts = s.split()
            if parts[0] not in rows or len(parts) not in (3, 4):
                raise FormatError(f"{path}: line {lineno}: bad split record {s!r}")
            try:
                rows[parts[0]].append([int(x) for x in parts[1:]])
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: non-integer field") from None
    try:
        kind = task_kind(meta["task_kind"])
        num_classes = int(meta["num_classes"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: missing or bad metadata header") from exc
    width = 3 if kind.is_link else 2
    arrays = {}
    for name, recs in rows.items():
        a = np.asarray(recs, dtype=np.int64).reshape(-1, width)
        if any(len(r) != width for r in recs):
            raise FormatError(f"{path}: record width does not match task {kind.value}")
        idx = a[:, :-1] if kind.is_link else a[:, 0]
        arrays[name] = (np.ascontiguousarray(idx), a[:, -1].copy())
    return TaskSplit(
        kind,
        arrays["train"][0], arrays["val"][0], arrays["test"][0],
        arrays["train"][1], arrays["val"][1], arrays["test"][1],
        num_classes,
    )


__all__ = [
    "TaskKind", "write_features", "read_features", "read_labels", "write_matrix",
    "read_matrix", "write_cache", "read_cache", "cache_size", "write_checkpoint",
    "read_checkpoint", "write_split", "read_split",
]
