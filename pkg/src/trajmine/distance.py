"""LCS dissimilarity between sequences and the condensed pairwise matrix."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from trajmine import _kernels
from trajmine.model import Sequence, SequenceBank

MAGIC = b"TMDM"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def _events(s):
    return s.events if isinstance(s, Sequence) else tuple(s)


def lcs_length(a, b) -> int:
    """Length of the longest common (order-preserving, gapped) subsequence."""
    a, b = _events(a), _events(b)
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            if x == y:
                cur.append(prev[j] + 1)
            else:
                cur.append(cur[j] if cur[j] >= prev[j + 1] else prev[j + 1])
        prev = cur
    return prev[-1]


def dissimilarity(a, b) -> int:
    """Insert/delete edit distance: |a| + |b| - 2 LCS(a, b)."""
    a, b = _events(a), _events(b)
    return len(a) + len(b) - 2 * lcs_length(a, b)


@dataclass(frozen=True)
class CondensedDistanceMatrix:
    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.uint32)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.n < 2 or vals.shape != (self.n * (self.n - 1) // 2,):
            raise ValueError(f"condensed matrix of n={self.n} needs {self.n * (self.n - 1) // 2} values")

    def index(self, i: int, j: int) -> int:
        if i == j or not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError((i, j))
        if i > j:
            i, j = j, i
        return self.n * i - i * (i + 1) // 2 + j - i - 1

    def __getitem__(self, ij) -> int:
        i, j = ij
        return 0 if i == j else int(self.values[self.index(i, j)])

    def square(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        iu = np.triu_indices(self.n, 1)
        out[iu] = self.values
        out.T[iu] = self.values
        return out

    def take(self, indices) -> "CondensedDistanceMatrix":
        """Sub-matrix over the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        ii, jj = np.triu_indices(len(idx), 1)
        a, b = np.minimum(idx[ii], idx[jj]), np.maximum(idx[ii], idx[jj])
        pos = self.n * a - a * (a + 1) // 2 + b - a - 1
        return CondensedDistanceMatrix(len(idx), self.values[pos])

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, self.n))
            fh.write(self.values.astype("<u4", copy=False).tobytes())

    @classmethod
    def load(cls, path) -> "CondensedDistanceMatrix":
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) != _HEADER.size:
                raise ValueError(f"{path}: truncated header")
            magic, version, n = _HEADER.unpack(head)
            if magic != MAGIC:
                raise ValueError(f"{path}: not a distance cache (magic {magic!r})")
            if version != VERSION:
                raise ValueError(f"{path}: unsupported cache version {version}")
            vals = np.frombuffer(fh.read(), dtype="<u4")
        return cls(int(n), vals.astype(np.uint32))


def distance_matrix(bank: SequenceBank, workers: int | None = None) -> CondensedDistanceMatrix:
    """All pairwise dissimilarities of a bank, in (i<j) row-major order.

    Rows are spread over the numba thread pool; every pair has a fixed
    output slot, so the result does not depend on `workers`.
    """
    if len(bank) < 2:
        raise ValueError(f"need at least 2 sequences for a distance matrix, got {len(bank)}")
    _kernels.configure_threads(workers)
    flat, offsets = bank.encoded()
    return CondensedDistanceMatrix(len(bank), _kernels.condensed_distances(flat, offsets))


@dataclass(frozen=True)
class DistanceStats:
    count: int
    min: int
    max: int
    mean: float
    median: float
    histogram: dict[int, int]

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "median": self.median,
            "histogram": {str(k): v for k, v in self.histogram.items()},
        }


def distance_stats(matrix) -> DistanceStats:
    """Order statistics and a per-value histogram of the pair distances."""
    vals = matrix.values if isinstance(matrix, CondensedDistanceMatrix) else np.asarray(matrix)
    if vals.size == 0:
        raise ValueError("empty distance matrix")
    counts = np.bincount(vals.astype(np.int64))
    return DistanceStats(
        count=int(vals.size),
        min=int(vals.min()),
        max=int(vals.max()),
        mean=float(vals.mean(dtype=np.float64)),
        median=float(np.median(vals)),
        histogram={int(k): int(c) for k, c in enumerate(counts) if c},
    )


def write_stats_json(stats: DistanceStats, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stats.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
