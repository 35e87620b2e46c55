"""Order-invariant streaming accumulation of Gram and prototype statistics.

The Gram matrix is a plain sum of outer products h h^T and the target matrix
a sum of h y^T, so accumulators can be updated per sample, per batch, merged
across shards, and checkpointed, all yielding the same totals.

G is stored packed upper-triangular in 64-bit (half the memory of the full
matrix at M=10000) and expanded on demand.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, UndefinedPrototypeError, UnsupportedFormatError

SNAPSHOT_MAGIC = b"PFACC001"


class Accumulator:
    """Streaming (G, C, class counts) over projected sample vectors.

    ``D`` is the target dimension: K for one-hot classification, arbitrary
    for regression targets (in which case ``K`` may be 0 and class counts
    carry no semantics).
    """

    def __init__(self, M: int, D: int, K: int | None = None):
        if K is None:
            K = D
        self.M = M
        self.D = D
        self.K = K
        self._iu = np.triu_indices(M)
        self._g_packed = np.zeros(M * (M + 1) // 2, dtype=np.float64)
        self.C = np.zeros((M, D), dtype=np.float64)
        self.class_counts = np.zeros(K, dtype=np.int64)
        self.N = 0

    @property
    def G(self) -> np.ndarray:
        """Full symmetric Gram matrix, expanded from packed storage."""
        G = np.zeros((self.M, self.M), dtype=np.float64)
        G[self._iu] = self._g_packed
        G = G + G.T
        G[np.diag_indices(self.M)] /= 2.0
        return G

    def update(self, h: np.ndarray, y: np.ndarray, label: int | None = None) -> None:
        """Add one sample: G += h h^T, C += h y^T.

        ``label`` increments the class count; for one-hot ``y`` it defaults
        to the hot index.
        """
        h = np.asarray(h, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if h.shape != (self.M,):
            raise DimensionMismatchError(f"h has shape {h.shape}, expected ({self.M},)")
        if y.shape != (self.D,):
            raise DimensionMismatchError(f"y has shape {y.shape}, expected ({self.D},)")
        self._g_packed += np.outer(h, h)[self._iu]
        self.C += np.outer(h, y)
        if label is None and self.K == self.D:
            hot = np.nonzero(y == 1.0)[0]
            if hot.size == 1:
                label = int(hot[0])
        if label is not None:
            self.class_counts[label] += 1
        self.N += 1

    def update_batch(
        self,
        H: np.ndarray,
        Y: np.ndarray,
        labels: np.ndarray | None = None,
    ) -> None:
        """Vectorized update over rows of H (N x M) and Y (N x D)."""
        H = np.asarray(H, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if H.ndim != 2 or H.shape[1] != self.M:
            raise DimensionMismatchError(f"H has shape {H.shape}, expected (n, {self.M})")
        if Y.shape != (H.shape[0], self.D):
            raise DimensionMismatchError(f"Y has shape {Y.shape}, expected ({H.shape[0]}, {self.D})")
        self._g_packed += (H.T @ H)[self._iu]
        self.C += H.T @ Y
        if labels is None and self.K == self.D and H.shape[0] > 0:
            labels = np.argmax(Y, axis=1)
        if labels is not None:
            np.add.at(self.class_counts, np.asarray(labels, dtype=np.int64), 1)
        self.N += H.shape[0]

    def merge(self, other: "Accumulator") -> "Accumulator":
        """Component-wise sum with another accumulator of matching shape."""
        if (self.M, self.D, self.K) != (other.M, other.D, other.K):
            raise DimensionMismatchError("accumulator shapes differ")
        out = Accumulator(self.M, self.D, self.K)
        out._g_packed = self._g_packed + other._g_packed
        out.C = self.C + other.C
        out.class_counts = self.class_counts + other.class_counts
        out.N = self.N + other.N
        return out

    def copy(self) -> "Accumulator":
        out = Accumulator(self.M, self.D, self.K)
        out._g_packed = self._g_packed.copy()
        out.C = self.C.copy()
        out.class_counts = self.class_counts.copy()
        out.N = self.N
        return out

    def class_means(self) -> np.ndarray:
        """c_y / n_y for every seen class; raises if any seen count is zero
        when indexed. Returns an M x K matrix with NaN columns replaced by
        an error on access via :meth:`class_mean`."""
        means = np.full((self.M, self.K), np.nan)
        seen = self.class_counts > 0
        means[:, seen] = self.C[:, seen] / self.class_counts[seen]
        return means

    def class_mean(self, y: int) -> np.ndarray:
        if self.class_counts[y] == 0:
            raise UndefinedPrototypeError(f"class {y} has no samples")
        return self.C[:, y] / self.class_counts[y]

    def seen_classes(self) -> np.ndarray:
        return np.nonzero(self.class_counts > 0)[0]

    def snapshot(self) -> bytes:
        """Bit-exact 64-bit LE serialization of the full state."""
        buf = io.BytesIO()
        buf.write(SNAPSHOT_MAGIC)
        buf.write(struct.pack("<qqqq", self.M, self.D, self.K, self.N))
        buf.write(self._g_packed.astype("<f8").tobytes())
        buf.write(self.C.astype("<f8").tobytes())
        buf.write(self.class_counts.astype("<i8").tobytes())
        return buf.getvalue()

    @classmethod
    def restore(cls, data: bytes) -> "Accumulator":
        if data[:8] != SNAPSHOT_MAGIC:
            raise UnsupportedFormatError(f"bad snapshot magic {data[:8]!r}")
        M, D, K, N = struct.unpack_from("<qqqq", data, 8)
        acc = cls(M, D, K)
        offset = 8 + 32
        n_packed = M * (M + 1) // 2
        acc._g_packed = np.frombuffer(data, dtype="<f8", count=n_packed,
                                      offset=offset).astype(np.float64)
        offset += 8 * n_packed
        acc.C = np.frombuffer(data, dtype="<f8", count=M * D,
                              offset=offset).astype(np.float64).reshape(M, D)
        offset += 8 * M * D
        acc.class_counts = np.frombuffer(data, dtype="<i8", count=K,
                                         offset=offset).astype(np.int64)
        acc.N = N
        return acc

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.snapshot())

    @classmethod
    def load(cls, path: str | Path) -> "Accumulator":
        return cls.restore(Path(path).read_bytes())
