"""Frozen random projection layer: h = phi(f^T W).

W is regenerated from its spec rather than persisted. Reproducibility relies
on numpy's PCG64 stream and ziggurat standard_normal, both of which are
stability-guaranteed across platforms for a fixed numpy major series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ParameterError

ACTIVATIONS = ("identity", "relu", "square")
DISTRIBUTIONS = ("gaussian", "bipolar")


@dataclass(frozen=True)
class ProjectionSpec:
    L: int
    M: int
    distribution: str = "gaussian"
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        if self.L < 1 or self.M < 1:
            raise ParameterError(f"need L >= 1 and M >= 1, got L={self.L}, M={self.M}")
        if self.distribution not in DISTRIBUTIONS:
            raise ParameterError(f"unknown distribution {self.distribution!r}")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")


class ProjectionMatrix:
    """Immutable L x M random matrix with its generating spec."""

    def __init__(self, W: np.ndarray, spec: ProjectionSpec):
        W = np.asarray(W, dtype=np.float64)
        W.setflags(write=False)
        self.W = W
        self.spec = spec


def generate(spec: ProjectionSpec) -> ProjectionMatrix:
    """Sample W i.i.d. from the declared distribution; bit-reproducible."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    if spec.distribution == "gaussian":
        W = rng.standard_normal((spec.L, spec.M))
    else:
        W = rng.integers(0, 2, size=(spec.L, spec.M)).astype(np.float64) * 2.0 - 1.0
    return ProjectionMatrix(W, spec)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "identity":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z * z


def project(proj: ProjectionMatrix, f: np.ndarray) -> np.ndarray:
    """phi(f^T W) for a single vector or a batch of row vectors."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != proj.spec.L:
        raise DimensionMismatchError(
            f"feature dim {f.shape[-1]} != projection input dim {proj.spec.L}"
        )
    single = f.ndim == 1
    if single:
        f = f[None, :]
    # row-wise matvecs keep batch rows bit-identical to single-vector calls
    # (a blocked gemm may not)
    out = np.empty((f.shape[0], proj.spec.M), dtype=np.float64)
    for i in range(f.shape[0]):
        out[i] = proj.W.T @ f[i]
    out = _activate(out, proj.spec.activation)
    return out[0] if single else out


def expand_pairwise(f: np.ndarray) -> np.ndarray:
    """All pairwise products f_i * f_j for i <= j, lexicographic in (i, j).

    Exact-interaction oracle; length L(L+1)/2 grows quadratically, so callers
    should truncate features first (e.g. to the leading 100 dimensions).
    """
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    if single:
        f = f[None, :]
    L = f.shape[1]
    i, j = np.triu_indices(L)
    out = f[:, i] * f[:, j]
    return out[0] if single else out


def pack_bipolar(proj: ProjectionMatrix) -> bytes:
    """1-bit packed export of a bipolar W (+1 -> bit 1). Not a compute path."""
    if proj.spec.distribution != "bipolar":
        raise ParameterError("only bipolar matrices can be bit-packed")
    bits = (proj.W.ravel(order="C") > 0).astype(np.uint8)
    return np.packbits(bits).tobytes()


def unpack_bipolar(data: bytes, spec: ProjectionSpec) -> ProjectionMatrix:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: spec.L * spec.M]
    W = bits.astype(np.float64).reshape(spec.L, spec.M) * 2.0 - 1.0
    return ProjectionMatrix(W, spec)
