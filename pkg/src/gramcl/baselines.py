"""Comparison heads: nearest-class-mean cosine scoring and streaming LDA
with Mahalanobis scoring.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    SingularityError,
    UndefinedPrototypeError,
    UndefinedSimilarityError,
)


class NcmHead:
    """Class prototypes as exact running means; cosine-similarity scoring."""

    def __init__(self, dim: int, K: int):
        self.dim = dim
        self.K = K
        self.sums = np.zeros((K, dim), dtype=np.float64)
        self.counts = np.zeros(K, dtype=np.int64)

    def update(self, f: np.ndarray, y: int) -> None:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.dim,):
            raise DimensionMismatchError(f"f has shape {f.shape}, expected ({self.dim},)")
        self.sums[y] += f
        self.counts[y] += 1

    def update_batch(self, F: np.ndarray, labels: np.ndarray) -> None:
        F = np.asarray(F, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        np.add.at(self.sums, labels, F)
        np.add.at(self.counts, labels, 1)

    def prototypes(self, classes: np.ndarray | None = None) -> np.ndarray:
        if classes is None:
            classes = np.nonzero(self.counts > 0)[0]
        if np.any(self.counts[classes] == 0):
            missing = [int(c) for c in classes if self.counts[c] == 0]
            raise UndefinedPrototypeError(f"classes without samples: {missing}")
        return self.sums[classes] / self.counts[classes, None]

    def seen_classes(self) -> np.ndarray:
        return np.nonzero(self.counts > 0)[0]


def ncm_score(head: NcmHead, f: np.ndarray,
              classes: np.ndarray | None = None) -> np.ndarray:
    """Cosine similarity of f (or rows of f) to each class prototype."""
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    F = np.atleast_2d(f)
    if classes is None:
        classes = head.seen_classes()
    protos = head.prototypes(classes)
    p_norms = np.linalg.norm(protos, axis=1)
    f_norms = np.linalg.norm(F, axis=1)
    if np.any(p_norms == 0):
        raise UndefinedSimilarityError("zero-norm class prototype")
    if np.any(f_norms == 0):
        raise UndefinedSimilarityError("zero-norm input vector")
    sims = (F @ protos.T) / (f_norms[:, None] * p_norms[None, :])
    return sims[0] if single else sims


def ncm_predict(head: NcmHead, f: np.ndarray,
                classes: np.ndarray | None = None) -> np.ndarray:
    if classes is None:
        classes = head.seen_classes()
    sims = np.atleast_2d(ncm_score(head, f, classes))
    return np.asarray(classes)[np.argmax(sims, axis=1)]


class LdaState:
    """Streaming shared-covariance LDA over K classes.

    Maintains per-class sums and the raw second-moment matrix in one pass;
    the pooled (shrunken) covariance is derived on demand.
    """

    def __init__(self, dim: int, K: int, shrinkage: float | None = None,
                 uniform_priors: bool = False):
        self.dim = dim
        self.K = K
        self.shrinkage = shrinkage  # None -> 1e-4 * trace(S)/dim at solve time
        self.uniform_priors = uniform_priors
        self.sums = np.zeros((K, dim), dtype=np.float64)
        self.counts = np.zeros(K, dtype=np.int64)
        self.moment2 = np.zeros((dim, dim), dtype=np.float64)  # sum of f f^T
        self.N = 0

    def update(self, f: np.ndarray, y: int) -> None:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != (self.dim,):
            raise DimensionMismatchError(f"f has shape {f.shape}, expected ({self.dim},)")
        self.sums[y] += f
        self.counts[y] += 1
        self.moment2 += np.outer(f, f)
        self.N += 1

    def update_batch(self, F: np.ndarray, labels: np.ndarray) -> None:
        F = np.asarray(F, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        np.add.at(self.sums, labels, F)
        np.add.at(self.counts, labels, 1)
        self.moment2 += F.T @ F
        self.N += F.shape[0]

    def seen_classes(self) -> np.ndarray:
        return np.nonzero(self.counts > 0)[0]

    def class_means(self, classes: np.ndarray) -> np.ndarray:
        if np.any(self.counts[classes] == 0):
            raise UndefinedPrototypeError("class without samples")
        return self.sums[classes] / self.counts[classes, None]

    def priors(self, classes: np.ndarray) -> np.ndarray:
        if self.uniform_priors:
            return np.full(len(classes), 1.0 / len(classes))
        return self.counts[classes] / self.N

    def covariance(self) -> np.ndarray:
        """Pooled within-class scatter / N, from the one-pass statistics."""
        seen = self.seen_classes()
        means = self.class_means(seen)
        between = (means * self.counts[seen, None]).T @ means
        return (self.moment2 - between) / self.N

    def _solve_cov(self, B: np.ndarray) -> np.ndarray:
        S = self.covariance()
        eps = self.shrinkage
        if eps is None:
            eps = 1e-4 * np.trace(S) / self.dim
        A = S + eps * np.eye(self.dim)
        try:
            cho = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularityError(f"singular covariance with shrinkage {eps}") from exc
        return scipy.linalg.cho_solve(cho, B, check_finite=False)


def lda_score(state: LdaState, f: np.ndarray,
              classes: np.ndarray | None = None) -> np.ndarray:
    """Discriminant psi_y = f^T S^-1 m_y - 0.5 m_y^T S^-1 m_y + log(pi_y)."""
    if state.N < 2:
        raise SingularityError("need at least 2 samples before LDA scoring")
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    F = np.atleast_2d(f)
    if classes is None:
        classes = state.seen_classes()
    means = state.class_means(classes)
    Sm = state._solve_cov(means.T)  # dim x k
    quad = np.einsum("ik,ki->i", means, Sm)
    psi = F @ Sm - 0.5 * quad[None, :] + np.log(state.priors(classes))[None, :]
    return psi[0] if single else psi


def lda_predict(state: LdaState, f: np.ndarray,
                classes: np.ndarray | None = None) -> np.ndarray:
    if classes is None:
        classes = state.seen_classes()
    psi = np.atleast_2d(lda_score(state, f, classes))
    return np.asarray(classes)[np.argmax(psi, axis=1)]


def mahalanobis_score(state: LdaState, f: np.ndarray,
                      classes: np.ndarray | None = None) -> np.ndarray:
    """d_M^2 - log(pi_y^2); argmin prediction. Equals -2 psi_y + const, so
    its argmin matches the argmax of :func:`lda_score` exactly."""
    if state.N < 2:
        raise SingularityError("need at least 2 samples before scoring")
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    F = np.atleast_2d(f)
    if classes is None:
        classes = state.seen_classes()
    means = state.class_means(classes)
    Sm = state._solve_cov(means.T)
    Sf = state._solve_cov(F.T)
    quad_m = np.einsum("ik,ki->i", means, Sm)
    quad_f = np.einsum("ni,in->n", F, Sf)
    d2 = quad_f[:, None] - 2.0 * (F @ Sm) + quad_m[None, :]
    out = d2 - 2.0 * np.log(state.priors(classes))[None, :]
    return out[0] if single else out


def mahalanobis_predict(state: LdaState, f: np.ndarray,
                        classes: np.ndarray | None = None) -> np.ndarray:
    if classes is None:
        classes = state.seen_classes()
    vals = np.atleast_2d(mahalanobis_score(state, f, classes))
    return np.asarray(classes)[np.argmin(vals, axis=1)]
