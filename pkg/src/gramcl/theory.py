"""Monte-Carlo verification of the projection-theory claims: inner-product
and norm concentration, prototype decorrelation, similarity-histogram
separation, and the nonlinearity/interaction study.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import projection, solver
from .accumulator import Accumulator
from .errors import ParameterError, ValidationError
from .protocols import subseed

DEFAULT_TRIALS = 2000


@dataclass
class ConcentrationReport:
    M_values: list[int]
    trials: int
    # per-M statistics of the normalized inner product (W^T f)^T (W^T f') / (M sigma^2)
    empirical_mean: list[float]
    std_error: list[float]
    mean_abs_deviation: list[float]
    tail_fraction: list[float]
    epsilon: float
    target: float  # f^T f'

    def rows(self) -> list[dict]:
        return [
            {
                "M": self.M_values[i],
                "mean": self.empirical_mean[i],
                "std_error": self.std_error[i],
                "mean_abs_deviation": self.mean_abs_deviation[i],
                "tail_fraction": self.tail_fraction[i],
            }
            for i in range(len(self.M_values))
        ]


def _sample_W(rng: np.random.Generator, L: int, M: int, sigma: float,
              distribution: str) -> np.ndarray:
    if distribution == "gaussian":
        return sigma * rng.standard_normal((L, M))
    if distribution == "bipolar":
        # +-sigma entries: zero mean, variance sigma^2
        return sigma * (rng.integers(0, 2, size=(L, M)) * 2.0 - 1.0)
    raise ParameterError(f"unknown distribution {distribution!r}")


def inner_product_test(
    L: int,
    M_values: list[int],
    f: np.ndarray,
    f_prime: np.ndarray,
    trials: int = DEFAULT_TRIALS,
    sigma: float = 1.0,
    epsilon: float = 0.5,
    seed: int = 0,
    distribution: str = "gaussian",
) -> ConcentrationReport:
    """Sample W repeatedly and check that (W^T f)^T (W^T f') / (M sigma^2)
    concentrates on f^T f' as M grows."""
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    f = np.asarray(f, dtype=np.float64)
    f_prime = np.asarray(f_prime, dtype=np.float64)
    target = float(f @ f_prime)

    means, stderrs, mads, tails = [], [], [], []
    for mi, M in enumerate(M_values):
        rng = np.random.Generator(np.random.PCG64(subseed(seed, "ip", mi)))
        vals = np.empty(trials)
        for t in range(trials):
            W = _sample_W(rng, L, M, sigma, distribution)
            vals[t] = (W.T @ f) @ (W.T @ f_prime) / (M * sigma**2)
        dev = vals - target
        means.append(float(vals.mean()))
        stderrs.append(float(vals.std(ddof=1) / np.sqrt(trials)))
        mads.append(float(np.abs(dev).mean()))
        tails.append(float(np.mean(np.abs(dev) > epsilon)))
    return ConcentrationReport(
        M_values=list(M_values), trials=trials, empirical_mean=means,
        std_error=stderrs, mean_abs_deviation=mads, tail_fraction=tails,
        epsilon=epsilon, target=target,
    )


def norm_concentration_test(
    L: int,
    M_values: list[int],
    f: np.ndarray,
    trials: int = DEFAULT_TRIALS,
    sigma: float = 1.0,
    epsilon: float = 1.0,
    seed: int = 0,
    distribution: str = "gaussian",
) -> ConcentrationReport:
    """Dispersion of ||W^T f|| across draws of W: the relative spread should
    shrink as M grows."""
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    f = np.asarray(f, dtype=np.float64)

    means, stderrs, rel_stds, tails = [], [], [], []
    for mi, M in enumerate(M_values):
        rng = np.random.Generator(np.random.PCG64(subseed(seed, "norm", mi)))
        norms = np.empty(trials)
        for t in range(trials):
            W = _sample_W(rng, L, M, sigma, distribution)
            norms[t] = np.linalg.norm(W.T @ f)
        mu = norms.mean()
        means.append(float(mu))
        stderrs.append(float(norms.std(ddof=1) / np.sqrt(trials)))
        rel_stds.append(float(norms.std(ddof=1) / mu))
        tails.append(float(np.mean(np.abs(norms - mu) > epsilon * sigma**2)))
    return ConcentrationReport(
        M_values=list(M_values), trials=trials, empirical_mean=means,
        std_error=stderrs, mean_abs_deviation=rel_stds, tail_fraction=tails,
        epsilon=epsilon, target=0.0,
    )


def _pearson_offdiag(vectors: np.ndarray) -> tuple[np.ndarray, float]:
    """K x K Pearson correlation matrix between row vectors, plus the mean
    absolute off-diagonal value."""
    stds = vectors.std(axis=1)
    if np.any(stds == 0):
        raise ValidationError("constant prototype vector: correlation undefined")
    cc = np.corrcoef(vectors)
    K = cc.shape[0]
    off = cc[~np.eye(K, dtype=bool)]
    return cc, float(np.abs(off).mean())


def prototype_correlation_report(
    features: np.ndarray,
    labels: np.ndarray,
    method: str = "ncm",
    lam: float = 1e-6,
) -> dict:
    """Pairwise Pearson correlations between class prototypes.

    ``ncm``: raw class means. ``decorrelated``: columns of (G + lam I)^{-1} C,
    the prototypes after Gram-matrix decorrelation.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    K = int(labels.max()) + 1
    if K < 2 or np.min(np.bincount(labels, minlength=K)) < 2:
        raise ParameterError("need >= 2 classes with >= 2 samples each")

    if method == "ncm":
        protos = np.array([features[labels == y].mean(axis=0) for y in range(K)])
    elif method == "decorrelated":
        acc = Accumulator(features.shape[1], K, K)
        Y = np.zeros((len(labels), K))
        Y[np.arange(len(labels)), labels] = 1.0
        acc.update_batch(features, Y, labels=labels)
        head = solver.solve(acc.G, acc.C, lam)
        protos = head.W_o.T  # K x dim
    else:
        raise ParameterError(f"unknown method {method!r}")

    cc, mean_off = _pearson_offdiag(protos)
    return {"method": method, "correlation": cc, "mean_offdiag": mean_off}


def similarity_histogram_report(
    features: np.ndarray,
    labels: np.ndarray,
    head_kind: str = "ncm",
    lam: float = 1e-6,
    bins: int = 100,
) -> dict:
    """Own-class vs other-class similarity histograms and their normalized
    intersection (0 = fully separated, 1 = indistinguishable)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    K = int(labels.max()) + 1
    N = len(labels)

    if head_kind == "ncm":
        protos = np.array([features[labels == y].mean(axis=0) for y in range(K)])
        f_norm = np.linalg.norm(features, axis=1) + 1e-30
        p_norm = np.linalg.norm(protos, axis=1) + 1e-30
        sims = (features @ protos.T) / (f_norm[:, None] * p_norm[None, :])
    elif head_kind == "decorrelated":
        acc = Accumulator(features.shape[1], K, K)
        Y = np.zeros((N, K))
        Y[np.arange(N), labels] = 1.0
        acc.update_batch(features, Y, labels=labels)
        head = solver.solve(acc.G, acc.C, lam)
        sims = features @ head.W_o
    else:
        raise ParameterError(f"unknown head kind {head_kind!r}")

    own_mask = np.zeros_like(sims, dtype=bool)
    own_mask[np.arange(N), labels] = True
    own = sims[own_mask]
    other = sims[~own_mask]

    lo = min(own.min(), other.min())
    hi = max(own.max(), other.max())
    edges = np.linspace(lo, hi, bins + 1)
    h_own, _ = np.histogram(own, bins=edges, density=False)
    h_other, _ = np.histogram(other, bins=edges, density=False)
    p_own = h_own / max(1, h_own.sum())
    p_other = h_other / max(1, h_other.sum())
    overlap = float(np.minimum(p_own, p_other).sum())
    return {
        "head_kind": head_kind,
        "bin_edges": edges,
        "own_class_hist": h_own,
        "other_class_hist": h_other,
        "overlap": overlap,
    }


def _gram_head_accuracy(H_train: np.ndarray, labels_train: np.ndarray,
                        H_test: np.ndarray, labels_test: np.ndarray,
                        K: int, lam: float) -> float:
    acc = Accumulator(H_train.shape[1], K, K)
    Y = np.zeros((len(labels_train), K))
    Y[np.arange(len(labels_train)), labels_train] = 1.0
    acc.update_batch(H_train, Y, labels=labels_train)
    head = solver.solve(acc.G, acc.C, lam)
    pred = np.argmax(H_test @ head.W_o, axis=1)
    return float(np.mean(pred == labels_test))


def interaction_study(
    train_features: np.ndarray,
    train_labels: np.ndarray,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    M_values: list[int] = (2000,),
    truncate: int = 100,
    lam: float = 1e-2,
    seed: int = 0,
) -> dict:
    """Compare Gram-head accuracy on raw truncated features, the exact
    pairwise-product expansion, and random projections with and without
    nonlinearity. Shows what the nonlinearity recovers of the exact
    interaction terms."""
    Xtr = np.asarray(train_features, dtype=np.float64)[:, :truncate]
    Xte = np.asarray(test_features, dtype=np.float64)[:, :truncate]
    ytr = np.asarray(train_labels, dtype=np.int64)
    yte = np.asarray(test_labels, dtype=np.int64)
    K = int(max(ytr.max(), yte.max())) + 1
    L = Xtr.shape[1]

    results = {
        "raw": _gram_head_accuracy(Xtr, ytr, Xte, yte, K, lam),
        "pairwise_oracle": _gram_head_accuracy(
            projection.expand_pairwise(Xtr), ytr,
            projection.expand_pairwise(Xte), yte, K, lam,
        ),
        "rp_nonlinear": {},
        "rp_linear": {},
    }
    for mi, M in enumerate(M_values):
        for act, key in (("relu", "rp_nonlinear"), ("identity", "rp_linear")):
            spec = projection.ProjectionSpec(
                L=L, M=M, activation=act, seed=subseed(seed, "interaction", mi)
            )
            proj = projection.generate(spec)
            Htr = projection.project(proj, Xtr)
            Hte = projection.project(proj, Xte)
            results[key][M] = _gram_head_accuracy(Htr, ytr, Hte, yte, K, lam)
    return results
