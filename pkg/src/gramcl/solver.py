"""Closed-form decorrelated head W_o = (G + lambda I)^{-1} C and ridge
parameter selection by per-task 80:20 cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json

import numpy as np
import scipy.linalg

from .accumulator import Accumulator
from .errors import (
    DegenerateSplitError,
    DimensionMismatchError,
    SingularityError,
    StepSizeError,
)

# lambda swept over 17 orders of magnitude: 1e-8 ... 1e8
DEFAULT_LAMBDA_GRID = tuple(10.0 ** e for e in range(-8, 9))

RESIDUAL_TOLERANCE = 1e-8
_JITTER_BASE = 1e-10
_JITTER_RETRIES = 3


@dataclass
class LambdaSchedule:
    grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    holdout_fraction: float = 0.2

    def __post_init__(self):
        g = tuple(self.grid)
        if any(v <= 0 for v in g) or any(a >= b for a, b in zip(g, g[1:])):
            raise ValueError("lambda grid must be strictly increasing and positive")
        self.grid = g


@dataclass
class DecorrelatedHead:
    W_o: np.ndarray
    lam: float
    residual: float
    jitter: float = 0.0

    def export(self, path: str | Path, dtype: str = "<f8") -> None:
        """Weights + JSON metadata, for inference-only deployments."""
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        (path / "weights.bin").write_bytes(self.W_o.astype(dtype).tobytes())
        meta = {
            "lambda": self.lam,
            "residual": self.residual,
            "jitter": self.jitter,
            "M": self.W_o.shape[0],
            "D": self.W_o.shape[1],
            "dtype": dtype,
        }
        (path / "head.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "DecorrelatedHead":
        path = Path(path)
        meta = json.loads((path / "head.json").read_text())
        W_o = np.frombuffer(
            (path / "weights.bin").read_bytes(), dtype=meta["dtype"]
        ).reshape(meta["M"], meta["D"]).astype(np.float64)
        return cls(W_o=W_o, lam=meta["lambda"], residual=meta["residual"],
                   jitter=meta["jitter"])


def solve(G: np.ndarray, C: np.ndarray, lam: float) -> DecorrelatedHead:
    """Solve (G + lam I) W_o = C by Cholesky; never forms an inverse.

    With lam = 0 and a numerically singular G, escalating diagonal jitter
    (1e-10 * trace(G)/M, x10 per retry, 3 retries) is applied before giving
    up with a SingularityError.
    """
    G = np.asarray(G, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    M = G.shape[0]
    if G.shape != (M, M) or C.shape[0] != M:
        raise DimensionMismatchError(f"G is {G.shape}, C is {C.shape}")

    scale = np.trace(G) / M if M else 0.0
    jitter = 0.0
    A = G + lam * np.eye(M)
    for attempt in range(_JITTER_RETRIES + 1):
        try:
            cho = scipy.linalg.cho_factor(
                A + jitter * np.eye(M), lower=True, check_finite=False
            )
            W_o = scipy.linalg.cho_solve(cho, C, check_finite=False)
            break
        except np.linalg.LinAlgError:
            jitter = _JITTER_BASE * scale * 10.0**attempt if scale > 0 else 10.0 ** (
                attempt - 12
            )
    else:
        min_eig = float(np.linalg.eigvalsh(A)[0])
        raise SingularityError(
            f"Cholesky failed after jitter escalation (min eigenvalue {min_eig:.3e})",
            min_eigenvalue=min_eig,
        )

    c_norm = np.linalg.norm(C)
    residual = float(np.linalg.norm(A @ W_o - C) / c_norm) if c_norm > 0 else 0.0
    return DecorrelatedHead(W_o=W_o, lam=lam, residual=residual, jitter=jitter)


def score(head: DecorrelatedHead, h: np.ndarray) -> np.ndarray:
    """h^T W_o for a single vector or batch of rows."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != head.W_o.shape[0]:
        raise DimensionMismatchError(
            f"h dim {h.shape[-1]} != head input dim {head.W_o.shape[0]}"
        )
    return h @ head.W_o


def predict(head: DecorrelatedHead, h: np.ndarray,
            classes: np.ndarray | None = None) -> np.ndarray:
    """argmax prediction with lowest-index tie-break, optionally restricted
    to a subset of class columns (CIL: classes seen so far)."""
    s = score(head, h)
    s = np.atleast_2d(s)
    if classes is not None:
        classes = np.asarray(classes)
        return classes[np.argmax(s[:, classes], axis=1)]
    return np.argmax(s, axis=1)


def cross_validate_lambda(
    task_H: np.ndarray,
    task_Y: np.ndarray,
    base_acc: Accumulator,
    schedule: LambdaSchedule,
    seed: int,
    task_labels: np.ndarray | None = None,
    fallback_lam: float = 1e-2,
) -> tuple[float, Accumulator]:
    """Select lambda on the current task only, then fold the task in.

    The task's samples are split 80:20 by seed; statistics from base_acc
    (all previous tasks) plus the 80% portion back each grid solve, MSE is
    measured on the held-out 20%, the smallest-MSE lambda wins (lowest
    lambda on ties), and the 20% is then added back so the returned
    accumulator contains the full task. Only base_acc and the current
    task's samples are read; prior-task samples are unreachable from here.

    Tasks with fewer than 5 samples cannot be split and fall back to
    ``fallback_lam`` (callers pass the previous task's selection).
    """
    task_H = np.asarray(task_H, dtype=np.float64)
    task_Y = np.asarray(task_Y, dtype=np.float64)
    n = task_H.shape[0]

    if n < 5:
        acc = base_acc.copy()
        if n:
            acc.update_batch(task_H, task_Y, labels=task_labels)
        if n == 0:
            raise DegenerateSplitError("task has no samples")
        return fallback_lam, acc

    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    n_hold = max(1, int(round(schedule.holdout_fraction * n)))
    hold, fit = perm[:n_hold], perm[n_hold:]

    acc = base_acc.copy()
    acc.update_batch(task_H[fit], task_Y[fit],
                     labels=None if task_labels is None else task_labels[fit])
    G_fit = acc.G

    best_lam, best_mse = None, np.inf
    for lam in schedule.grid:
        head = solve(G_fit, acc.C, lam)
        pred = task_H[hold] @ head.W_o
        mse = float(np.mean((pred - task_Y[hold]) ** 2))
        if mse < best_mse:  # strict: lowest lambda wins ties
            best_lam, best_mse = lam, mse

    acc.update_batch(task_H[hold], task_Y[hold],
                     labels=None if task_labels is None else task_labels[hold])
    return best_lam, acc


def fit_iterative_oracle(
    G: np.ndarray,
    C: np.ndarray,
    lam: float,
    steps: int = 5000,
    lr: float | None = None,
) -> np.ndarray:
    """Gradient descent on ||Y^T - W^T H||^2 + lam ||W||^2, expressed through
    the sufficient statistics: grad = 2 ((G + lam I) W - C).

    Independent verification oracle for :func:`solve`; test scale only.
    """
    G = np.asarray(G, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    A = G + lam * np.eye(G.shape[0])
    if lr is None:
        # largest eigenvalue bounds the Lipschitz constant of the gradient
        lr = 1.0 / (2.0 * float(np.linalg.eigvalsh(A)[-1]) + 1e-30)
    W = np.zeros_like(C)
    c_norm = np.linalg.norm(C) + 1e-30
    for _ in range(steps):
        grad = 2.0 * (A @ W - C)
        W -= lr * grad
        if not np.all(np.isfinite(W)) or np.linalg.norm(W) > 1e12 * c_norm:
            raise StepSizeError(f"iterative solver diverged at lr={lr}")
    return W
