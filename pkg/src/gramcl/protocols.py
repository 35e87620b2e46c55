"""End-to-end CIL / DIL / task-agnostic experiment drivers and metrics.

All randomness flows from one master seed through named sub-seeds, so a run
is bit-reproducible from its config.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field, asdict
from typing import Any

import numpy as np

from . import baselines, projection, solver, store
from .accumulator import Accumulator
from .errors import ConfigError, GramclError
from .solver import LambdaSchedule

METHODS = ("rp_gram", "gram", "ncm", "lda")


def subseed(master: int, *key) -> int:
    """Deterministic named sub-seed derived from the master seed."""
    parts = [master] + [
        zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key
    ]
    ss = np.random.SeedSequence(parts)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ScheduleConfig:
    """Gaussian class-drift schedule for task-agnostic streams."""

    micro_tasks: int = 200
    batches_per_micro_task: int = 5
    batch_size: int = 48
    width: float = 5.0  # std of the class-index Gaussian; inf -> uniform
    checkpoint_interval: int = 20  # micro-tasks between head re-solves
    queue_fraction: float = 0.1  # holdout queue, as fraction of new samples


@dataclass
class RunConfig:
    dataset: str
    protocol: str = "cil"  # "cil" | "dil" | "task_agnostic"
    method: str = "rp_gram"
    T: int = 5
    seed: int = 0
    M: int = 2000
    distribution: str = "gaussian"
    activation: str = "relu"
    lambda_grid: tuple[float, ...] = solver.DEFAULT_LAMBDA_GRID
    fixed_lambda: float | None = None
    target_mode: str = "onehot"  # "onehot" | "regression"
    baseline_on_projection: bool = False  # ncm/lda on projected features
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.protocol not in ("cil", "dil", "task_agnostic"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.target_mode not in ("onehot", "regression"):
            raise ConfigError(f"unknown target mode {self.target_mode!r}")
        if isinstance(self.schedule, dict):
            self.schedule = ScheduleConfig(**self.schedule)
        self.lambda_grid = tuple(self.lambda_grid)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class RunResult:
    config: dict[str, Any]
    R: np.ndarray  # T x T lower-triangular accuracy matrix
    avg_acc: list[float]
    forgetting: list[float | None]
    lambdas: list[float | None]
    wall_clock: dict[str, float]
    domain_accuracy: np.ndarray | None = None  # DIL: T x n_domains
    domain_val_counts: np.ndarray | None = None
    checkpoints: list[dict[str, float]] | None = None  # task-agnostic curves

    @property
    def final_avg_acc(self) -> float:
        return self.avg_acc[-1]

    def to_dict(self) -> dict[str, Any]:
        out = {
            "config": self.config,
            "R": self.R.tolist(),
            "avg_acc": self.avg_acc,
            "forgetting": self.forgetting,
            "lambdas": self.lambdas,
            "wall_clock": self.wall_clock,
        }
        if self.domain_accuracy is not None:
            out["domain_accuracy"] = self.domain_accuracy.tolist()
            out["domain_val_counts"] = self.domain_val_counts.tolist()
        if self.checkpoints is not None:
            out["checkpoints"] = self.checkpoints
        return out


def avg_accuracy(R: np.ndarray, t: int) -> float:
    """A_t: mean of R[t, 1..t] (1-based t)."""
    return float(np.mean(R[t - 1, :t]))


def avg_forgetting(R: np.ndarray, t: int) -> float:
    """F_t: mean over earlier tasks of the worst accuracy drop. t >= 2."""
    if t < 2:
        raise ValueError("forgetting is undefined before the second task")
    drops = [np.max(R[:t - 1, i]) - R[t - 1, i] for i in range(t - 1)]
    return float(np.mean(drops))


def _one_hot(labels: np.ndarray, K: int) -> np.ndarray:
    Y = np.zeros((len(labels), K), dtype=np.float64)
    Y[np.arange(len(labels)), labels] = 1.0
    return Y


class _Pipeline:
    """Shared state for one run: optional projection plus the chosen head."""

    def __init__(self, config: RunConfig, manifest: store.DatasetManifest,
                 target_dim: int):
        self.config = config
        self.K = manifest.K
        self.proj = None
        dim = manifest.L
        if config.method == "rp_gram" or (
            config.method in ("ncm", "lda") and config.baseline_on_projection
        ):
            spec = projection.ProjectionSpec(
                L=manifest.L, M=config.M, distribution=config.distribution,
                activation=config.activation,
                seed=subseed(config.seed, "projection"),
            )
            self.proj = projection.generate(spec)
            dim = config.M
        self.dim = dim
        self.acc = Accumulator(dim, target_dim, manifest.K)
        self.ncm = baselines.NcmHead(dim, manifest.K)
        self.lda = baselines.LdaState(dim, manifest.K)
        self.head = None
        self.lam = None

    def transform(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F, dtype=np.float64)
        if self.proj is None:
            return F
        return projection.project(self.proj, F)

    def train_task(self, F: np.ndarray, labels: np.ndarray,
                   Y: np.ndarray, task_index: int) -> None:
        cfg = self.config
        H = self.transform(F)
        if cfg.method == "ncm":
            self.ncm.update_batch(H, labels)
            return
        if cfg.method == "lda":
            self.lda.update_batch(H, labels)
            return
        if cfg.fixed_lambda is not None:
            self.acc.update_batch(H, Y, labels=labels)
            self.lam = cfg.fixed_lambda
        else:
            self.lam, self.acc = solver.cross_validate_lambda(
                H, Y, self.acc, LambdaSchedule(grid=cfg.lambda_grid),
                seed=subseed(cfg.seed, "cv", task_index),
                task_labels=labels,
                fallback_lam=self.lam if self.lam is not None else 1e-2,
            )
        self.head = solver.solve(self.acc.G, self.acc.C, self.lam)

    def predict(self, F: np.ndarray, classes: np.ndarray) -> np.ndarray:
        H = self.transform(F)
        if self.config.method == "ncm":
            return baselines.ncm_predict(self.ncm, H, classes)
        if self.config.method == "lda":
            return baselines.lda_predict(self.lda, H, classes)
        return solver.predict(self.head, H, classes)


def _class_targets(targets: np.ndarray, labels: np.ndarray, K: int) -> np.ndarray:
    """Per-class mean target vectors, for nearest-target evaluation in
    regression mode."""
    D = targets.shape[1]
    sums = np.zeros((K, D))
    counts = np.zeros(K)
    np.add.at(sums, labels, targets)
    np.add.at(counts, labels, 1)
    out = np.zeros_like(sums)
    seen = counts > 0
    out[seen] = sums[seen] / counts[seen, None]
    return out


def run(config: RunConfig) -> RunResult:
    """Drive a CIL or DIL experiment end to end."""
    if config.protocol == "task_agnostic":
        return run_task_agnostic(config)

    fs = store.FeatureStore(config.dataset)
    manifest = fs.manifest
    if config.protocol == "dil":
        split = store.split_dil(fs)
    else:
        split = store.split_cil(fs, config.T, subseed(config.seed, "split"))
    T = split.T

    train_F = fs.features("train").astype(np.float64)
    train_labels = fs.labels("train").astype(np.int64)
    has_val = "val" in manifest.splits and manifest.splits["val"] > 0
    val_F = fs.features("val").astype(np.float64) if has_val else train_F
    val_labels = fs.labels("val").astype(np.int64) if has_val else train_labels
    if not has_val:
        # fall back to evaluating on the train split, task-restricted
        split = store.TaskSplit(T=T, train_ids=split.train_ids,
                                val_ids=split.train_ids,
                                task_classes=split.task_classes, seed=split.seed)

    regression = config.target_mode == "regression"
    if regression:
        if manifest.target_dim is None:
            raise ConfigError("regression mode requires a store with targets")
        train_T = fs.targets("train").astype(np.float64)
        class_targets = _class_targets(train_T, train_labels, manifest.K)
        target_dim = manifest.target_dim
    else:
        train_T = None
        target_dim = manifest.K

    pipe = _Pipeline(config, manifest, target_dim)

    R = np.zeros((T, T))
    lambdas: list[float | None] = []
    avg_accs, forgettings = [], []
    wall = {"train": 0.0, "solve": 0.0, "eval": 0.0}
    n_domains = len(manifest.domains) if manifest.domains else 0
    dom_acc = np.zeros((T, n_domains)) if config.protocol == "dil" and n_domains else None
    dom_counts = None

    seen_classes: set[int] = set()
    for t in range(T):
        ids = split.train_ids[t]
        F_t = train_F[ids]
        labels_t = train_labels[ids]
        if regression:
            Y_t = train_T[ids]
        else:
            Y_t = _one_hot(labels_t, manifest.K)
        seen_classes.update(int(c) for c in np.unique(labels_t))
        classes = np.array(sorted(seen_classes))

        t0 = time.perf_counter()
        try:
            pipe.train_task(F_t, labels_t, Y_t, t)
        except GramclError as exc:
            raise type(exc)(f"task {t}: {exc}") from exc
        wall["train"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        if config.protocol == "dil":
            # overall accuracy on the full validation set, repeated per column
            pred = _predict_eval(pipe, val_F, classes, class_targets if regression else None)
            overall = float(np.mean(pred == val_labels)) if len(val_labels) else 0.0
            R[t, : t + 1] = overall
            if dom_acc is not None and fs.has_domains("val" if has_val else "train"):
                val_dom = fs.domains("val" if has_val else "train").astype(np.int64)
                if dom_counts is None:
                    dom_counts = np.array([np.sum(val_dom == d) for d in range(n_domains)])
                for d in range(n_domains):
                    mask = val_dom == d
                    if mask.any():
                        dom_acc[t, d] = float(np.mean(pred[mask] == val_labels[mask]))
        else:
            for i in range(t + 1):
                v_ids = split.val_ids[i]
                if len(v_ids) == 0:
                    R[t, i] = 0.0
                    continue
                pred = _predict_eval(pipe, val_F[v_ids], classes,
                                     class_targets if regression else None)
                R[t, i] = float(np.mean(pred == val_labels[v_ids]))
        wall["eval"] += time.perf_counter() - t0

        lambdas.append(pipe.lam)
        avg_accs.append(avg_accuracy(R, t + 1))
        forgettings.append(avg_forgetting(R, t + 1) if t >= 1 else None)

    return RunResult(
        config=config.to_dict(), R=R, avg_acc=avg_accs, forgetting=forgettings,
        lambdas=lambdas, wall_clock=wall, domain_accuracy=dom_acc,
        domain_val_counts=dom_counts,
    )


def _predict_eval(pipe: _Pipeline, F: np.ndarray, classes: np.ndarray,
                  class_targets: np.ndarray | None) -> np.ndarray:
    if class_targets is None:
        return pipe.predict(F, classes)
    # regression mode: nearest class-target by cosine similarity
    H = pipe.transform(F)
    pred_vecs = solver.score(pipe.head, H)
    ct = class_targets[classes]
    ct_norm = np.linalg.norm(ct, axis=1) + 1e-30
    pv_norm = np.linalg.norm(pred_vecs, axis=1) + 1e-30
    sims = (pred_vecs @ ct.T) / (pv_norm[:, None] * ct_norm[None, :])
    return classes[np.argmax(sims, axis=1)]


def dil_domain_report(result: RunResult) -> dict[str, Any]:
    """Per-domain accuracy after each task, plus macro mean and the
    sample-weighted overall accuracy."""
    if result.domain_accuracy is None:
        raise ConfigError("result has no per-domain accuracies (not a DIL run)")
    acc = result.domain_accuracy
    counts = result.domain_val_counts
    macro = acc.mean(axis=1)
    weighted = (acc * counts[None, :]).sum(axis=1) / counts.sum()
    return {
        "domain_accuracy": acc,
        "macro_mean": macro,
        "overall": weighted,
    }


def run_task_agnostic(config: RunConfig) -> RunResult:
    """Boundary-free stream: micro-tasks sample a drifting Gaussian over
    class indices; the head is re-solved at checkpoints, with a sample queue
    held out for lambda selection at each checkpoint."""
    fs = store.FeatureStore(config.dataset)
    manifest = fs.manifest
    sched = config.schedule
    K = manifest.K

    train_F = fs.features("train").astype(np.float64)
    train_labels = fs.labels("train").astype(np.int64)
    has_val = "val" in manifest.splits and manifest.splits["val"] > 0
    val_F = fs.features("val").astype(np.float64) if has_val else train_F
    val_labels = fs.labels("val").astype(np.int64) if has_val else train_labels

    pipe = _Pipeline(config, manifest, K)
    rng = np.random.Generator(np.random.PCG64(subseed(config.seed, "schedule")))

    remaining = {y: list(np.nonzero(train_labels == y)[0]) for y in range(K)}
    for y in remaining:
        rng.shuffle(remaining[y])

    queue_F: list[np.ndarray] = []
    queue_labels: list[int] = []
    seen: set[int] = set()
    checkpoints: list[dict[str, float]] = []
    wall = {"train": 0.0, "solve": 0.0, "eval": 0.0}
    lam = 1e-2
    lambdas: list[float | None] = []

    def flush_queue():
        nonlocal queue_F, queue_labels
        if queue_F:
            F = np.array(queue_F)
            labels = np.array(queue_labels)
            pipe.acc.update_batch(pipe.transform(F), _one_hot(labels, K),
                                  labels=labels)
            if config.method == "ncm":
                pipe.ncm.update_batch(pipe.transform(F), labels)
            queue_F, queue_labels = [], []

    def checkpoint(micro_index: int):
        nonlocal lam
        t0 = time.perf_counter()
        if config.method in ("rp_gram", "gram"):
            if config.fixed_lambda is not None:
                lam = config.fixed_lambda
            elif queue_F and pipe.acc.N > 0:
                # queued samples act as the holdout for the lambda grid
                Hq = pipe.transform(np.array(queue_F))
                Yq = _one_hot(np.array(queue_labels), K)
                lam = _select_lambda_from_queue(pipe.acc, Hq, Yq,
                                                config.lambda_grid)
            flush_queue()
            pipe.head = solver.solve(pipe.acc.G, pipe.acc.C, lam)
            pipe.lam = lam
        else:
            flush_queue()
        wall["solve"] += time.perf_counter() - t0
        lambdas.append(pipe.lam)

        t0 = time.perf_counter()
        classes = np.array(sorted(seen))
        pred_all = pipe.predict(val_F, classes)
        acc_all = float(np.mean(pred_all == val_labels))
        seen_mask = np.isin(val_labels, classes)
        acc_seen = (
            float(np.mean(pred_all[seen_mask] == val_labels[seen_mask]))
            if seen_mask.any() else 0.0
        )
        wall["eval"] += time.perf_counter() - t0
        checkpoints.append({
            "micro_task": micro_index,
            "classes_seen": len(seen),
            "acc_all_classes": acc_all,
            "acc_seen_classes": acc_seen,
        })

    n_micro = sched.micro_tasks
    for m in range(n_micro):
        center = (m / max(1, n_micro - 1)) * (K - 1)
        t0 = time.perf_counter()
        for _ in range(sched.batches_per_micro_task):
            if np.isinf(sched.width):
                classes_drawn = rng.integers(0, K, size=sched.batch_size)
            else:
                draws = rng.normal(center, sched.width, size=sched.batch_size)
                classes_drawn = np.clip(np.rint(draws), 0, K - 1).astype(int)
            for y in classes_drawn:
                if not remaining[int(y)]:
                    continue  # class exhausted: skip (sampling w/o replacement)
                idx = remaining[int(y)].pop()
                seen.add(int(y))
                queue_F.append(train_F[idx])
                queue_labels.append(int(train_labels[idx]))
            # keep only the newest queue_fraction queued; older go straight in
            max_queue = max(1, int(sched.queue_fraction
                                   * sched.batches_per_micro_task
                                   * sched.batch_size
                                   * sched.checkpoint_interval))
            if len(queue_F) > max_queue:
                n_flush = len(queue_F) - max_queue
                F = np.array(queue_F[:n_flush])
                labels = np.array(queue_labels[:n_flush])
                pipe.acc.update_batch(pipe.transform(F), _one_hot(labels, K),
                                      labels=labels)
                if config.method == "ncm":
                    pipe.ncm.update_batch(pipe.transform(F), labels)
                del queue_F[:n_flush]
                del queue_labels[:n_flush]
        wall["train"] += time.perf_counter() - t0
        if (m + 1) % sched.checkpoint_interval == 0 or m == n_micro - 1:
            checkpoint(m)

    n_ck = len(checkpoints)
    R = np.array([[c["acc_seen_classes"] for c in checkpoints[: i + 1]] + [0.0] * (n_ck - i - 1)
                  for i in range(n_ck)])
    avg_accs = [c["acc_seen_classes"] for c in checkpoints]
    return RunResult(
        config=config.to_dict(),
        R=R,
        avg_acc=avg_accs,
        forgetting=[None] * n_ck,
        lambdas=lambdas,
        wall_clock=wall,
        checkpoints=checkpoints,
    )


def _select_lambda_from_queue(acc: Accumulator, Hq: np.ndarray, Yq: np.ndarray,
                              grid: tuple[float, ...]) -> float:
    """Grid-select lambda using queued (not yet accumulated) samples as the
    holdout against the current statistics."""
    G = acc.G
    best_lam, best_mse = grid[0], np.inf
    for lam in grid:
        head = solver.solve(G, acc.C, lam)
        mse = float(np.mean((Hq @ head.W_o - Yq) ** 2))
        if mse < best_mse:
            best_lam, best_mse = lam, mse
    return best_lam
