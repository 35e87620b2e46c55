"""Bit-exact on-disk feature stores and task splitting.

Layout of a store directory::

    manifest.json
    <split>/features.bin   magic "PFSTOR01" + row-major f32 LE matrix (N x L)
    <split>/labels.bin     magic + u32 LE array (N)
    <split>/domains.bin    magic + u32 LE array (N), optional
    <split>/targets.bin    magic + row-major f32 LE matrix (N x D), optional

Features are stored in 32-bit floats (backbones emit 32-bit activations);
all downstream accumulation happens in 64-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    CorruptionError,
    DimensionMismatchError,
    InfeasibleSplitError,
    MissingDomainError,
    UnsupportedFormatError,
    ValidationError,
)

MAGIC = b"PFSTOR01"
DTYPE_NAME = "float32_le"
_STREAM_CHUNK = 4096


@dataclass
class FeatureRecord:
    """One labeled feature vector.

    ``sample_id`` is positional: record i of a split has sample_id i.
    """

    features: np.ndarray
    label: int
    sample_id: int
    domain_id: int | None = None
    target: np.ndarray | None = None


@dataclass
class DatasetManifest:
    name: str
    L: int
    K: int
    splits: dict[str, int]
    class_names: list[str] | None = None
    domains: list[str] | None = None
    target_dim: int | None = None
    dtype: str = DTYPE_NAME
    endianness: str = "little"
    format_version: int = 1

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "L": self.L,
            "K": self.K,
            "splits": self.splits,
            "class_names": self.class_names,
            "domains": self.domains,
            "target_dim": self.target_dim,
            "dtype": self.dtype,
            "endianness": self.endianness,
            "format_version": self.format_version,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("dtype") != DTYPE_NAME:
            raise UnsupportedFormatError(f"unsupported dtype {doc.get('dtype')!r}")
        if doc.get("format_version") != 1:
            raise UnsupportedFormatError(
                f"unsupported format version {doc.get('format_version')!r}"
            )
        return cls(
            name=doc["name"],
            L=int(doc["L"]),
            K=int(doc["K"]),
            splits={k: int(v) for k, v in doc["splits"].items()},
            class_names=doc.get("class_names"),
            domains=doc.get("domains"),
            target_dim=doc.get("target_dim"),
        )


@dataclass
class TaskSplit:
    """Assignment of train/val sample ids to T tasks."""

    T: int
    train_ids: list[np.ndarray]
    val_ids: list[np.ndarray]
    task_classes: list[np.ndarray]  # classes introduced by each task
    seed: int | None = None


def _write_payload(path: Path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(array.tobytes(order="C"))


def _read_payload(path: Path, dtype: np.dtype, row_size: int, n_rows: int) -> np.ndarray:
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise UnsupportedFormatError(f"{path}: bad magic {data[:8]!r}")
    body = data[8:]
    expected = n_rows * row_size * dtype.itemsize
    if len(body) != expected:
        raise CorruptionError(
            f"{path}: payload is {len(body)} bytes, manifest implies {expected}"
        )
    arr = np.frombuffer(body, dtype=dtype)
    if row_size > 1:
        arr = arr.reshape(n_rows, row_size)
    return arr


def _validate_records(records: list[FeatureRecord]) -> tuple[int, int | None]:
    if not records:
        return 0, None
    L = len(records[0].features)
    target_dim = None if records[0].target is None else len(records[0].target)
    for r in records:
        if len(r.features) != L:
            raise DimensionMismatchError(
                f"sample {r.sample_id}: feature length {len(r.features)} != {L}"
            )
        if not np.all(np.isfinite(r.features)):
            raise ValidationError(f"sample {r.sample_id}: non-finite feature value")
        if r.label < 0:
            raise ValidationError(f"sample {r.sample_id}: negative label")
        t_dim = None if r.target is None else len(r.target)
        if t_dim != target_dim:
            raise DimensionMismatchError(
                f"sample {r.sample_id}: inconsistent target dimension"
            )
    return L, target_dim


def write_store(
    records: list[FeatureRecord],
    path: str | Path,
    *,
    name: str = "store",
    K: int | None = None,
    val_records: list[FeatureRecord] | None = None,
    class_names: list[str] | None = None,
    domains: list[str] | None = None,
) -> DatasetManifest:
    """Write records to ``path`` and return the manifest.

    ``records`` become the "train" split; ``val_records``, if given, the
    "val" split. Round-trips bit-exactly through :func:`read_store`.
    """
    path = Path(path)
    splits = {"train": records}
    if val_records is not None:
        splits["val"] = val_records

    L = None
    target_dim = None
    for recs in splits.values():
        sL, s_tdim = _validate_records(recs)
        if recs:
            if L is not None and sL != L:
                raise DimensionMismatchError("splits disagree on feature length")
            L = sL
            target_dim = s_tdim
    if L is None:
        L = 0

    max_label = max(
        (r.label for recs in splits.values() for r in recs), default=-1
    )
    if K is None:
        K = max_label + 1
    elif max_label >= K:
        raise ValidationError(f"label {max_label} >= K={K}")

    path.mkdir(parents=True, exist_ok=True)
    for split_name, recs in splits.items():
        split_dir = path / split_name
        split_dir.mkdir(exist_ok=True)
        feats = np.array(
            [r.features for r in recs], dtype="<f4"
        ).reshape(len(recs), L)
        labels = np.array([r.label for r in recs], dtype="<u4")
        _write_payload(split_dir / "features.bin", feats)
        _write_payload(split_dir / "labels.bin", labels)
        if recs and recs[0].domain_id is not None:
            dom = np.array([r.domain_id for r in recs], dtype="<u4")
            _write_payload(split_dir / "domains.bin", dom)
        if target_dim is not None:
            targets = np.array([r.target for r in recs], dtype="<f4")
            _write_payload(split_dir / "targets.bin", targets)

    manifest = DatasetManifest(
        name=name,
        L=L,
        K=K,
        splits={s: len(r) for s, r in splits.items()},
        class_names=class_names,
        domains=domains,
        target_dim=target_dim,
    )
    (path / "manifest.json").write_text(manifest.to_json())
    return manifest


class FeatureStore:
    """Read-only view of a store directory. Immutable after write."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        manifest_path = self.path / "manifest.json"
        if not manifest_path.exists():
            raise CorruptionError(f"no manifest at {manifest_path}")
        self.manifest = DatasetManifest.from_json(manifest_path.read_text())

    def _n(self, split: str) -> int:
        if split not in self.manifest.splits:
            raise CorruptionError(f"unknown split {split!r}")
        return self.manifest.splits[split]

    def features(self, split: str = "train") -> np.ndarray:
        return _read_payload(
            self.path / split / "features.bin",
            np.dtype("<f4"),
            self.manifest.L,
            self._n(split),
        )

    def labels(self, split: str = "train") -> np.ndarray:
        return _read_payload(
            self.path / split / "labels.bin", np.dtype("<u4"), 1, self._n(split)
        )

    def has_domains(self, split: str = "train") -> bool:
        return (self.path / split / "domains.bin").exists()

    def domains(self, split: str = "train") -> np.ndarray:
        p = self.path / split / "domains.bin"
        if not p.exists():
            raise MissingDomainError(f"{self.path}: split {split!r} has no domains.bin")
        return _read_payload(p, np.dtype("<u4"), 1, self._n(split))

    def targets(self, split: str = "train") -> np.ndarray:
        if self.manifest.target_dim is None:
            raise UnsupportedFormatError(f"{self.path}: store has no targets")
        return _read_payload(
            self.path / split / "targets.bin",
            np.dtype("<f4"),
            self.manifest.target_dim,
            self._n(split),
        )

    def iter_records(self, split: str = "train") -> Iterator[FeatureRecord]:
        """Stream records in stored order, one chunk of rows at a time."""
        n = self._n(split)
        labels = self.labels(split)
        doms = self.domains(split) if self.has_domains(split) else None
        targets = self.targets(split) if self.manifest.target_dim is not None else None
        feat_path = self.path / split / "features.bin"
        row_bytes = 4 * self.manifest.L
        with open(feat_path, "rb") as f:
            if f.read(8) != MAGIC:
                raise UnsupportedFormatError(f"{feat_path}: bad magic")
            for start in range(0, n, _STREAM_CHUNK):
                stop = min(start + _STREAM_CHUNK, n)
                raw = f.read((stop - start) * row_bytes)
                if len(raw) != (stop - start) * row_bytes:
                    raise CorruptionError(f"{feat_path}: truncated payload")
                chunk = np.frombuffer(raw, dtype="<f4").reshape(stop - start, -1)
                for i in range(stop - start):
                    sid = start + i
                    yield FeatureRecord(
                        features=chunk[i],
                        label=int(labels[sid]),
                        sample_id=sid,
                        domain_id=None if doms is None else int(doms[sid]),
                        target=None if targets is None else targets[sid],
                    )


def read_store(
    path: str | Path, split: str = "train"
) -> tuple[DatasetManifest, Iterator[FeatureRecord]]:
    store = FeatureStore(path)
    return store.manifest, store.iter_records(split)


def _partition_classes(K: int, T: int, seed: int) -> list[np.ndarray]:
    # Uneven K: later tasks get ceil(K/T) classes each and the first task the
    # remainder (e.g. K=196, T=10 -> 16 then 9x20), unless that would leave
    # the first task empty, in which case the remainder tops up the first task.
    rng = np.random.Generator(np.random.PCG64(seed))
    classes = rng.permutation(K)
    later = -(-K // T)
    first = K - (T - 1) * later
    if first < 1:
        later = K // T
        first = K - (T - 1) * later
    groups = [classes[:first]]
    for t in range(1, T):
        start = first + (t - 1) * later
        groups.append(classes[start : start + later])
    return groups


def split_cil(store: FeatureStore, T: int, seed: int) -> TaskSplit:
    """Disjoint class-incremental split: shuffle classes by seed, partition
    into T contiguous groups, assign samples by class membership."""
    K = store.manifest.K
    if T < 1 or T > K:
        raise InfeasibleSplitError(f"cannot split {K} classes into {T} tasks")
    groups = _partition_classes(K, T, seed)
    train_labels = store.labels("train")
    val_labels = store.labels("val") if "val" in store.manifest.splits else None
    train_ids, val_ids = [], []
    for g in groups:
        mask = np.isin(train_labels, g)
        train_ids.append(np.nonzero(mask)[0])
        if val_labels is not None:
            val_ids.append(np.nonzero(np.isin(val_labels, g))[0])
        else:
            val_ids.append(np.array([], dtype=np.int64))
    return TaskSplit(T=T, train_ids=train_ids, val_ids=val_ids,
                     task_classes=groups, seed=seed)


def split_dil(store: FeatureStore) -> TaskSplit:
    """One task per domain, in manifest order; tasks may share classes."""
    if store.manifest.domains is None:
        raise MissingDomainError(f"{store.path}: manifest declares no domains")
    T = len(store.manifest.domains)
    train_dom = store.domains("train")
    val_dom = (
        store.domains("val")
        if "val" in store.manifest.splits and store.has_domains("val")
        else None
    )
    train_labels = store.labels("train")
    train_ids, val_ids, task_classes = [], [], []
    for d in range(T):
        ids = np.nonzero(train_dom == d)[0]
        train_ids.append(ids)
        task_classes.append(np.unique(train_labels[ids]))
        if val_dom is not None:
            val_ids.append(np.nonzero(val_dom == d)[0])
        else:
            val_ids.append(np.array([], dtype=np.int64))
    return TaskSplit(T=T, train_ids=train_ids, val_ids=val_ids,
                     task_classes=task_classes, seed=None)
