"""Writer for the feature-store on-disk format.

Independent implementation of the format the continual-learning engine
reads: a directory with ``manifest.json`` plus per-split subdirectories,
each holding magic-tagged little-endian binary arrays::

    <split>/features.bin   "PFSTOR01" + row-major float32 matrix (N x L)
    <split>/labels.bin     "PFSTOR01" + uint32 array (N)
    <split>/domains.bin    optional, uint32 array (N)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"PFSTOR01"


def _write_payload(path: Path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(array.tobytes(order="C"))


def write_store(
    path: str | Path,
    splits: dict[str, tuple[np.ndarray, np.ndarray]],
    *,
    name: str,
    K: int,
    class_names: list[str] | None = None,
    domains: dict[str, np.ndarray] | None = None,
    domain_names: list[str] | None = None,
) -> None:
    """Write ``splits`` (split name -> (features, labels)) to ``path``.

    Features are cast to little-endian float32, labels to uint32. Raises
    ``ValueError`` on non-finite features, inconsistent dimensions, or
    labels outside [0, K).
    """
    path = Path(path)
    L = None
    for split, (F, labels) in splits.items():
        F = np.asarray(F)
        labels = np.asarray(labels)
        if F.ndim != 2 or len(F) != len(labels):
            raise ValueError(f"split {split!r}: need N x L features with N labels")
        if not np.all(np.isfinite(F)):
            raise ValueError(f"split {split!r}: non-finite feature value")
        if len(labels) and (labels.min() < 0 or labels.max() >= K):
            raise ValueError(f"split {split!r}: label outside [0, {K})")
        if L is None:
            L = F.shape[1]
        elif F.shape[1] != L:
            raise ValueError("splits disagree on feature dimension")

    path.mkdir(parents=True, exist_ok=True)
    for split, (F, labels) in splits.items():
        split_dir = path / split
        split_dir.mkdir(exist_ok=True)
        _write_payload(split_dir / "features.bin",
                       np.ascontiguousarray(F, dtype="<f4"))
        _write_payload(split_dir / "labels.bin",
                       np.ascontiguousarray(labels, dtype="<u4"))
        if domains and split in domains:
            _write_payload(split_dir / "domains.bin",
                           np.ascontiguousarray(domains[split], dtype="<u4"))

    manifest = {
        "name": name,
        "L": int(L if L is not None else 0),
        "K": int(K),
        "splits": {s: len(labels) for s, (_, labels) in splits.items()},
        "class_names": class_names,
        "domains": domain_names,
        "target_dim": None,
        "dtype": "float32_le",
        "endianness": "little",
        "format_version": 1,
    }
    (path / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True))
