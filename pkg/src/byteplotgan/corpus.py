"""Corpus ingestion, content-addressed manifests, and one-class splits.

A manifest is one JSON object per line with fixed field order
(path, sha256, size_bytes, label, family, split); extra per-image metadata
appended by the encode stage rides along after those keys.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "BENIGN",
    "MALICIOUS",
    "ManifestEntry",
    "SplitAssignment",
    "VerificationIssue",
    "ingest_dir",
    "split_manifest",
    "verify_manifest",
    "write_manifest",
    "read_manifest",
]

log = logging.getLogger(__name__)

BENIGN = "benign"
MALICIOUS = "malicious"
SPLITS = ("train", "test", "validation")

_FIELD_ORDER = ("path", "sha256", "size_bytes", "label", "family", "split")
_HASH_CHUNK = 1 << 20


@dataclass
class ManifestEntry:
    path: str
    sha256: str
    size_bytes: int
    label: str
    family: str | None = None
    split: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.label not in (BENIGN, MALICIOUS):
            raise ValueError(f"unknown label {self.label!r}")
        if self.size_bytes <= 0:
            raise ValueError("size_bytes must be positive")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class SplitAssignment:
    entry_id: int  # index into the manifest list
    split: str
    seed: int


@dataclass(frozen=True)
class VerificationIssue:
    path: str
    problem: str  # missing | digest_mismatch | size_mismatch


def _sha256_file(path: Path) -> tuple[str, int]:
    h = hashlib.sha256()
    size = 0
    with open(path, "rb") as f:
        while True:
            chunk = f.read(_HASH_CHUNK)
            if not chunk:
                break
            h.update(chunk)
            size += len(chunk)
    return h.hexdigest(), size


def ingest_dir(
    root: str | Path,
    label: str,
    min_size: int = 0,
    max_size: int | None = None,
    family: str | None = None,
    workers: int = 4,
) -> list[ManifestEntry]:
    """Walk a file tree into manifest entries.

    Regular files with size in [min_size, max_size] are hashed (in
    parallel), sorted by path, and deduplicated by digest keeping the
    first path. Unreadable files are skipped with a logged warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root does not exist: {root}")
    candidates = []
    for p in sorted(root.rglob("*")):
        if not p.is_file() or p.is_symlink():
            continue
        try:
            size = p.stat().st_size
        except OSError as exc:
            log.warning("skipping unreadable file %s: %s", p, exc)
            continue
        if size < min_size or (max_size is not None and size > max_size) or size == 0:
            continue
        candidates.append(p)

    def _hash_one(p: Path):
        try:
            return p, _sha256_file(p)
        except OSError as exc:
            log.warning("skipping unreadable file %s: %s", p, exc)
            return p, None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        hashed = list(pool.map(_hash_one, candidates))

    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for p, digest_size in hashed:  # candidates were pre-sorted by path
        if digest_size is None:
            continue
        digest, size = digest_size
        if digest in seen:
            continue
        seen.add(digest)
        entries.append(
            ManifestEntry(
                path=str(p), sha256=digest, size_bytes=size, label=label, family=family
            )
        )
    return entries


def split_manifest(
    entries: Sequence[ManifestEntry],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 42,
) -> list[SplitAssignment]:
    """Deterministic one-class split.

    Benign entries are shuffled by a seeded PRNG and partitioned by
    `ratios` (floor for train and test, remainder to validation).
    Malicious entries never enter train: they are shuffled and split
    evenly between test and validation.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    benign_ids = [i for i, e in enumerate(entries) if e.label == BENIGN]
    malicious_ids = [i for i, e in enumerate(entries) if e.label == MALICIOUS]
    if ratios[0] > 0 and not benign_ids:
        raise ValueError("train ratio > 0 but no benign entries to train on")

    rng = random.Random(seed)
    rng.shuffle(benign_ids)
    rng.shuffle(malicious_ids)

    n = len(benign_ids)
    n_train = int(n * ratios[0])
    n_test = int(n * ratios[1])
    assignments = []
    for pos, idx in enumerate(benign_ids):
        if pos < n_train:
            split = "train"
        elif pos < n_train + n_test:
            split = "test"
        else:
            split = "validation"
        assignments.append(SplitAssignment(entry_id=idx, split=split, seed=seed))
    half = len(malicious_ids) // 2
    for pos, idx in enumerate(malicious_ids):
        split = "test" if pos < half else "validation"
        assignments.append(SplitAssignment(entry_id=idx, split=split, seed=seed))

    for a in assignments:
        if a.split == "train" and entries[a.entry_id].label == MALICIOUS:
            raise AssertionError("one-class purity violated: malicious entry in train")
    return sorted(assignments, key=lambda a: a.entry_id)


def verify_manifest(entries: Iterable[ManifestEntry]) -> list[VerificationIssue]:
    """Re-hash every entry; report files that vanished or changed."""
    issues = []
    for e in entries:
        p = Path(e.path)
        if not p.is_file():
            issues.append(VerificationIssue(path=e.path, problem="missing"))
            continue
        digest, size = _sha256_file(p)
        if size != e.size_bytes:
            issues.append(VerificationIssue(path=e.path, problem="size_mismatch"))
        elif digest != e.sha256:
            issues.append(VerificationIssue(path=e.path, problem="digest_mismatch"))
    return issues


def apply_split(entries: Sequence[ManifestEntry], assignments: Iterable[SplitAssignment]) -> None:
    for a in assignments:
        entries[a.entry_id].split = a.split


def write_manifest(path: str | Path, entries: Iterable[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            record = {
                "path": e.path,
                "sha256": e.sha256,
                "size_bytes": e.size_bytes,
                "label": e.label,
                "family": e.family,
                "split": e.split,
            }
            for k in sorted(e.extra):
                record[k] = e.extra[k]
            f.write(json.dumps(record) + "\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            extra = {k: v for k, v in record.items() if k not in _FIELD_ORDER}
            entries.append(
                ManifestEntry(
                    path=record["path"],
                    sha256=record["sha256"],
                    size_bytes=record["size_bytes"],
                    label=record["label"],
                    family=record.get("family"),
                    split=record.get("split"),
                    extra=extra,
                )
            )
    return entries
