"""Synthetic benign/anomalous corpus for desk-scale experiments.

The benign family consists of files built from repeating structured
records: a fixed header followed by a low-entropy periodic payload whose
motif (period 16-64 nibbles) is drawn per file from a small byte alphabet.
The anomalous family shares the exact record structure but has
high-entropy uniform-random segments spliced over part of the payload,
mimicking the texture difference that separates packed/encrypted regions
from regular code and data.

Generation is fully deterministic in (spec, seed): per-file RNG streams
are spawned from a root numpy SeedSequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import BENIGN, MALICIOUS, ManifestEntry, ingest_dir

__all__ = ["SynthSpec", "generate_corpus", "benign_file_bytes", "anomalous_file_bytes"]

log = logging.getLogger(__name__)

RECORD_HEADER = bytes((0x42, 0x50, 0x1A, 0x00))  # fixed per-record magic
RECORD_LEN = 1024  # header + payload, bytes

# Small byte alphabet for the low-entropy payload motifs; values chosen to
# spread across the 16 nibble colors.
MOTIF_ALPHABET = bytes((0x00, 0x11, 0x33, 0x55, 0x77, 0x99, 0xBB, 0xDD, 0xFF, 0x0F, 0x3C, 0xA5))


@dataclass(frozen=True)
class SynthSpec:
    n_benign: int = 400
    n_anomalous: int = 400
    seed: int = 7
    min_kb: int = 8
    max_kb: int = 32
    # anomalous: fraction of the file overwritten by random segments
    min_noise_fraction: float = 0.15
    max_noise_fraction: float = 0.35

    def __post_init__(self) -> None:
        if self.n_benign < 0 or self.n_anomalous < 0:
            raise ValueError("file counts must be >= 0")
        if not 1 <= self.min_kb <= self.max_kb:
            raise ValueError("need 1 <= min_kb <= max_kb")
        if not 0 < self.min_noise_fraction <= self.max_noise_fraction < 1:
            raise ValueError("noise fractions must satisfy 0 < min <= max < 1")


def _structured_bytes(rng: np.random.Generator, size: int) -> bytearray:
    """Records of fixed header + periodic payload; motif period 8-32 bytes
    (16-64 nibbles)."""
    period = int(rng.integers(8, 33))
    alphabet = np.frombuffer(MOTIF_ALPHABET, dtype=np.uint8)
    motif = rng.choice(alphabet, size=period)
    payload_len = RECORD_LEN - len(RECORD_HEADER)
    payload = np.tile(motif, payload_len // period + 1)[:payload_len]
    record = RECORD_HEADER + payload.tobytes()
    reps = size // RECORD_LEN + 1
    return bytearray((record * reps)[:size])


def benign_file_bytes(rng: np.random.Generator, size: int) -> bytes:
    return bytes(_structured_bytes(rng, size))


def anomalous_file_bytes(
    rng: np.random.Generator,
    size: int,
    min_noise_fraction: float,
    max_noise_fraction: float,
) -> bytes:
    """Structured file with uniform-random segments spliced in."""
    data = _structured_bytes(rng, size)
    fraction = float(rng.uniform(min_noise_fraction, max_noise_fraction))
    noise_total = max(1, int(size * fraction))
    n_segments = int(rng.integers(2, 7))
    cuts = np.sort(rng.integers(0, noise_total, size=n_segments - 1))
    lengths = np.diff(np.concatenate([[0], cuts, [noise_total]]))
    for seg_len in (int(v) for v in lengths):
        if seg_len == 0:
            continue
        seg_len = min(seg_len, size)
        start = int(rng.integers(0, size - seg_len + 1))
        data[start : start + seg_len] = rng.integers(
            0, 256, size=seg_len, dtype=np.uint8
        ).tobytes()
    return bytes(data)


def generate_corpus(spec: SynthSpec, out_dir: str | Path) -> list[ManifestEntry]:
    """Write the two file families under out_dir and ingest them.

    Layout: out_dir/benign/b_<i>.bin and out_dir/anomalous/a_<i>.bin.
    Returns manifest entries (benign first, then anomalous), each family
    sorted by path.
    """
    out_dir = Path(out_dir)
    benign_dir = out_dir / "benign"
    anomalous_dir = out_dir / "anomalous"
    benign_dir.mkdir(parents=True, exist_ok=True)
    anomalous_dir.mkdir(parents=True, exist_ok=True)

    root = np.random.SeedSequence(spec.seed)
    benign_seeds, anomalous_seeds = root.spawn(2)

    for i, child in enumerate(benign_seeds.spawn(spec.n_benign)):
        rng = np.random.default_rng(child)
        size = int(rng.integers(spec.min_kb * 1024, spec.max_kb * 1024 + 1))
        (benign_dir / f"b_{i:05d}.bin").write_bytes(benign_file_bytes(rng, size))
    for i, child in enumerate(anomalous_seeds.spawn(spec.n_anomalous)):
        rng = np.random.default_rng(child)
        size = int(rng.integers(spec.min_kb * 1024, spec.max_kb * 1024 + 1))
        (anomalous_dir / f"a_{i:05d}.bin").write_bytes(
            anomalous_file_bytes(
                rng, size, spec.min_noise_fraction, spec.max_noise_fraction
            )
        )

    entries = []
    if spec.n_benign:
        entries += ingest_dir(benign_dir, BENIGN, family="synthetic_structured")
    if spec.n_anomalous:
        entries += ingest_dir(anomalous_dir, MALICIOUS, family="synthetic_spliced")
    return entries
