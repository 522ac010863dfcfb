"""Feature extraction: raw files to nibble streams.

The byte-sequence path converts each byte to its two hexadecimal digits
in-process (high nibble first), which is byte-for-byte equivalent to piping
through an external hexdump but avoids one subprocess per file. The opcode
path shells out to a configurable disassembler and quantizes mnemonics
through a 16-bucket frequency alphabet.
"""

from __future__ import annotations

import logging
import subprocess
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "NibbleStream",
    "OpcodeStream",
    "AdapterSpec",
    "DisassemblerUnavailable",
    "bytes_to_nibbles",
    "nibbles_to_bytes",
    "extract_opcodes",
    "opcodes_to_nibbles",
    "build_opcode_alphabet",
]

log = logging.getLogger(__name__)

OVERFLOW_BUCKET = 15


@dataclass
class NibbleStream:
    """Sequence of 4-bit symbols; the universal input to image encoding."""

    symbols: np.ndarray  # uint8, values in [0, 15]
    origin: str = "byte_sequence"  # byte_sequence | opcode
    source_id: str | None = None

    def __post_init__(self) -> None:
        self.symbols = np.asarray(self.symbols, dtype=np.uint8)
        if self.symbols.size and self.symbols.max() > 15:
            raise ValueError("nibble symbols must lie in [0, 15]")

    def __len__(self) -> int:
        return int(self.symbols.size)


@dataclass
class OpcodeStream:
    mnemonics: list[str]
    source_id: str | None = None
    skipped_lines: int = 0


@dataclass
class AdapterSpec:
    """External disassembler invocation.

    argv is a command template; each "{file}" is replaced by the target
    path. Output lines are split on tabs and the mnemonic is the first
    whitespace token of field `mnemonic_field`.
    """

    argv: list[str] = field(
        default_factory=lambda: ["objdump", "-d", "--no-show-raw-insn", "{file}"]
    )
    mnemonic_field: int = 1
    timeout_s: float | None = 120.0


class DisassemblerUnavailable(RuntimeError):
    pass


def bytes_to_nibbles(data: bytes | np.ndarray, source_id: str | None = None) -> NibbleStream:
    """Split each byte into (high, low) 4-bit symbols; length doubles."""
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) else np.asarray(data, dtype=np.uint8)
    out = np.empty(arr.size * 2, dtype=np.uint8)
    np.right_shift(arr, 4, out=out[0::2])
    np.bitwise_and(arr, 0x0F, out=out[1::2])
    return NibbleStream(symbols=out, origin="byte_sequence", source_id=source_id)


def nibbles_to_bytes(stream: NibbleStream) -> bytes:
    """Inverse of bytes_to_nibbles; requires an even-length stream."""
    sym = stream.symbols
    if sym.size % 2:
        raise ValueError("odd nibble count cannot come from a byte sequence")
    out = (sym[0::2] << 4) | sym[1::2]
    return out.tobytes()


def extract_opcodes(path: str, adapter: AdapterSpec, source_id: str | None = None) -> OpcodeStream:
    """Run the configured disassembler on `path` and collect mnemonics.

    Lines from which no mnemonic can be extracted (headers, labels, blank
    separators) are skipped and counted in the returned stream.
    """
    argv = [a.replace("{file}", str(path)) for a in adapter.argv]
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=adapter.timeout_s
        )
    except FileNotFoundError as exc:
        raise DisassemblerUnavailable(f"disassembler unavailable: {argv[0]}") from exc
    if proc.returncode != 0:
        raise DisassemblerUnavailable(
            f"disassembler unavailable: {argv[0]} exited {proc.returncode}"
        )
    mnemonics: list[str] = []
    skipped = 0
    for line in proc.stdout.splitlines():
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) <= adapter.mnemonic_field:
            skipped += 1
            continue
        tokens = fields[adapter.mnemonic_field].split()
        if not tokens:
            skipped += 1
            continue
        mnemonics.append(tokens[0])
    if skipped:
        log.debug("%s: skipped %d unparseable disassembly lines", path, skipped)
    return OpcodeStream(mnemonics=mnemonics, source_id=source_id, skipped_lines=skipped)


def opcodes_to_nibbles(ops: OpcodeStream, alphabet: Mapping[str, int]) -> NibbleStream:
    """Map each mnemonic to a 4-bit code; unknown mnemonics hit bucket 15."""
    for mnemonic, code in alphabet.items():
        if not 0 <= code <= 15:
            raise ValueError(f"alphabet code for {mnemonic!r} out of range: {code}")
    sym = np.fromiter(
        (alphabet.get(m, OVERFLOW_BUCKET) for m in ops.mnemonics),
        dtype=np.uint8,
        count=len(ops.mnemonics),
    )
    return NibbleStream(symbols=sym, origin="opcode", source_id=ops.source_id)


def build_opcode_alphabet(streams: Iterable[OpcodeStream]) -> dict[str, int]:
    """Frequency-ranked mnemonic alphabet over a corpus.

    The 15 most frequent mnemonics get codes 0-14 (ties broken
    lexicographically); everything else collapses to the overflow bucket.
    """
    counts: Counter[str] = Counter()
    for stream in streams:
        counts.update(stream.mnemonics)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {m: i for i, (m, _) in enumerate(ranked[:OVERFLOW_BUCKET])}
