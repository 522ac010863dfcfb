"""Scoring metrics (ROC, AUC, balanced accuracy) and the encoding ablation.

Polarity is pinned: malicious is the positive class and a sample is
predicted positive when score >= threshold, so higher scores mean more
anomalous.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import MALICIOUS

__all__ = [
    "ScoredSample",
    "RocCurve",
    "ConfusionCounts",
    "roc_curve",
    "auc",
    "confusion_counts",
    "balanced_accuracy",
    "best_balanced_accuracy",
    "AblationRow",
    "run_ablation",
    "format_ablation_table",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredSample:
    sample_id: str
    score: float
    label: str

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise ValueError(f"score for {self.sample_id} is not finite")


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float], ...]  # (FPR, TPR), (0,0) .. (1,1)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


def _split_scores(samples: Sequence[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([s.score for s in samples if s.label == MALICIOUS], dtype=np.float64)
    neg = np.array([s.score for s in samples if s.label != MALICIOUS], dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("degenerate ROC: need at least one sample of each class")
    return pos, neg


def roc_curve(samples: Sequence[ScoredSample]) -> RocCurve:
    """Sweep thresholds over distinct scores, descending."""
    pos, neg = _split_scores(samples)
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    points = [(0.0, 0.0)]
    for t in thresholds:
        tpr = float((pos >= t).mean())
        fpr = float((neg >= t).mean())
        points.append((fpr, tpr))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return RocCurve(points=tuple(points))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC; equals the tie-half-credited
    Mann-Whitney statistic P(score_mal > score_ben) + 0.5 P(tie)."""
    pts = np.array(curve.points, dtype=np.float64)
    fpr, tpr = pts[:, 0], pts[:, 1]
    return float(np.trapezoid(tpr, fpr))


def confusion_counts(samples: Sequence[ScoredSample], threshold: float) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    for s in samples:
        predicted_malicious = s.score >= threshold
        if s.label == MALICIOUS:
            tp += predicted_malicious
            fn += not predicted_malicious
        else:
            fp += predicted_malicious
            tn += not predicted_malicious
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def balanced_accuracy(samples: Sequence[ScoredSample], threshold: float) -> float:
    """Mean of TPR and TNR at the given threshold."""
    _split_scores(samples)  # both classes must be present
    c = confusion_counts(samples, threshold)
    return 0.5 * (c.tp / (c.tp + c.fn) + c.tn / (c.tn + c.fp))


def best_balanced_accuracy(samples: Sequence[ScoredSample]) -> tuple[float, float]:
    """(threshold, value) maximizing balanced accuracy over distinct score
    thresholds; ties resolve to the lowest threshold."""
    pos, neg = _split_scores(samples)
    best_t, best_v = None, -1.0
    for t in np.unique(np.concatenate([pos, neg])):
        v = 0.5 * ((pos >= t).mean() + (neg < t).mean())
        if v > best_v:
            best_t, best_v = float(t), float(v)
    return best_t, best_v


def write_scores(path: str, samples: Iterable[ScoredSample]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            f.write(json.dumps({"sample_id": s.sample_id, "score": s.score, "label": s.label}) + "\n")


def read_scores(path: str) -> list[ScoredSample]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                r = json.loads(line)
                out.append(ScoredSample(sample_id=r["sample_id"], score=r["score"], label=r["label"]))
    return out


# ---------------------------------------------------------------------------
# encoding ablation harness


@dataclass
class AblationRow:
    layout: str
    coloring: str
    auc: float | None = None
    balacc: float | None = None
    threshold: float | None = None
    steps: int | None = None
    seed: int | None = None
    failed: bool = False
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "layout": self.layout,
            "coloring": self.coloring,
            "auc": self.auc,
            "balacc": self.balacc,
            "threshold": self.threshold,
            "steps": self.steps,
            "seed": self.seed,
            "failed": self.failed,
            "error": self.error,
        }


def run_ablation(entries, encodings, cfg, rowmajor_width: int = 256):
    """Train one model per encoding on identical data and seeds.

    `entries` is a split manifest of an on-disk corpus; each row encodes
    every file under its (layout, coloring) pair, trains with `cfg`, and
    reports test AUC and best balanced accuracy. A row that raises is
    marked failed and the remaining rows still run.
    """
    from .pipeline import load_split_inputs
    from .train import score_split, train

    rows: list[AblationRow] = []
    for layout, coloring in encodings:
        row = AblationRow(layout=layout, coloring=coloring, steps=cfg.total_steps, seed=cfg.seed)
        try:
            train_inputs, test_samples = load_split_inputs(
                entries, layout, coloring, cfg.resolution, rowmajor_width=rowmajor_width
            )
            result = train(cfg, train_inputs, test_samples)
            scored = score_split(
                result.best_model, test_samples, result.score_config
            )
            row.auc = auc(roc_curve(scored))
            row.threshold, row.balacc = best_balanced_accuracy(scored)
        except Exception as exc:  # one failed row must not sink the others
            log.exception("ablation row %s+%s failed", layout, coloring)
            row.failed = True
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    header = f"{'layout':<10} {'coloring':<12} {'auc':>8} {'balacc':>8} {'threshold':>12} {'steps':>7} {'seed':>6} {'status':<8}"
    lines = [header, "-" * len(header)]
    for r in rows:
        fmt = lambda v, spec: ("-" if v is None else format(v, spec))
        lines.append(
            f"{r.layout:<10} {r.coloring:<12} {fmt(r.auc, '8.4f'):>8} {fmt(r.balacc, '8.4f'):>8} "
            f"{fmt(r.threshold, '12.6g'):>12} {fmt(r.steps, '7d'):>7} {fmt(r.seed, '6d'):>6} "
            f"{'FAILED' if r.failed else 'ok':<8}"
        )
    return "\n".join(lines)
