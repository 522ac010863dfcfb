"""One-class training loop: alternating critic/EG updates, EMA smoothing,
periodic evaluation, and dual (best-AUC + final) checkpointing.

A "step" is one critic update; every critic_steps_per_eg_step-th step also
updates the encoder and generator. Evaluation always scores with the EMA
shadow parameters. With a fixed seed the loop is bit-for-bit reproducible
on a single device, including the scores and parameter digests.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import torch

from .cbigan.checkpoint import save_checkpoint
from .cbigan.losses import ScoreConfig, anomaly_scores, critic_loss, eg_loss
from .cbigan.networks import CBiGAN, ModelConfig, build_model
from .corpus import BENIGN, MALICIOUS
from .evaluation import ScoredSample, auc, best_balanced_accuracy, roc_curve

__all__ = [
    "TrainConfig",
    "TrainLogRecord",
    "TrainResult",
    "TrainingDiverged",
    "LabeledSample",
    "ema_update",
    "EmaState",
    "train",
    "score_split",
    "write_train_log",
    "read_train_log",
    "DESK_PRESET",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    # loop
    batch_size: int = 32
    total_steps: int = 5000
    critic_steps_per_eg_step: int = 5
    lr_critic: float = 1e-4
    lr_eg: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    ema_decay: float = 0.999
    eval_every: int = 250
    seed: int = 42
    consistency_weight: float = 1.0  # lambda_c
    score_lambda: float = 0.5  # lambda of the anomaly score
    # model
    resolution: int = 64
    latent_dim: int = 128
    backbone_id: str = "base_conv"
    width: int = 16
    z_hidden: int = 128
    feature_dim: int = 256

    def __post_init__(self) -> None:
        if min(self.batch_size, self.critic_steps_per_eg_step, self.eval_every) < 1:
            raise ValueError("batch_size, critic_steps_per_eg_step, eval_every must be >= 1")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in (0, 1)")
        if self.lr_critic <= 0 or self.lr_eg <= 0:
            raise ValueError("learning rates must be > 0")
        if self.consistency_weight < 0:
            raise ValueError("consistency weight must be >= 0")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            backbone_id=self.backbone_id,
            latent_dim=self.latent_dim,
            resolution=self.resolution,
            width=self.width,
            z_hidden=self.z_hidden,
            feature_dim=self.feature_dim,
        )

    def score_config(self) -> ScoreConfig:
        return ScoreConfig(score_lambda=self.score_lambda)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapping)


DESK_PRESET = TrainConfig()  # resolution 64, batch 32, 5000 steps, eval every 250


@dataclass
class LabeledSample:
    sample_id: str
    values: np.ndarray  # (3, r, r) float32 in [-1, 1]
    label: str


@dataclass
class TrainLogRecord:
    step: int
    critic_loss: float
    eg_adversarial: float
    consistency_image: float
    consistency_latent: float
    total_eg: float
    eval_auc: float | None = None
    eval_balacc: float | None = None
    wall_time: float = 0.0

    def to_record(self) -> dict:
        # wall_time stays out of the canonical record so logs from
        # identically-seeded runs are byte-identical; timings are written
        # to a separate sidecar by the CLI.
        rec = {
            "step": self.step,
            "critic_loss": self.critic_loss,
            "eg_adversarial": self.eg_adversarial,
            "consistency_image": self.consistency_image,
            "consistency_latent": self.consistency_latent,
            "total_eg": self.total_eg,
        }
        if self.eval_auc is not None:
            rec["eval_auc"] = self.eval_auc
            rec["eval_balacc"] = self.eval_balacc
        return rec


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, diagnostics: dict):
        super().__init__(f"non-finite loss at step {step}: {diagnostics}")
        self.step = step
        self.diagnostics = diagnostics


def ema_update(shadow, current, decay: float):
    """shadow' = decay * shadow + (1 - decay) * current, elementwise.

    Accepts a tensor/array pair or two name->tensor mappings.
    """
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    if isinstance(shadow, Mapping):
        if set(shadow) != set(current):
            raise ValueError("shadow and current parameter names differ")
        return {k: ema_update(shadow[k], current[k], decay) for k in shadow}
    if tuple(shadow.shape) != tuple(current.shape):
        raise ValueError(f"shape mismatch {tuple(shadow.shape)} vs {tuple(current.shape)}")
    return decay * shadow + (1.0 - decay) * current


class EmaState:
    """Shadow copy of a model's parameters, smoothed across steps."""

    def __init__(self, model: CBiGAN, decay: float):
        if not 0.0 < decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        self.decay = decay
        self.shadow = {
            name: p.detach().clone() for name, p in model.named_parameters()
        }

    @torch.no_grad()
    def update(self, model: CBiGAN) -> None:
        d = self.decay
        for name, p in model.named_parameters():
            s = self.shadow[name]
            s.mul_(d).add_(p.detach(), alpha=1.0 - d)

    def snapshot(self) -> dict[str, torch.Tensor]:
        return {name: t.clone() for name, t in self.shadow.items()}


def _stack_values(samples: Sequence[LabeledSample]) -> torch.Tensor:
    return torch.from_numpy(np.stack([s.values for s in samples]).astype(np.float32, copy=False))


def score_split(
    model: CBiGAN,
    samples: Sequence[LabeledSample],
    cfg: ScoreConfig,
    batch_size: int = 64,
) -> list[ScoredSample]:
    """Anomaly-score every sample, order-preserving and deterministic."""
    model.eval()
    out: list[ScoredSample] = []
    for lo in range(0, len(samples), batch_size):
        batch = samples[lo : lo + batch_size]
        x = _stack_values(batch)
        scores = anomaly_scores(model, x, cfg)
        out.extend(
            ScoredSample(sample_id=s.sample_id, score=float(v), label=s.label)
            for s, v in zip(batch, scores)
        )
    return out


@dataclass
class TrainResult:
    model: CBiGAN  # live parameters at total_steps
    ema: EmaState
    best_shadow: dict[str, torch.Tensor]
    best_step: int
    best_auc: float
    best_balacc: float
    log: list[TrainLogRecord]
    config: TrainConfig
    score_config: ScoreConfig = field(init=False)

    def __post_init__(self) -> None:
        self.score_config = self.config.score_config()

    @property
    def best_model(self) -> CBiGAN:
        """Model carrying the EMA parameters of the best-AUC evaluation."""
        model = build_model(self.config.model_config())
        state = dict(self.model.state_dict())
        state.update(self.best_shadow)
        model.load_state_dict(state, strict=True)
        model.eval()
        return model

    def save_checkpoints(self, best_path: str, final_path: str) -> None:
        cfg = asdict(self.config)
        save_checkpoint(
            best_path,
            self.model,
            ema_shadow=self.best_shadow,
            step=self.best_step,
            train_config=cfg,
        )
        save_checkpoint(
            final_path,
            self.model,
            ema_shadow=self.ema.snapshot(),
            step=self.config.total_steps,
            train_config=cfg,
        )


def _eval_model(model: CBiGAN, shadow: Mapping[str, torch.Tensor], cfg: TrainConfig) -> CBiGAN:
    eval_model = build_model(cfg.model_config())
    state = dict(model.state_dict())
    state.update(shadow)
    eval_model.load_state_dict(state, strict=True)
    eval_model.eval()
    return eval_model


def train(
    cfg: TrainConfig,
    train_split: Sequence[LabeledSample],
    test_split: Sequence[LabeledSample],
) -> TrainResult:
    """Run the one-class loop; returns final model, EMA, best snapshot, log.

    train_split must be purely benign; test_split needs both labels for
    the periodic AUC/BalAcc evaluation.
    """
    for s in train_split:
        if s.label == MALICIOUS:
            raise ValueError(f"one-class violation: malicious sample {s.sample_id} in train split")
    if not train_split:
        raise ValueError("train split is empty")

    torch.manual_seed(cfg.seed)
    model = build_model(cfg.model_config())
    model.train()
    ema = EmaState(model, cfg.ema_decay)
    opt_critic = torch.optim.Adam(
        model.discriminator.parameters(),
        lr=cfg.lr_critic,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
    )
    opt_eg = torch.optim.Adam(
        list(model.encoder.parameters()) + list(model.generator.parameters()),
        lr=cfg.lr_eg,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
    )
    # one explicit generator drives batch sampling, latent draws, and the
    # gradient-penalty interpolation so the whole run replays from cfg.seed
    g = torch.Generator().manual_seed(cfg.seed)

    data = _stack_values(train_split)
    n = data.shape[0]
    score_cfg = cfg.score_config()

    records: list[TrainLogRecord] = []
    parts = {
        "eg_adversarial": 0.0,
        "consistency_image": 0.0,
        "consistency_latent": 0.0,
        "total_eg": 0.0,
    }
    best_step: int | None = None
    best_auc = float("-inf")
    best_balacc = 0.0
    best_shadow = ema.snapshot()
    t0 = time.perf_counter()

    def evaluate(step: int) -> tuple[float, float]:
        eval_model = _eval_model(model, ema.shadow, cfg)
        scored = score_split(eval_model, test_split, score_cfg, batch_size=cfg.batch_size)
        value = auc(roc_curve(scored))
        _, balacc = best_balanced_accuracy(scored)
        return value, balacc

    for step in range(1, cfg.total_steps + 1):
        idx = torch.randint(n, (cfg.batch_size,), generator=g)
        x = data[idx]
        z = torch.randn(cfg.batch_size, cfg.latent_dim, generator=g)
        loss_c = critic_loss(model, x, z, generator=g)
        opt_critic.zero_grad(set_to_none=True)
        loss_c.backward()
        opt_critic.step()
        critic_value = float(loss_c.detach())

        did_eg = step % cfg.critic_steps_per_eg_step == 0
        if did_eg:
            idx = torch.randint(n, (cfg.batch_size,), generator=g)
            x = data[idx]
            z = torch.randn(cfg.batch_size, cfg.latent_dim, generator=g)
            # the critic is a fixed function inside the EG objective; skip
            # its parameter gradients (gradients still flow through it)
            model.discriminator.requires_grad_(False)
            loss_eg, parts = eg_loss(model, x, z, cfg.consistency_weight)
            opt_eg.zero_grad(set_to_none=True)
            loss_eg.backward()
            opt_eg.step()
            model.discriminator.requires_grad_(True)

        ema.update(model)

        values = {"critic_loss": critic_value, **parts}
        if not all(np.isfinite(v) for v in values.values()):
            raise TrainingDiverged(step, values)

        evaled = bool(test_split) and step % cfg.eval_every == 0
        eval_auc = eval_balacc = None
        if evaled:
            eval_auc, eval_balacc = evaluate(step)
            if eval_auc > best_auc:
                best_auc, best_balacc, best_step = eval_auc, eval_balacc, step
                best_shadow = ema.snapshot()
        if did_eg or evaled:
            records.append(
                TrainLogRecord(
                    step=step,
                    critic_loss=critic_value,
                    eval_auc=eval_auc,
                    eval_balacc=eval_balacc,
                    wall_time=time.perf_counter() - t0,
                    **parts,
                )
            )

    if best_step is None:
        # degenerate budgets (or eval_every > total_steps): evaluate once
        # so best == final EMA state
        step = cfg.total_steps
        if test_split:
            best_auc, best_balacc = evaluate(step)
        else:
            best_auc, best_balacc = float("nan"), float("nan")
        best_step = step
        best_shadow = ema.snapshot()
        records.append(
            TrainLogRecord(
                step=step,
                critic_loss=0.0,
                eval_auc=best_auc if test_split else None,
                eval_balacc=best_balacc if test_split else None,
                wall_time=time.perf_counter() - t0,
                **parts,
            )
        )

    return TrainResult(
        model=model,
        ema=ema,
        best_shadow=best_shadow,
        best_step=best_step,
        best_auc=best_auc,
        best_balacc=best_balacc,
        log=records,
        config=cfg,
    )


def write_train_log(path: str, records: Iterable[TrainLogRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r.to_record()) + "\n")


def write_timings(path: str, records: Iterable[TrainLogRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({"step": r.step, "wall_time": r.wall_time}) + "\n")


def read_train_log(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
