"""Adversarial, consistency, and anomaly-score computations.

The critic is Wasserstein-style; its Lipschitz constraint is a gradient
penalty on interpolated joint (image, latent) pairs with weight 10. The
encoder/generator adversarial term is the exact negation of the critic's
adversarial term. The anomaly score mixes per-sample pixel reconstruction
error with critic-feature discrepancy through a lambda in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

__all__ = [
    "ScoreConfig",
    "LossBreakdown",
    "GRADIENT_PENALTY_WEIGHT",
    "consistency_loss",
    "critic_loss",
    "eg_loss",
    "anomaly_scores",
    "anomaly_score",
]

GRADIENT_PENALTY_WEIGHT = 10.0


@dataclass(frozen=True)
class ScoreConfig:
    """Mixing weight between reconstruction and feature error."""

    score_lambda: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_lambda <= 1.0:
            raise ValueError("score lambda must lie in [0, 1]")


@dataclass(frozen=True)
class LossBreakdown:
    critic_loss: float
    eg_adversarial: float
    consistency_image: float
    consistency_latent: float
    total_eg: float


def consistency_loss(model, x: torch.Tensor, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean absolute reconstruction errors of both cycles.

    image term: |x - G(E(x))| averaged over everything;
    latent term: |z - E(G(z))| averaged over everything.
    """
    if x.shape[0] != z.shape[0]:
        raise ValueError("image and latent batch sizes differ")
    image_term = (x - model.generate(model.encode(x))).abs().mean()
    latent_term = (z - model.encode(model.generate(z))).abs().mean()
    return image_term, latent_term


def _interpolate_pairs(x, ex, gz, z, generator=None):
    """Random convex combinations of the real and generated joint pairs."""
    alpha = torch.rand(x.shape[0], 1, generator=generator, dtype=x.dtype)
    xi = alpha.reshape(-1, 1, 1, 1) * x + (1 - alpha).reshape(-1, 1, 1, 1) * gz
    zi = alpha * ex + (1 - alpha) * z
    return xi.detach().requires_grad_(True), zi.detach().requires_grad_(True)


def gradient_penalty(model, x, ex, gz, z, generator=None) -> torch.Tensor:
    """Penalize the critic's joint-pair gradient norm away from 1."""
    xi, zi = _interpolate_pairs(x, ex, gz, z, generator=generator)
    scores, _ = model.discriminate(xi, zi)
    grad_x, grad_z = torch.autograd.grad(
        scores.sum(), [xi, zi], create_graph=True
    )
    sq = grad_x.flatten(1).pow(2).sum(dim=1) + grad_z.flatten(1).pow(2).sum(dim=1)
    norm = torch.sqrt(sq + 1e-12)
    return ((norm - 1.0) ** 2).mean()


def critic_loss(
    model,
    x: torch.Tensor,
    z: torch.Tensor,
    gp_weight: float = GRADIENT_PENALTY_WEIGHT,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Wasserstein critic objective over joint pairs, plus gradient penalty.

    E and G act as fixed samplers here: their outputs are detached, so
    only the critic's parameters receive gradients.
    """
    if x.shape[0] != z.shape[0]:
        raise ValueError("batch sizes differ")
    with torch.no_grad():
        ex = model.encode(x)
        gz = model.generate(z)
    d_generated, _ = model.discriminate(gz, z)
    d_real, _ = model.discriminate(x, ex)
    adversarial = d_generated.mean() - d_real.mean()
    penalty = gradient_penalty(model, x, ex, gz, z, generator=generator)
    return adversarial + gp_weight * penalty


def eg_loss(
    model,
    x: torch.Tensor,
    z: torch.Tensor,
    consistency_weight: float = 1.0,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Encoder/generator objective: negated critic term plus consistency.

    The critic's parameters are treated as constant (they simply receive
    no optimizer step from this loss). Returns the total plus a float
    breakdown of the components.
    """
    if consistency_weight < 0:
        raise ValueError("consistency weight must be >= 0")
    ex = model.encode(x)
    gz = model.generate(z)
    d_real, _ = model.discriminate(x, ex)
    d_generated, _ = model.discriminate(gz, z)
    adversarial = d_real.mean() - d_generated.mean()
    image_term = (x - model.generate(ex)).abs().mean()
    latent_term = (z - model.encode(gz)).abs().mean()
    total = adversarial + consistency_weight * (image_term + latent_term)
    parts = {
        "eg_adversarial": float(adversarial.detach()),
        "consistency_image": float(image_term.detach()),
        "consistency_latent": float(latent_term.detach()),
        "total_eg": float(total.detach()),
    }
    return total, parts


def anomaly_scores(model, x: torch.Tensor, cfg: ScoreConfig) -> torch.Tensor:
    """Per-sample anomaly score; higher means more anomalous.

    score = lambda * mean|x - G(E(x))|
          + (1 - lambda) * mean|f_D(x, E(x)) - f_D(G(E(x)), E(x))|
    """
    lam = cfg.score_lambda
    with torch.no_grad():
        ex = model.encode(x)
        rec = model.generate(ex)
        reconstruction = (x - rec).abs().flatten(1).mean(dim=1)
        _, f_real = model.discriminate(x, ex)
        _, f_rec = model.discriminate(rec, ex)
        features = (f_real - f_rec).abs().mean(dim=1)
        return lam * reconstruction + (1.0 - lam) * features


def anomaly_score(model, x: torch.Tensor, cfg: ScoreConfig) -> float:
    """Score one sample; accepts (3, r, r) or a singleton batch."""
    if x.dim() == 3:
        x = x.unsqueeze(0)
    if x.shape[0] != 1:
        raise ValueError("anomaly_score takes a single sample; use anomaly_scores")
    return float(anomaly_scores(model, x, cfg)[0])
