"""Encoder / generator / joint discriminator architectures.

The encoder is swappable: `base_conv` is a plain strided conv stack,
`residual_small`/`residual_deep` use residual downsampling blocks, and
`dense_small` uses densely-connected blocks. All encoders share the same
contract (image -> latent vector), so swapping backbones changes no
interface. The critic operates on joint (image, latent) pairs and carries
no normalization layers (it is trained with a gradient penalty); none of
the networks contain stochastic layers or running statistics, so forward
passes are deterministic in both train and eval mode.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

__all__ = ["ModelConfig", "CBiGAN", "build_model", "BACKBONES"]

BACKBONES = ("base_conv", "residual_small", "residual_deep", "dense_small")


@dataclass(frozen=True)
class ModelConfig:
    backbone_id: str = "base_conv"
    latent_dim: int = 128
    resolution: int = 64
    width: int = 16  # base channel count of the conv stacks
    z_hidden: int = 128  # critic latent-path width
    feature_dim: int = 256  # critic penultimate (feature) width

    def __post_init__(self) -> None:
        if self.backbone_id not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone_id!r}; choose from {BACKBONES}")
        r = self.resolution
        if r < 8 or r & (r - 1):
            raise ValueError("resolution must be a power of two >= 8")
        if min(self.latent_dim, self.width, self.z_hidden, self.feature_dim) < 1:
            raise ValueError("network dimensions must be >= 1")

    @property
    def n_levels(self) -> int:
        # number of 2x down/up-sampling stages between resolution and 4x4
        return self.resolution.bit_length() - 3

    def channels_at(self, level: int) -> int:
        return min(self.width << level, self.width * 8)


def _leaky() -> nn.Module:
    return nn.LeakyReLU(0.2)


class _ResBlockDown(nn.Module):
    """Pre-activation residual block with stride-2 downsampling."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, 2, 1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, 1, 1)
        self.skip = nn.Conv2d(c_in, c_out, 1, 2, 0)
        self.act = _leaky()

    def forward(self, x):
        h = self.conv2(self.act(self.conv1(self.act(x))))
        return h + self.skip(x)


class _ResBlockSame(nn.Module):
    def __init__(self, c: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c, c, 3, 1, 1)
        self.conv2 = nn.Conv2d(c, c, 3, 1, 1)
        self.act = _leaky()

    def forward(self, x):
        return x + self.conv2(self.act(self.conv1(self.act(x))))


class _DenseBlock(nn.Module):
    """Two densely-connected 3x3 convs followed by a 1x1 transition."""

    def __init__(self, c_in: int, c_out: int, growth: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, growth, 3, 1, 1)
        self.conv2 = nn.Conv2d(c_in + growth, growth, 3, 1, 1)
        self.transition = nn.Conv2d(c_in + 2 * growth, c_out, 1, 1, 0)
        self.pool = nn.AvgPool2d(2)
        self.act = _leaky()

    def forward(self, x):
        h1 = self.act(self.conv1(x))
        x = torch.cat([x, h1], dim=1)
        h2 = self.act(self.conv2(x))
        x = torch.cat([x, h2], dim=1)
        return self.pool(self.act(self.transition(x)))


def _conv_trunk(cfg: ModelConfig) -> tuple[nn.Sequential, int]:
    layers: list[nn.Module] = []
    c_in = 3
    for level in range(cfg.n_levels):
        c_out = cfg.channels_at(level)
        layers += [nn.Conv2d(c_in, c_out, 4, 2, 1), _leaky()]
        c_in = c_out
    return nn.Sequential(*layers), c_in


class Encoder(nn.Module):
    """Image (3, r, r) -> latent vector."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c_in = 3
        blocks: list[nn.Module] = []
        if cfg.backbone_id == "base_conv":
            trunk, c_in = _conv_trunk(cfg)
            blocks.append(trunk)
        elif cfg.backbone_id in ("residual_small", "residual_deep"):
            for level in range(cfg.n_levels):
                c_out = cfg.channels_at(level)
                blocks.append(_ResBlockDown(c_in, c_out))
                if cfg.backbone_id == "residual_deep":
                    blocks.append(_ResBlockSame(c_out))
                c_in = c_out
        else:  # dense_small
            for level in range(cfg.n_levels):
                c_out = cfg.channels_at(level)
                blocks.append(_DenseBlock(c_in, c_out, growth=max(cfg.width // 2, 1)))
                c_in = c_out
        self.trunk = nn.Sequential(*blocks)
        self.head = nn.Linear(c_in * 16, cfg.latent_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        cfg = self.cfg
        if x.dim() != 4 or tuple(x.shape[1:]) != (3, cfg.resolution, cfg.resolution):
            raise ValueError(
                f"encoder expects (n, 3, {cfg.resolution}, {cfg.resolution}), got {tuple(x.shape)}"
            )
        return self.head(self.trunk(x).flatten(1))


class Generator(nn.Module):
    """Latent vector -> image (3, r, r) with tanh output in [-1, 1]."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.c_top = cfg.channels_at(cfg.n_levels - 1)
        self.head = nn.Linear(cfg.latent_dim, self.c_top * 16)
        layers: list[nn.Module] = []
        c_in = self.c_top
        for level in reversed(range(cfg.n_levels - 1)):
            c_out = cfg.channels_at(level)
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(c_in, c_out, 3, 1, 1),
                _leaky(),
            ]
            c_in = c_out
        layers += [
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(c_in, 3, 3, 1, 1),
            nn.Tanh(),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        cfg = self.cfg
        if z.dim() != 2 or z.shape[1] != cfg.latent_dim:
            raise ValueError(f"generator expects (n, {cfg.latent_dim}), got {tuple(z.shape)}")
        h = self.head(z).reshape(-1, self.c_top, 4, 4)
        return self.net(h)


class Discriminator(nn.Module):
    """Joint critic over (image, latent) pairs.

    Returns an unbounded Wasserstein-style score and the penultimate-layer
    activations used as the feature vector of the anomaly score.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.trunk, c_top = _conv_trunk(cfg)
        self.z_path = nn.Sequential(nn.Linear(cfg.latent_dim, cfg.z_hidden), _leaky())
        self.joint = nn.Sequential(
            nn.Linear(c_top * 16 + cfg.z_hidden, cfg.feature_dim), _leaky()
        )
        self.out = nn.Linear(cfg.feature_dim, 1)

    def forward(self, x: torch.Tensor, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        cfg = self.cfg
        if x.dim() != 4 or tuple(x.shape[1:]) != (3, cfg.resolution, cfg.resolution):
            raise ValueError(
                f"discriminator expects images (n, 3, {cfg.resolution}, {cfg.resolution}), got {tuple(x.shape)}"
            )
        if z.dim() != 2 or z.shape[1] != cfg.latent_dim:
            raise ValueError(f"discriminator expects latents (n, {cfg.latent_dim}), got {tuple(z.shape)}")
        if x.shape[0] != z.shape[0]:
            raise ValueError("image and latent batch sizes differ")
        hx = self.trunk(x).flatten(1)
        hz = self.z_path(z)
        features = self.joint(torch.cat([hx, hz], dim=1))
        return self.out(features).squeeze(1), features


class CBiGAN(nn.Module):
    """Encoder + generator + joint critic under one parameter container."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.generator = Generator(cfg)
        self.discriminator = Discriminator(cfg)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def generate(self, z: torch.Tensor) -> torch.Tensor:
        return self.generator(z)

    def discriminate(self, x: torch.Tensor, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.discriminator(x, z)

    def sample_latent(self, n: int, generator: torch.Generator | None = None) -> torch.Tensor:
        """Draw n latent vectors from the standard normal prior."""
        return torch.randn(
            n, self.cfg.latent_dim, generator=generator,
            dtype=next(self.parameters()).dtype,
        )

    def config_dict(self) -> dict:
        return asdict(self.cfg)


def build_model(cfg: ModelConfig, seed: int | None = None) -> CBiGAN:
    """Construct a CBiGAN; with a seed, initialization is reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    return CBiGAN(cfg)
