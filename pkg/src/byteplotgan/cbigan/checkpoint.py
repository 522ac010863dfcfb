"""Checkpoint container and parameter digests.

Layout (a single torch.save dict, format_version 1):

    format_version   int
    model_config     dict  (ModelConfig fields)
    train_config     dict  (resolved training configuration, or None)
    step             int   (training steps completed at save time)
    model            state_dict of the live CBiGAN (encoder.*, generator.*,
                     discriminator.*)
    ema              state_dict-shaped mapping of EMA shadow parameters,
                     or None when EMA was not tracked
    optimizers       {"critic": state_dict, "eg": state_dict} or None

Wall-clock metadata is deliberately kept out of the file so checkpoint
bytes and digests are reproducible; loading rebuilds the model from
model_config and validates every parameter shape.
"""

from __future__ import annotations

import hashlib
from typing import Mapping

import torch

from .networks import CBiGAN, ModelConfig, build_model

__all__ = ["save_checkpoint", "load_checkpoint", "parameter_digest", "LoadedCheckpoint"]

FORMAT_VERSION = 1


def parameter_digest(params: Mapping[str, torch.Tensor]) -> str:
    """SHA-256 over (name, raw tensor bytes) in sorted name order."""
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(params[name].detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(
    path: str,
    model: CBiGAN,
    ema_shadow: Mapping[str, torch.Tensor] | None = None,
    optimizers: Mapping[str, dict] | None = None,
    step: int = 0,
    train_config: dict | None = None,
) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config_dict(),
        "train_config": train_config,
        "step": step,
        "model": model.state_dict(),
        "ema": dict(ema_shadow) if ema_shadow is not None else None,
        "optimizers": dict(optimizers) if optimizers is not None else None,
    }
    torch.save(payload, path)


class LoadedCheckpoint:
    def __init__(self, payload: dict):
        self.model_config = ModelConfig(**payload["model_config"])
        self.train_config = payload["train_config"]
        self.step = payload["step"]
        self._payload = payload

    def build_model(self, use_ema: bool = True) -> CBiGAN:
        """Instantiate the network with the checkpointed parameters.

        With use_ema (and EMA present in the file) the smoothed shadow
        parameters are loaded; otherwise the live training parameters.
        """
        model = build_model(self.model_config)
        state = self._payload["model"]
        if use_ema and self._payload["ema"] is not None:
            state = dict(state)
            state.update(self._payload["ema"])
        model.load_state_dict(state, strict=True)
        model.eval()
        return model

    @property
    def ema_shadow(self) -> dict | None:
        return self._payload["ema"]

    @property
    def optimizers(self) -> dict | None:
        return self._payload["optimizers"]

    def digest(self, use_ema: bool = True) -> str:
        state = self._payload["model"]
        if use_ema and self._payload["ema"] is not None:
            state = dict(state)
            state.update(self._payload["ema"])
        return parameter_digest(state)


def load_checkpoint(path: str) -> LoadedCheckpoint:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    return LoadedCheckpoint(payload)
