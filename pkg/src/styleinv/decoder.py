"""Style-based image decoder: mapping network plus synthesis pyramid.

A small stand-in for a full style generator that keeps the contract the
rest of the pipeline needs: an intermediate latent space with a tracked
mean, per-block style modulation, optional per-block spatial noise, and
resolution-tiered parameter freezing for domain fine-tuning.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import rng
from .configs import DecoderConfig

LRELU_SLOPE = 0.2


class MappingNetwork(nn.Module):
    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.z_dim = cfg.z_dim
        self.w_dim = cfg.w_dim
        dims = [cfg.z_dim] + [cfg.w_dim] * cfg.mapping_layers
        self.layers = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(cfg.mapping_layers)
        )
        # running-mean state for the average latent; kept in float64 so the
        # stored mean matches the arithmetic mean of the mapped outputs
        self.register_buffer("w_sum", torch.zeros(cfg.w_dim, dtype=torch.float64))
        self.register_buffer("w_count", torch.zeros((), dtype=torch.float64))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-1] != self.z_dim:
            raise ValueError(f"z has dim {z.shape[-1]}, expected {self.z_dim}")
        h = z
        for layer in self.layers:
            h = F.leaky_relu(layer(h), LRELU_SLOPE)
        return h

    @property
    def w_avg(self) -> torch.Tensor:
        if self.w_count.item() == 0:
            return torch.zeros(self.w_dim, dtype=self.layers[0].weight.dtype)
        return (self.w_sum / self.w_count).to(self.layers[0].weight.dtype)

    def map_latent(self, z: torch.Tensor, truncation: float = 1.0,
                   update_stats: bool = False) -> torch.Tensor:
        if not (0.0 <= truncation <= 1.0):
            raise ValueError(f"truncation must be in [0, 1], got {truncation}")
        squeeze = z.dim() == 1
        w = self(z.unsqueeze(0) if squeeze else z)
        if update_stats:
            with torch.no_grad():
                self.w_sum += w.detach().double().sum(dim=0)
                self.w_count += w.shape[0]
        if truncation != 1.0:
            w = self.w_avg.to(w) + truncation * (w - self.w_avg.to(w))
        return w.squeeze(0) if squeeze else w


class SynthesisBlock(nn.Module):
    """One resolution tier: upsample, conv, per-channel style, lrelu, noise."""

    def __init__(self, res: int, in_ch: int, out_ch: int, w_dim: int):
        super().__init__()
        self.res = res
        if res == 4:
            self.const = nn.Parameter(torch.randn(in_ch, 4, 4))
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.style = nn.Linear(w_dim, 2 * out_ch)
        self.noise_strength = nn.Parameter(torch.zeros(()))

    def forward(self, h: torch.Tensor | None, w: torch.Tensor,
                noise: torch.Tensor | None) -> torch.Tensor:
        if self.res == 4:
            h = self.const.unsqueeze(0).expand(w.shape[0], -1, -1, -1)
        else:
            h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.conv(h)
        style = self.style(w)
        scale, shift = style.chunk(2, dim=-1)
        h = h * (1 + scale)[:, :, None, None] + shift[:, :, None, None]
        h = F.leaky_relu(h, LRELU_SLOPE)
        if noise is not None:
            h = h + self.noise_strength * noise
        return h


class Decoder(nn.Module):
    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.cfg = cfg
        self.mapping = MappingNetwork(cfg)
        blocks = []
        prev_ch = cfg.channels(4)
        for res in cfg.block_resolutions:
            out_ch = cfg.channels(res)
            blocks.append(SynthesisBlock(res, prev_ch if res > 4 else cfg.channels(4),
                                         out_ch, cfg.w_dim))
            prev_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.to_rgb = nn.Conv2d(prev_ch, cfg.img_channels, 1)

    # -- latent handling ---------------------------------------------------

    def map_latent(self, z, truncation: float = 1.0, update_stats: bool = False):
        return self.mapping.map_latent(z, truncation, update_stats)

    @property
    def w_avg(self) -> torch.Tensor:
        return self.mapping.w_avg

    def sample_w0(self, video_seed: int, truncation: float = 1.0) -> torch.Tensor:
        """Deterministic per-video initial latent from the counter RNG."""
        z = rng.normal((rng.TAG_LATENT, video_seed), self.cfg.z_dim)
        z = torch.as_tensor(z, dtype=self.dtype)
        return self.map_latent(z, truncation)

    # -- synthesis ---------------------------------------------------------

    @property
    def dtype(self) -> torch.dtype:
        return self.to_rgb.weight.dtype

    def sample_video_noise(self, video_seed: int) -> dict[int, torch.Tensor]:
        """Per-block spatial noise, a pure function of the video seed."""
        out = {}
        for block in self.blocks:
            res = block.res
            vals = rng.normal((rng.TAG_SYNTH_NOISE, video_seed, res), res * res)
            out[res] = torch.as_tensor(vals.reshape(res, res), dtype=self.dtype)
        return out

    def synthesize(self, w: torch.Tensor, noise: dict[int, torch.Tensor] | None = None
                   ) -> torch.Tensor:
        squeeze = w.dim() == 1
        if squeeze:
            w = w.unsqueeze(0)
        if w.shape[-1] != self.cfg.w_dim:
            raise ValueError(f"latent dim {w.shape[-1]} != w_dim {self.cfg.w_dim}")
        if not torch.isfinite(w).all():
            raise FloatingPointError("latent has non-finite entries")
        mode = self.cfg.noise_mode
        if mode == "constant_per_video" and noise is None:
            raise ValueError("noise_mode=constant_per_video requires an explicit "
                             "noise realization")
        h = None
        for block in self.blocks:
            if mode == "off":
                n = None
            elif mode == "random":
                n = torch.randn(block.res, block.res, dtype=w.dtype, device=w.device)
            else:
                n = noise[block.res].to(w.dtype)
            h = block(h, w, n)
        img = self.to_rgb(h)
        return img.squeeze(0) if squeeze else img

    # -- freezing ----------------------------------------------------------

    def freeze_tier(self, max_resolution: int) -> set[str]:
        """Names of mapping + synthesis params at resolution <= max_resolution."""
        r = max_resolution
        if r < 4 or (r & (r - 1)) != 0:
            raise ValueError(f"max_resolution must be a power of two >= 4, got {r}")
        if r >= self.cfg.img_resolution:
            raise ValueError("max_resolution must be below img_resolution, "
                             "otherwise nothing is left to train")
        frozen = {f"mapping.{n}" for n, _ in self.mapping.named_parameters()}
        for i, block in enumerate(self.blocks):
            if block.res <= r:
                frozen |= {f"blocks.{i}.{n}" for n, _ in block.named_parameters()}
        return frozen

    def apply_freeze(self, frozen: set[str]) -> None:
        for name, p in self.named_parameters():
            p.requires_grad_(name not in frozen)
