"""Discriminators for sparse video training and image pretraining.

The video discriminator scores a 4-frame sample conditioned on the three
time deltas between consecutive frames: a shared 2D-conv extractor per
frame, a small MLP embedding of log(1+delta), and an MLP head over the
concatenation.  No 3D convolutions anywhere.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .configs import DiscriminatorConfig

LRELU_SLOPE = 0.2


class FrameFeatures(nn.Module):
    """Shared per-frame feature extractor, downsampling to 4x4 then pooling."""

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        res = cfg.img_resolution
        self.from_img = nn.Conv2d(cfg.img_channels, cfg.channels(res), 3, padding=1)
        convs = []
        while res > 4:
            convs.append(nn.Conv2d(cfg.channels(res), cfg.channels(res // 2),
                                   3, stride=2, padding=1))
            res //= 2
        self.convs = nn.ModuleList(convs)
        self.out_dim = cfg.channels(4)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.leaky_relu(self.from_img(x), LRELU_SLOPE)
        for conv in self.convs:
            h = F.leaky_relu(conv(h), LRELU_SLOPE)
        return h.mean(dim=(-1, -2))


class DeltaEmbed(nn.Module):
    """Embeds a nonnegative time delta via an MLP on log(1+delta)."""

    def __init__(self, dim: int):
        super().__init__()
        self.fc1 = nn.Linear(1, dim)
        self.fc2 = nn.Linear(dim, dim)

    def forward(self, delta: torch.Tensor) -> torch.Tensor:
        if (delta < 0).any():
            raise ValueError("time deltas must be >= 0")
        x = torch.log1p(delta).unsqueeze(-1)
        return self.fc2(F.leaky_relu(self.fc1(x), LRELU_SLOPE))


class VideoDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        self.features = FrameFeatures(cfg)
        self.delta_embed = DeltaEmbed(cfg.delta_embed_dim)
        in_dim = cfg.num_frames * self.features.out_dim \
            + (cfg.num_frames - 1) * cfg.delta_embed_dim
        self.head = nn.Sequential(
            nn.Linear(in_dim, in_dim // 2),
            nn.LeakyReLU(LRELU_SLOPE),
            nn.Linear(in_dim // 2, 1),
        )

    def forward(self, frames: torch.Tensor, deltas: torch.Tensor) -> torch.Tensor:
        """frames: (B, num_frames, C, H, W); deltas: (B, num_frames - 1)."""
        if frames.dim() == 4:
            frames = frames.unsqueeze(0)
        if deltas.dim() == 1:
            deltas = deltas.unsqueeze(0)
        if frames.shape[1] != self.cfg.num_frames:
            raise ValueError(f"expected {self.cfg.num_frames} frames, "
                             f"got {frames.shape[1]}")
        if deltas.shape[1] != self.cfg.num_frames - 1:
            raise ValueError(f"expected {self.cfg.num_frames - 1} deltas, "
                             f"got {deltas.shape[1]}")
        b, k = frames.shape[:2]
        feats = self.features(frames.reshape(b * k, *frames.shape[2:]))
        feats = feats.reshape(b, -1)
        embeds = self.delta_embed(deltas.reshape(-1)).reshape(b, -1)
        return self.head(torch.cat([feats, embeds], dim=-1)).squeeze(-1)


class SparseFrameDiscriminator(nn.Module):
    """Same architecture without the first-frame slot: 3 frames, 2 deltas.
    Used by the ablation that drops first-frame awareness."""

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        import dataclasses
        self.inner = VideoDiscriminator(dataclasses.replace(cfg, num_frames=3))

    def forward(self, frames: torch.Tensor, deltas: torch.Tensor) -> torch.Tensor:
        return self.inner(frames, deltas)


class ImageDiscriminator(nn.Module):
    """Plain single-image discriminator for decoder pretraining."""

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.features = FrameFeatures(cfg)
        self.head = nn.Linear(self.features.out_dim, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        return self.head(self.features(x)).squeeze(-1)


def grad_penalty(logits: torch.Tensor, frames: torch.Tensor, gamma: float = 1.0
                 ) -> torch.Tensor:
    """(gamma/2) * squared gradient norm of the logits w.r.t. real inputs,
    averaged over the batch."""
    if gamma == 0:
        return logits.new_zeros(())
    if not frames.requires_grad:
        raise ValueError("r1 penalty needs frames with requires_grad=True")
    grads = torch.autograd.grad(logits.sum(), frames, create_graph=True)[0]
    sq = grads.reshape(grads.shape[0], -1).pow(2).sum(dim=1)
    return 0.5 * gamma * sq.mean()


def r1_penalty(disc: nn.Module, frames: torch.Tensor,
               deltas: torch.Tensor | None = None, gamma: float = 1.0
               ) -> torch.Tensor:
    """R1 penalty of a discriminator at real inputs."""
    frames = frames.detach().requires_grad_(True)
    logits = disc(frames) if deltas is None else disc(frames, deltas)
    return grad_penalty(logits, frames, gamma)
