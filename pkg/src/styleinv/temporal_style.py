"""Fuses motion code and initial latent into the per-timestamp style.

The style vector goes through one learned affine per AdaIN site of the
encoder to yield that site's (scale, shift).  Scales are produced as
1 + raw so zero-initialized affines start at identity modulation.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .configs import StyleHeadConfig

LRELU_SLOPE = 0.2


class StyleHead(nn.Module):
    def __init__(self, cfg: StyleHeadConfig, site_channels: list[int]):
        super().__init__()
        self.cfg = cfg
        in_dim = cfg.code_dim + cfg.w_dim
        self.fc1 = nn.Linear(in_dim, cfg.style_dim)
        self.fc2 = nn.Linear(cfg.style_dim, cfg.style_dim)
        self.site_affines = nn.ModuleList(
            nn.Linear(cfg.style_dim, 2 * ch) for ch in site_channels
        )
        for affine in self.site_affines:
            nn.init.zeros_(affine.weight)
            nn.init.zeros_(affine.bias)

    def fuse(self, v_t: torch.Tensor, w0: torch.Tensor) -> torch.Tensor:
        if v_t.shape[-1] != self.cfg.code_dim:
            raise ValueError(f"motion code dim {v_t.shape[-1]} != {self.cfg.code_dim}")
        if w0.shape[-1] != self.cfg.w_dim:
            raise ValueError(f"latent dim {w0.shape[-1]} != {self.cfg.w_dim}")
        h = torch.cat([v_t, w0], dim=-1)
        return self.fc2(F.leaky_relu(self.fc1(h), LRELU_SLOPE))

    def site_params(self, s_t: torch.Tensor, site: int) -> tuple[torch.Tensor, torch.Tensor]:
        if not 0 <= site < len(self.site_affines):
            raise IndexError(f"site {site} out of range [0, {len(self.site_affines)})")
        raw = self.site_affines[site](s_t)
        scale_raw, shift = raw.chunk(2, dim=-1)
        return 1 + scale_raw, shift
