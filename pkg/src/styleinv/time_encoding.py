"""Continuous-time motion codes with a fixed zero-timestamp value.

A video is identified by an integer seed.  Noise vectors live at anchor
timestamps i * anchor_distance; anchor 0 is a learnable constant shared by
every video, anchors i >= 1 come from the counter RNG keyed (seed, i), so
any anchor is randomly accessible.  A stack of left-padded causal 1D
convolutions maps anchors to tokens, with learnable constant pad vectors,
which makes token 0 (and hence the code at t = 0) independent of the seed.
Codes at arbitrary t interpolate between adjacent tokens with a monotone,
endpoint-pinned learnable curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import rng
from .configs import TimeCodeConfig

LRELU_SLOPE = 0.2


@dataclass(frozen=True)
class AnchorTrack:
    """Identifies one video's anchor noise sequence."""
    video_seed: int


class TimeEncoder(nn.Module):
    def __init__(self, cfg: TimeCodeConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.code_dim
        self.first_anchor = nn.Parameter(torch.randn(d))
        self.conv_weights = nn.ParameterList(
            nn.Parameter(torch.randn(d, d, cfg.kernel_size) / math.sqrt(d * cfg.kernel_size))
            for _ in range(cfg.conv_layers)
        )
        self.conv_biases = nn.ParameterList(
            nn.Parameter(torch.zeros(d)) for _ in range(cfg.conv_layers)
        )
        # one constant pad vector per padded position, per layer
        self.pad_vectors = nn.ParameterList(
            nn.Parameter(torch.randn(cfg.pad_len, d) * 0.1)
            for _ in range(cfg.conv_layers)
        )
        # raw interpolation parameters; beta = sigmoid(s) in (0, 1)
        self.interp_raw = nn.Parameter(torch.zeros(d))

    @property
    def dtype(self) -> torch.dtype:
        return self.first_anchor.dtype

    @property
    def beta(self) -> torch.Tensor:
        return torch.sigmoid(self.interp_raw)

    # -- anchors -------------------------------------------------------------

    def anchor_noise(self, track: AnchorTrack, i: int) -> torch.Tensor:
        if i < 0:
            raise ValueError(f"anchor index must be >= 0, got {i}")
        if i == 0 and self.cfg.first_frame_fixed:
            return self.first_anchor
        vals = rng.normal((rng.TAG_ANCHOR, track.video_seed, i), self.cfg.code_dim)
        return torch.as_tensor(vals, dtype=self.dtype)

    # -- tokens ----------------------------------------------------------------

    def tokens(self, track: AnchorTrack, lo: int, hi: int) -> torch.Tensor:
        """Token vectors u_lo..u_hi, shape (hi - lo + 1, code_dim).

        Each conv layer left-pads its own input sequence with its constant
        pad vectors, so an output position only depends on the pads and on
        anchors inside its receptive field.
        """
        if lo < 0 or hi < lo:
            raise ValueError(f"bad token range [{lo}, {hi}]")
        k = self.cfg.kernel_size
        L = self.cfg.conv_layers
        # layer l (1-based) produces outputs at [lo - (k-1)*(L-l), hi]
        seq_lo = lo - (k - 1) * L  # input positions needed at the bottom layer
        prev = None  # outputs of the previous layer, positions prev_lo..hi
        prev_lo = seq_lo
        for l in range(L):
            out_lo = lo - (k - 1) * (L - 1 - l)
            in_lo = out_lo - (k - 1)
            cols = []
            for q in range(in_lo, hi + 1):
                if q < 0:
                    cols.append(self.pad_vectors[l][q + self.cfg.pad_len])
                elif l == 0:
                    cols.append(self.anchor_noise(track, q))
                else:
                    cols.append(F.leaky_relu(prev[q - prev_lo], LRELU_SLOPE))
            x = torch.stack(cols, dim=-1).unsqueeze(0)  # (1, d, len)
            y = F.conv1d(x, self.conv_weights[l], self.conv_biases[l])
            prev = y.squeeze(0).transpose(0, 1)  # (positions, d)
            prev_lo = out_lo
        return prev

    def token(self, track: AnchorTrack, i: int) -> torch.Tensor:
        return self.tokens(track, i, i)[0]

    # -- continuous codes -------------------------------------------------------

    def interp_curve(self, f: torch.Tensor) -> torch.Tensor:
        """Per-channel interpolation weight a(f), a(0)=0, a(1)=1, monotone."""
        return f + self.beta * torch.sin(2 * math.pi * f) / (2 * math.pi)

    def encode(self, track: AnchorTrack, t: float) -> torch.Tensor:
        if not (isinstance(t, (int, float)) and math.isfinite(t)):
            raise ValueError(f"timestamp must be finite, got {t!r}")
        if t < 0:
            raise ValueError(f"timestamp must be >= 0, got {t}")
        pos = t / self.cfg.anchor_distance
        i = int(math.floor(pos))
        f = pos - i
        if f == 0.0:
            return self.token(track, i)
        pair = self.tokens(track, i, i + 1)
        a = self.interp_curve(torch.as_tensor(f, dtype=self.dtype))
        return pair[0] + a * (pair[1] - pair[0])

    def encode_many(self, track: AnchorTrack, ts) -> torch.Tensor:
        return torch.stack([self.encode(track, float(t)) for t in ts])
