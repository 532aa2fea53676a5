"""Inversion encoders: the raw backbone and its style-modulated variant.

Both share one backbone layout (stride-2 residual blocks down to 4x4,
each ending in a normalization site, then pooling and a final projection
to the latent dimension).  The raw encoder keeps the sites at identity
(scale 1, shift 0); the modulated encoder drives them from the temporal
style, so a raw encoder's conv weights can initialize the modulated one
and the two agree exactly when the modulation is identity.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .configs import EncoderConfig
from .decoder import Decoder
from .temporal_style import StyleHead
from .time_encoding import AnchorTrack, TimeEncoder

LRELU_SLOPE = 0.2
ADAIN_EPS = 1e-5


def adain(h: torch.Tensor, scale: torch.Tensor, shift: torch.Tensor) -> torch.Tensor:
    """Channelwise instance normalization with learned scale/shift,
    residual-added and variance-normalized: (h + scale*norm(h) + shift)/sqrt(2)."""
    mu = h.mean(dim=(-1, -2), keepdim=True)
    var = h.var(dim=(-1, -2), keepdim=True, unbiased=False)
    norm = (h - mu) / torch.sqrt(var + ADAIN_EPS)
    mod = scale[..., None, None] * norm + shift[..., None, None]
    return (h + mod) / math.sqrt(2.0)


class DownBlock(nn.Module):
    """Residual downsampling block; spatial size halves."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=2, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1, stride=2, bias=False)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        main = self.conv2(F.leaky_relu(self.conv1(h), LRELU_SLOPE))
        return (main + self.skip(h)) / math.sqrt(2.0)


class EncoderBackbone(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        res = cfg.img_resolution
        self.from_img = nn.Conv2d(cfg.img_channels, cfg.channels(res), 3, padding=1)
        blocks, site_channels = [], []
        while res > 4:
            out_ch = cfg.channels(res // 2)
            blocks.append(DownBlock(cfg.channels(res), out_ch))
            site_channels.append(out_ch)
            res //= 2
        self.blocks = nn.ModuleList(blocks)
        self.site_channels = site_channels
        self.final_fc = nn.Linear(site_channels[-1], cfg.w_dim)

    def forward(self, frame: torch.Tensor, site_params=None) -> torch.Tensor:
        """site_params: callable site -> (scale, shift); identity when None."""
        squeeze = frame.dim() == 3
        if squeeze:
            frame = frame.unsqueeze(0)
        cfg = self.cfg
        if frame.shape[-3:] != (cfg.img_channels, cfg.img_resolution, cfg.img_resolution):
            raise ValueError(f"frame shape {tuple(frame.shape[-3:])} does not match "
                             f"({cfg.img_channels}, {cfg.img_resolution}, {cfg.img_resolution})")
        h = F.leaky_relu(self.from_img(frame), LRELU_SLOPE)
        for site, block in enumerate(self.blocks):
            h = block(h)
            if site_params is None:
                ch = h.shape[1]
                scale = h.new_ones(h.shape[0], ch)
                shift = h.new_zeros(h.shape[0], ch)
            else:
                scale, shift = site_params(site)
            h = adain(h, scale, shift)
        pooled = h.mean(dim=(-1, -2))
        out = self.final_fc(pooled)
        return out.squeeze(0) if squeeze else out

    def conv_state(self) -> dict[str, torch.Tensor]:
        """All conv tensors (everything except the final projection)."""
        return {n: p for n, p in self.state_dict().items()
                if not n.startswith("final_fc.")}


class RawInversionEncoder(nn.Module):
    """Plain image-to-residual-latent encoder; residual is w.r.t. the
    decoder's mean latent."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.backbone = EncoderBackbone(cfg)

    def forward(self, frame: torch.Tensor) -> torch.Tensor:
        return self.backbone(frame)

    def invert(self, frame: torch.Tensor, w_avg: torch.Tensor) -> torch.Tensor:
        return self(frame) + w_avg


class MotionGenerator(nn.Module):
    """Temporal-style-modulated inversion encoder plus its time encoder and
    style head; the trainable half of the video generator."""

    def __init__(self, enc_cfg: EncoderConfig, time_encoder: TimeEncoder,
                 style_head_cfg, render_with_noise: bool = True):
        super().__init__()
        self.backbone = EncoderBackbone(enc_cfg)
        self.time_encoder = time_encoder
        self.style_head = StyleHead(style_head_cfg, self.backbone.site_channels)
        self.render_with_noise = render_with_noise

    def encode_frame(self, frame: torch.Tensor, s_t: torch.Tensor) -> torch.Tensor:
        def site_params(site):
            scale, shift = self.style_head.site_params(s_t, site)
            if scale.dim() == 1:
                scale, shift = scale.unsqueeze(0), shift.unsqueeze(0)
            return scale, shift
        return self.backbone(frame, site_params)

    def residual(self, frame: torch.Tensor, w0: torch.Tensor, t: float,
                 track: AnchorTrack) -> torch.Tensor:
        v_t = self.time_encoder.encode(track, t)
        s_t = self.style_head.fuse(v_t, w0)
        return self.encode_frame(frame, s_t)

    def styleinv(self, decoder: Decoder, w0: torch.Tensor, t: float,
                 track: AnchorTrack, noise=None) -> torch.Tensor:
        """Motion latent at timestamp t: residual added to w0."""
        frame = self.render_initial(decoder, w0, track, noise)
        return self.residual(frame, w0, t, track) + w0

    def render_initial(self, decoder: Decoder, w0: torch.Tensor,
                       track: AnchorTrack, noise=None) -> torch.Tensor:
        if decoder.cfg.noise_mode == "constant_per_video":
            if noise is None and self.render_with_noise:
                noise = decoder.sample_video_noise(track.video_seed)
            if not self.render_with_noise:
                noise = {res: torch.zeros_like(v) for res, v in
                         decoder.sample_video_noise(track.video_seed).items()}
        return decoder.synthesize(w0, noise)

    def init_from_inversion(self, raw: RawInversionEncoder) -> None:
        """Copy the whole backbone (convs and final projection) from a
        pretrained raw encoder, so the modulated encoder starts out exactly
        equal to it under identity modulation.  The style head and time
        encoder keep their fresh initialization."""
        src = raw.backbone.state_dict()
        dst = self.backbone.state_dict()
        bad = [n for n in src if n in dst and src[n].shape != dst[n].shape]
        if set(src) != set(dst) or bad:
            raise ValueError(f"encoder backbone mismatch on tensors: "
                             f"{sorted(bad or set(src) ^ set(dst))}")
        self.backbone.load_state_dict({n: t.clone() for n, t in src.items()})
