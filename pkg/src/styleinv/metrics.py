"""Desk-scale quantitative metrics.

Frechet distances are computed over a fixed, seeded, randomly initialized
conv feature extractor.  Absolute values are only meaningful relative to
each other (orderings and ratios), never against published benchmark
numbers.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

LRELU_SLOPE = 0.2


class FeatureExtractor(nn.Module):
    """Frozen random conv net mapping a frame to a 64-dim feature."""

    def __init__(self, resolution: int, channels: int = 3, feat_dim: int = 64,
                 seed: int = 99):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        convs = []
        res, in_ch = resolution, channels
        while res > 4:
            out_ch = min(64, 8 * (resolution // res) * 4)
            convs.append(nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1))
            in_ch, res = out_ch, res // 2
        self.convs = nn.ModuleList(convs)
        self.fc = nn.Linear(in_ch, feat_dim)
        with torch.no_grad():
            for p in self.parameters():
                p.copy_(torch.randn(p.shape, generator=gen) / np.sqrt(max(1, p[0].numel())))
        for p in self.parameters():
            p.requires_grad_(False)

    @torch.no_grad()
    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        h = frames
        for conv in self.convs:
            h = F.leaky_relu(conv(h), LRELU_SLOPE)
        return self.fc(h.mean(dim=(-1, -2)))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(mu1, sigma1, mu2, sigma2) -> float:
    """Frechet distance between two Gaussians.

    Tr((S1 S2)^{1/2}) is evaluated as Tr((S2^{1/2} S1 S2^{1/2})^{1/2}),
    which is symmetric, via eigendecomposition with negative eigenvalues
    clamped to zero.
    """
    mu1, mu2 = np.asarray(mu1, float), np.asarray(mu2, float)
    sigma1, sigma2 = np.atleast_2d(np.asarray(sigma1, float)), \
        np.atleast_2d(np.asarray(sigma2, float))
    for arr in (mu1, mu2, sigma1, sigma2):
        if not np.isfinite(arr).all():
            raise ValueError("non-finite Gaussian statistics")
    s2h = _psd_sqrt(sigma2)
    inner = _psd_sqrt(s2h @ sigma1 @ s2h)
    dist = float(np.sum((mu1 - mu2) ** 2)
                 + np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(inner))
    return max(dist, 0.0)


def gaussian_fit(feats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = feats.mean(axis=0)
    centered = feats - mu
    sigma = centered.T @ centered / max(1, feats.shape[0] - 1)
    return mu, sigma


def frame_features(frames: torch.Tensor, extractor: FeatureExtractor,
                   batch: int = 64) -> np.ndarray:
    outs = []
    for i in range(0, frames.shape[0], batch):
        outs.append(extractor(frames[i:i + batch]).double().numpy())
    return np.concatenate(outs, axis=0)


def fid_proxy(frames_a: torch.Tensor, frames_b: torch.Tensor,
              extractor: FeatureExtractor) -> float:
    if frames_a.shape[0] < 2 or frames_b.shape[0] < 2:
        raise ValueError("need at least 2 frames per set")
    fa = frame_features(frames_a, extractor)
    fb = frame_features(frames_b, extractor)
    return frechet_distance(*gaussian_fit(fa), *gaussian_fit(fb))


def clip_feature(clip: torch.Tensor, extractor: FeatureExtractor) -> np.ndarray:
    """Mean frame feature concatenated with mean consecutive-frame feature
    difference; the second half carries the motion signal."""
    feats = frame_features(clip, extractor)
    diffs = feats[1:] - feats[:-1]
    return np.concatenate([feats.mean(axis=0), diffs.mean(axis=0)])


def fvd_proxy(clips_a: torch.Tensor, clips_b: torch.Tensor, clip_len: int,
              extractor: FeatureExtractor) -> float:
    """clips: (N, T, C, H, W); uses exactly the first clip_len frames."""
    for clips in (clips_a, clips_b):
        if clips.shape[1] < clip_len:
            raise ValueError(f"clips of length {clips.shape[1]} are shorter "
                             f"than clip_len={clip_len}")
    fa = np.stack([clip_feature(c[:clip_len], extractor) for c in clips_a])
    fb = np.stack([clip_feature(c[:clip_len], extractor) for c in clips_b])
    return frechet_distance(*gaussian_fit(fa), *gaussian_fit(fb))


def identity_drift(clip: torch.Tensor, extractor: FeatureExtractor) -> float:
    """Feature distance between the first and last frame of one clip."""
    if clip.shape[0] < 2:
        raise ValueError("need at least 2 frames")
    feats = frame_features(clip[[0, -1]], extractor)
    return float(np.linalg.norm(feats[1] - feats[0]))


def latent_jump(latents: torch.Tensor) -> float:
    """First-step latent jump normalized by the median consecutive step.
    0/0 (constant sequence) is defined as 0."""
    if latents.shape[0] < 2:
        raise ValueError("need at least 2 latents")
    lat = latents.detach().double().numpy()
    steps = np.linalg.norm(lat[1:] - lat[:-1], axis=1)
    first = steps[0]
    med = float(np.median(steps))
    if first == 0.0:
        return 0.0
    if med == 0.0:
        return float("inf")
    return float(first / med)


def write_report(path, metrics: dict) -> None:
    """Plain-text key=value lines plus a JSON summary next to it."""
    import json
    import os
    lines = "".join(f"{k}={v}\n" for k, v in metrics.items())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(lines)
    base, _ = os.path.splitext(str(path))
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
