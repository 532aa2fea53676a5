"""Synthetic "identity + motion" video dataset.

Each video shows a single colored shape (disc, square or triangle) whose
identity attributes are constant over time while its center orbits and it
spins smoothly.  Frames are rasterized on demand and are pure functions of
(spec, t), so a dataset needs no stored pixels and is reproducible bitwise
from one master seed.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from . import rng
from .configs import DataConfig

SHAPES = ("disc", "square", "triangle")


@dataclass(frozen=True)
class VideoSpec:
    shape: str
    color: tuple[float, float, float]  # in [-1, 1]
    scale: float  # shape radius as a fraction of image side
    center: tuple[float, float]  # orbit center, fraction of image side
    orbit_radius: float
    angular_velocity: float
    phase: float
    spin_velocity: float
    length: int
    seed: int


@dataclass(frozen=True)
class ClipSample:
    frames: torch.Tensor  # (4, C, H, W)
    timestamps: tuple[int, int, int, int]
    deltas: tuple[float, float, float]
    video_index: int


def _shape_distance(shape: str, x: np.ndarray, y: np.ndarray, radius: float,
                    angle: float) -> np.ndarray:
    """Signed distance to the shape boundary (negative inside), in the
    shape's local frame rotated by angle."""
    ca, sa = math.cos(angle), math.sin(angle)
    xr = ca * x + sa * y
    yr = -sa * x + ca * y
    if shape == "disc":
        return np.hypot(xr, yr) - radius
    if shape == "square":
        return np.maximum(np.abs(xr), np.abs(yr)) - radius
    if shape == "triangle":
        # equilateral triangle as intersection of three half planes
        d = yr - radius
        for rot in (2 * math.pi / 3, 4 * math.pi / 3):
            c, s = math.cos(rot), math.sin(rot)
            d = np.maximum(d, (c * yr - s * xr) - radius)
        return d
    raise ValueError(f"unknown shape {shape!r}")


def object_center(spec: VideoSpec, t: float) -> tuple[float, float]:
    """Object center at time t in pixel-fraction coordinates."""
    angle = spec.phase + spec.angular_velocity * t
    return (spec.center[0] + spec.orbit_radius * math.cos(angle),
            spec.center[1] + spec.orbit_radius * math.sin(angle))


def render_frame(spec: VideoSpec, t: int, resolution: int, channels: int = 3
                 ) -> torch.Tensor:
    """Anti-aliased rasterization; values in [-1, 1], shape (C, H, W)."""
    if not 0 <= t < spec.length:
        raise ValueError(f"t={t} outside [0, {spec.length})")
    side = resolution
    coords = (np.arange(side, dtype=np.float64) + 0.5) / side
    gx, gy = np.meshgrid(coords, coords, indexing="xy")
    cx, cy = object_center(spec, t)
    spin = spec.phase + spec.spin_velocity * t
    d = _shape_distance(spec.shape, gx - cx, gy - cy, spec.scale, spin)
    # one-pixel smooth edge
    px = 1.0 / side
    alpha = np.clip(0.5 - d / px, 0.0, 1.0)
    background = -0.9
    img = np.empty((channels, side, side), dtype=np.float64)
    for c in range(channels):
        fg = spec.color[c % 3]
        img[c] = background * (1.0 - alpha) + fg * alpha
    return torch.from_numpy(img.astype(np.float32))


def make_spec(master_seed: int, index: int, length: int) -> VideoSpec:
    u = rng.uniform((rng.TAG_DATASET, master_seed, index), 12)
    shape = SHAPES[int(u[0] * len(SHAPES)) % len(SHAPES)]
    color = tuple(-0.2 + 1.2 * u[1:4])  # keep clear of the background level
    scale = 0.08 + 0.10 * u[4]
    center = (0.35 + 0.3 * u[5], 0.35 + 0.3 * u[6])
    orbit_radius = 0.05 + 0.12 * u[7]
    angular_velocity = (0.5 + 1.5 * u[8]) * 2 * math.pi / length
    phase = 2 * math.pi * u[9]
    spin_velocity = (u[10] - 0.5) * 4 * math.pi / length
    return VideoSpec(shape=shape, color=color, scale=float(scale), center=center,
                     orbit_radius=float(orbit_radius),
                     angular_velocity=float(angular_velocity), phase=float(phase),
                     spin_velocity=float(spin_velocity), length=length,
                     seed=rng.fold_key((master_seed, index)))


class ShapeVideoDataset:
    def __init__(self, cfg: DataConfig):
        self.cfg = cfg
        self.specs = [make_spec(cfg.master_seed, i, cfg.video_length)
                      for i in range(cfg.num_videos)]

    def __len__(self) -> int:
        return len(self.specs)

    def frame(self, video_index: int, t: int) -> torch.Tensor:
        return render_frame(self.specs[video_index], t,
                            self.cfg.resolution, self.cfg.channels)

    def clip(self, video_index: int, timestamps) -> torch.Tensor:
        return torch.stack([self.frame(video_index, int(t)) for t in timestamps])

    def sample_frame(self, rand) -> torch.Tensor:
        """Class-aware frame draw: video uniform, then frame uniform in it."""
        v = rand.randrange(len(self.specs))
        t = rand.randrange(self.specs[v].length)
        return self.frame(v, t)

    def sample_clip(self, rand, max_t: int) -> ClipSample:
        from .training import sample_timestamps
        v = rand.randrange(len(self.specs))
        ts = sample_timestamps(min(max_t, self.specs[v].length - 1), rand)
        frames = self.clip(v, ts)
        deltas = tuple(float(ts[i + 1] - ts[i]) for i in range(3))
        return ClipSample(frames=frames, timestamps=ts, deltas=deltas, video_index=v)

    def export_frames(self, video_index: int, out_dir: str) -> None:
        from PIL import Image
        os.makedirs(out_dir, exist_ok=True)
        for t in range(self.specs[video_index].length):
            img = self.frame(video_index, t).numpy()
            arr = np.clip((img.transpose(1, 2, 0) + 1) * 127.5, 0, 255).astype(np.uint8)
            Image.fromarray(arr).save(os.path.join(out_dir, f"frame_{t:06d}.png"))
