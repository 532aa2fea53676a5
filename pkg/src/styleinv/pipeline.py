"""Bundles the full model stack and its checkpoint round-trip."""

from __future__ import annotations

import torch

from .checkpoint import (CheckpointBundle, CheckpointError, load_bundle,
                         load_module, module_tensors, save_bundle)
from .configs import ExperimentConfig
from .decoder import Decoder
from .discriminator import SparseFrameDiscriminator, VideoDiscriminator
from .encoder import MotionGenerator, RawInversionEncoder
from .time_encoding import AnchorTrack, TimeEncoder


class VideoPipeline:
    """Decoder + motion generator + discriminators, built from one config."""

    def __init__(self, cfg: ExperimentConfig, seed: int = 0):
        self.cfg = cfg
        torch.manual_seed(seed)
        self.decoder = Decoder(cfg.decoder)
        self.raw_encoder = RawInversionEncoder(cfg.encoder)
        self.time_encoder = TimeEncoder(cfg.time_code)
        self.motion = MotionGenerator(cfg.encoder, self.time_encoder, cfg.style_head)
        if cfg.train.ffa_disc_enabled:
            self.discriminator = VideoDiscriminator(cfg.discriminator)
        else:
            self.discriminator = SparseFrameDiscriminator(cfg.discriminator)

    # -- generation ----------------------------------------------------------

    def video_setup(self, video_seed: int, truncation: float = 1.0):
        w0 = self.decoder.sample_w0(video_seed, truncation)
        track = AnchorTrack(video_seed)
        noise = None
        if self.cfg.decoder.noise_mode == "constant_per_video":
            noise = self.decoder.sample_video_noise(video_seed)
        return w0, track, noise

    @torch.no_grad()
    def latents_at(self, w0: torch.Tensor, track: AnchorTrack, timestamps,
                   noise=None) -> torch.Tensor:
        """Motion latents for a list of timestamps, sharing one rendered
        initial frame."""
        frame = self.motion.render_initial(self.decoder, w0, track, noise)
        codes = self.motion.time_encoder.encode_many(track, timestamps)
        w0_rep = w0.unsqueeze(0).expand(codes.shape[0], -1)
        styles = self.motion.style_head.fuse(codes, w0_rep)
        frames = frame.unsqueeze(0).expand(codes.shape[0], *frame.shape)
        residuals = self.motion.encode_frame(frames, styles)
        return residuals + w0_rep

    @torch.no_grad()
    def generate(self, video_seed: int, num_frames: int, fps_multiplier: float = 1.0,
                 truncation: float = 1.0, w0: torch.Tensor | None = None,
                 batch: int = 16):
        """Frames at t = 0, 1/M, ..., (N*M-1)/M.  Returns (frames, latents)."""
        if num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if fps_multiplier <= 0:
            raise ValueError("fps_multiplier must be > 0")
        if w0 is None:
            w0, track, noise = self.video_setup(video_seed, truncation)
        else:
            _, track, noise = self.video_setup(video_seed, truncation)
        total = int(round(num_frames * fps_multiplier))
        timestamps = [j / fps_multiplier for j in range(total)]
        latents, frames = [], []
        for i in range(0, total, batch):
            lat = self.latents_at(w0, track, timestamps[i:i + batch], noise)
            latents.append(lat)
            frames.append(self.decoder.synthesize(lat, noise))
        return torch.cat(frames), torch.cat(latents)

    # -- checkpointing ---------------------------------------------------------

    def to_bundle(self, extra: dict | None = None) -> CheckpointBundle:
        tensors = {}
        tensors.update(module_tensors("decoder", self.decoder))
        tensors.update(module_tensors("raw_encoder", self.raw_encoder))
        tensors.update(module_tensors("motion", self.motion))
        tensors.update(module_tensors("discriminator", self.discriminator))
        return CheckpointBundle(config=self.cfg, tensors=tensors, extra=extra or {})

    def save(self, path, extra: dict | None = None) -> None:
        save_bundle(path, self.to_bundle(extra))

    @classmethod
    def load(cls, path) -> "VideoPipeline":
        bundle = load_bundle(path)
        pipe = cls(bundle.config)
        for prefix, module in (("decoder", pipe.decoder),
                               ("raw_encoder", pipe.raw_encoder),
                               ("motion", pipe.motion),
                               ("discriminator", pipe.discriminator)):
            load_module(bundle, prefix, module)
        return pipe
