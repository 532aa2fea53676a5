"""Training: sparse first-frame-aware video GAN plus the two pretraining
stages (image GAN for the decoder, raw inversion encoder).

Both optimizers are Adam(beta1=0, beta2=0.99) with unbalanced learning
rates; the discriminator gets a lazy R1 penalty with compensating scale.
The decoder is frozen throughout video training.
"""

from __future__ import annotations

import random

import torch
import torch.nn.functional as F
from torch import nn

from . import rng
from .configs import TrainConfig
from .data import ClipSample, ShapeVideoDataset
from .decoder import Decoder
from .discriminator import (ImageDiscriminator, SparseFrameDiscriminator,
                            VideoDiscriminator, grad_penalty)
from .encoder import MotionGenerator, RawInversionEncoder
from .time_encoding import AnchorTrack


def sample_timestamps(max_t: int, rand: random.Random) -> tuple[int, int, int, int]:
    """(0, t1, t2, t3): three distinct integers from [1, max_t], ascending."""
    if max_t < 3:
        raise ValueError(f"max_t must be >= 3, got {max_t}")
    picks = sorted(rand.sample(range(1, max_t + 1), 3))
    return (0, picks[0], picks[1], picks[2])


def adversarial_d_loss(fake_logits: torch.Tensor, real_logits: torch.Tensor
                       ) -> torch.Tensor:
    return (F.softplus(fake_logits) + F.softplus(-real_logits)).mean()


def adversarial_g_loss(fake_logits: torch.Tensor) -> torch.Tensor:
    return F.softplus(-fake_logits).mean()


def recon_loss(x0: torch.Tensor, x0_hat: torch.Tensor) -> torch.Tensor:
    """Pixel mean-square between the rendered initial frame and its
    reconstruction through the motion latent at t = 0."""
    return (x0 - x0_hat).pow(2).mean()


def latent_reg(residuals: torch.Tensor) -> torch.Tensor:
    """Sum over the 4 timestamps of squared residual norms, batch-averaged."""
    return residuals.pow(2).sum(dim=-1).sum(dim=-1).mean()


def ada_update(p: float, heuristic: float, target: float, step: float) -> float:
    """Move the augmentation probability toward putting the overfitting
    heuristic (mean sign of real logits) at the target."""
    return min(1.0, max(0.0, p + step * (heuristic - target)))


def augment_clip(frames: torch.Tensor, p: float, rand: random.Random
                 ) -> torch.Tensor:
    """Flip / integer-translate / brightness, drawn once per clip and applied
    identically to every frame of it.  frames: (B, K, C, H, W)."""
    if p <= 0:
        return frames
    out = []
    max_shift = max(1, frames.shape[-1] // 8)
    for clip in frames:
        if rand.random() < p:
            clip = torch.flip(clip, dims=[-1])
        if rand.random() < p:
            shifts = (rand.randint(-max_shift, max_shift),
                      rand.randint(-max_shift, max_shift))
            clip = torch.roll(clip, shifts=shifts, dims=(-2, -1))
        if rand.random() < p:
            clip = clip + (rand.random() - 0.5) * 0.4
        out.append(clip)
    return torch.stack(out)


class FakeBatch:
    """Everything produced for one generator batch."""

    def __init__(self, frames, latents, residuals, x0, x0_hat, deltas):
        self.frames = frames        # (B, 4, C, H, W), slot 0 is G(w0)
        self.latents = latents      # (B, 4, w_dim)
        self.residuals = residuals  # (B, 4, w_dim)
        self.x0 = x0                # (B, C, H, W), G(w0)
        self.x0_hat = x0_hat        # (B, C, H, W), G(latent at t=0)
        self.deltas = deltas        # (B, 3)


class SparseVideoTrainer:
    def __init__(self, decoder: Decoder, motion: MotionGenerator,
                 discriminator: nn.Module, dataset: ShapeVideoDataset,
                 cfg: TrainConfig, log_path=None):
        self.decoder = decoder
        self.motion = motion
        self.disc = discriminator
        self.dataset = dataset
        self.cfg = cfg
        self.rand = random.Random(cfg.seed)
        for p in decoder.parameters():
            p.requires_grad_(False)
        self.opt_e = torch.optim.Adam(motion.parameters(), lr=cfg.lr_encoder,
                                      betas=(0.0, 0.99))
        self.opt_d = torch.optim.Adam(discriminator.parameters(), lr=cfg.lr_disc,
                                      betas=(0.0, 0.99))
        self.ada_p = 0.0
        self.step_count = 0
        self.log_lines: list[str] = []
        self.log_path = log_path

    # -- batch construction -------------------------------------------------

    def real_batch(self) -> tuple[torch.Tensor, torch.Tensor]:
        samples = [self.dataset.sample_clip(self.rand, self.cfg.max_t)
                   for _ in range(self.cfg.batch_size)]
        frames = torch.stack([s.frames for s in samples])
        deltas = torch.tensor([s.deltas for s in samples],
                              dtype=frames.dtype)
        return frames, deltas

    def fake_batch(self) -> FakeBatch:
        cfg = self.cfg
        frames, latents, residuals, x0s, x0_hats, deltas = [], [], [], [], [], []
        for _ in range(cfg.batch_size):
            video_seed = self.rand.getrandbits(31)
            track = AnchorTrack(video_seed)
            w0 = self.decoder.sample_w0(video_seed, cfg.truncation)
            noise = None
            if self.decoder.cfg.noise_mode == "constant_per_video":
                noise = self.decoder.sample_video_noise(video_seed)
            ts = sample_timestamps(cfg.max_t, self.rand)
            x0 = self.motion.render_initial(self.decoder, w0, track, noise)
            codes = self.motion.time_encoder.encode_many(track, ts)
            w0_rep = w0.unsqueeze(0).expand(4, -1)
            styles = self.motion.style_head.fuse(codes, w0_rep)
            res = self.motion.encode_frame(
                x0.unsqueeze(0).expand(4, *x0.shape), styles)
            lat = res + w0_rep
            imgs = self.decoder.synthesize(lat, noise)
            # the first discriminator slot is the plain initial frame, not
            # its reconstruction through the motion latent
            clip = torch.cat([x0.unsqueeze(0), imgs[1:]], dim=0)
            frames.append(clip)
            latents.append(lat)
            residuals.append(res)
            x0s.append(x0)
            x0_hats.append(imgs[0])
            deltas.append([float(ts[i + 1] - ts[i]) for i in range(3)])
        return FakeBatch(torch.stack(frames), torch.stack(latents),
                         torch.stack(residuals), torch.stack(x0s),
                         torch.stack(x0_hats),
                         torch.tensor(deltas, dtype=x0s[0].dtype))

    def _disc_inputs(self, frames: torch.Tensor, deltas: torch.Tensor):
        """Drop the first-frame slot when the discriminator is not
        first-frame-aware."""
        if isinstance(self.disc, SparseFrameDiscriminator):
            inner = deltas[:, 1:].clone()
            return frames[:, 1:], inner
        return frames, deltas

    # -- one training step ----------------------------------------------------

    def step(self) -> dict[str, float]:
        cfg = self.cfg
        real_frames, real_deltas = self.real_batch()
        fake = self.fake_batch()

        rf, rd = self._disc_inputs(real_frames, real_deltas)
        ff, fd = self._disc_inputs(fake.frames, fake.deltas)
        if cfg.ada_enabled and self.ada_p > 0:
            rf = augment_clip(rf, self.ada_p, self.rand)
            ff = augment_clip(ff, self.ada_p, self.rand)

        # discriminator phase
        self.opt_d.zero_grad(set_to_none=True)
        real_logits = self.disc(rf, rd)
        fake_logits = self.disc(ff.detach(), fd)
        loss_d = adversarial_d_loss(fake_logits, real_logits)
        r1_value = 0.0
        if cfg.r1_gamma > 0 and self.step_count % cfg.r1_interval == 0:
            rf_grad = rf.detach().requires_grad_(True)
            r1 = grad_penalty(self.disc(rf_grad, rd), rf_grad, cfg.r1_gamma)
            r1_value = float(r1.detach())
            loss_d = loss_d + r1 * cfg.r1_interval
        loss_d.backward()
        self.opt_d.step()

        # encoder phase (reuses the generator graph built above)
        self.opt_e.zero_grad(set_to_none=True)
        loss_g = adversarial_g_loss(self.disc(ff, fd))
        rec = recon_loss(fake.x0, fake.x0_hat)
        reg = latent_reg(fake.residuals)
        loss_e = loss_g + cfg.lambda_reg * reg
        if cfg.recon_enabled:
            loss_e = loss_e + cfg.lambda_l2 * rec
        loss_e.backward()
        self.opt_e.step()

        if cfg.ada_enabled and self.step_count % cfg.ada_interval == 0:
            heuristic = float(torch.sign(real_logits.detach()).mean())
            self.ada_p = ada_update(self.ada_p, heuristic, cfg.ada_target,
                                    cfg.ada_step)

        stats = {
            "step": self.step_count,
            "loss_d": float(loss_d.detach()),
            "loss_g": float(loss_g.detach()),
            "recon": float(rec.detach()),
            "reg": float(reg.detach()),
            "r1": r1_value,
            "ada_p": self.ada_p,
        }
        self.step_count += 1
        self._log(stats)
        return stats

    def run(self, steps: int) -> list[dict[str, float]]:
        return [self.step() for _ in range(steps)]

    def _log(self, stats: dict) -> None:
        line = " ".join(f"{k}={stats[k]:.6g}" if isinstance(stats[k], float)
                        else f"{k}={stats[k]}" for k in stats)
        self.log_lines.append(line)
        if self.log_path is not None and self.step_count % self.cfg.log_every == 0:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


# -- pretraining stages -----------------------------------------------------


def pretrain_image_gan(decoder: Decoder, disc: ImageDiscriminator,
                       dataset: ShapeVideoDataset, steps: int, cfg: TrainConfig,
                       log_path=None) -> list[dict[str, float]]:
    """Stage 1: plain image GAN on all frames, class-aware frame sampling.
    Also accumulates the decoder's mean-latent statistics."""
    rand = random.Random(cfg.seed + 1)
    opt_g = torch.optim.Adam(decoder.parameters(), lr=cfg.gan_lr, betas=(0.0, 0.99))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.gan_lr, betas=(0.0, 0.99))
    stats_log = []

    def fake_images(batch: int) -> torch.Tensor:
        imgs = []
        for _ in range(batch):
            seed = rand.getrandbits(31)
            z = torch.as_tensor(rng.normal((rng.TAG_LATENT, seed), decoder.cfg.z_dim),
                                dtype=decoder.dtype)
            w = decoder.map_latent(z, update_stats=True)
            noise = decoder.sample_video_noise(seed) \
                if decoder.cfg.noise_mode == "constant_per_video" else None
            imgs.append(decoder.synthesize(w, noise))
        return torch.stack(imgs)

    for step in range(steps):
        real = torch.stack([dataset.sample_frame(rand)
                            for _ in range(cfg.batch_size)])
        fake = fake_images(cfg.batch_size)

        opt_d.zero_grad(set_to_none=True)
        loss_d = adversarial_d_loss(disc(fake.detach()), disc(real))
        r1_value = 0.0
        if cfg.r1_gamma > 0 and step % cfg.r1_interval == 0:
            real_grad = real.detach().requires_grad_(True)
            r1 = grad_penalty(disc(real_grad), real_grad, cfg.r1_gamma)
            r1_value = float(r1.detach())
            loss_d = loss_d + r1 * cfg.r1_interval
        loss_d.backward()
        opt_d.step()

        opt_g.zero_grad(set_to_none=True)
        loss_g = adversarial_g_loss(disc(fake))
        loss_g.backward()
        opt_g.step()

        stats = {"step": step, "loss_d": float(loss_d.detach()), "loss_g": float(loss_g.detach()),
                 "r1": r1_value}
        stats_log.append(stats)
        if log_path is not None and step % cfg.log_every == 0:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(" ".join(f"{k}={v:.6g}" if isinstance(v, float)
                                  else f"{k}={v}" for k, v in stats.items()) + "\n")
    return stats_log


def pretrain_inversion(decoder: Decoder, raw: RawInversionEncoder,
                       dataset: ShapeVideoDataset, steps: int, cfg: TrainConfig,
                       log_path=None) -> list[dict[str, float]]:
    """Stage 2: raw inversion encoder; minimize the pixel reconstruction
    error of frames decoded from (residual + mean latent)."""
    rand = random.Random(cfg.seed + 2)
    for p in decoder.parameters():
        p.requires_grad_(False)
    opt = torch.optim.Adam(raw.parameters(), lr=cfg.inversion_lr, betas=(0.0, 0.99))
    w_avg = decoder.w_avg.detach()
    stats_log = []
    for step in range(steps):
        x = torch.stack([dataset.sample_frame(rand)
                         for _ in range(cfg.batch_size)])
        w = raw(x) + w_avg
        noise = None
        if decoder.cfg.noise_mode == "constant_per_video":
            # one shared neutral noise map for inversion training
            noise = {res: torch.zeros_like(v)
                     for res, v in decoder.sample_video_noise(0).items()}
        x_hat = decoder.synthesize(w, noise)
        loss = (x - x_hat).pow(2).mean()
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        stats = {"step": step, "recon": float(loss.detach())}
        stats_log.append(stats)
        if log_path is not None and step % cfg.log_every == 0:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(f"step={step} recon={float(loss.detach()):.6g}\n")
    return stats_log
