"""Fine-tuning-based style transfer of the decoder.

The child decoder is adversarially fine-tuned on a target image set while
the mapping network and all synthesis blocks at or below a freeze
resolution keep their parent weights bitwise.  A frozen feature extractor
(the pretrained raw inversion backbone) penalizes feature drift between
parent and child outputs on shared latents, standing in for perceptual
and identity losses.
"""

from __future__ import annotations

import copy
import random

import torch
from torch import nn

from . import rng
from .configs import TrainConfig
from .decoder import Decoder
from .discriminator import ImageDiscriminator, grad_penalty
from .encoder import RawInversionEncoder
from .training import adversarial_d_loss, adversarial_g_loss


def finetune_decoder(parent: Decoder, target_images: torch.Tensor,
                     freeze_res: int, steps: int, cfg: TrainConfig,
                     feature_net: RawInversionEncoder | None = None,
                     perceptual_weight: float = 1.0,
                     identity_weight: float = 1.0) -> Decoder:
    """Returns a child decoder adapted to the target image domain."""
    if target_images.shape[0] == 0:
        raise ValueError("target image set is empty")
    res = parent.cfg.img_resolution
    if target_images.shape[-1] != res or target_images.shape[-2] != res:
        raise ValueError(f"target images are {tuple(target_images.shape[-2:])}, "
                         f"decoder expects {res}x{res}")
    child = copy.deepcopy(parent)
    frozen = child.freeze_tier(freeze_res)
    child.apply_freeze(frozen)
    for p in parent.parameters():
        p.requires_grad_(False)

    disc = ImageDiscriminator(_disc_cfg(parent.cfg))
    rand = random.Random(cfg.seed + 3)
    trainable = [p for p in child.parameters() if p.requires_grad]
    opt_g = torch.optim.Adam(trainable, lr=cfg.gan_lr, betas=(0.0, 0.99))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.gan_lr, betas=(0.0, 0.99))

    def shared_latents(batch: int) -> torch.Tensor:
        zs = [torch.as_tensor(rng.normal((rng.TAG_LATENT, rand.getrandbits(31)),
                                         parent.cfg.z_dim), dtype=parent.dtype)
              for _ in range(batch)]
        return child.map_latent(torch.stack(zs))

    def features(x: torch.Tensor) -> torch.Tensor:
        return feature_net.backbone(x) if feature_net is not None else x.flatten(1)

    for step in range(steps):
        idx = [rand.randrange(target_images.shape[0]) for _ in range(cfg.batch_size)]
        real = target_images[idx]
        with torch.no_grad():
            w = shared_latents(cfg.batch_size)
        noise = None
        if parent.cfg.noise_mode == "constant_per_video":
            noise = parent.sample_video_noise(rand.getrandbits(31))
        fake = child.synthesize(w, noise)

        opt_d.zero_grad(set_to_none=True)
        loss_d = adversarial_d_loss(disc(fake.detach()), disc(real))
        if cfg.r1_gamma > 0 and step % cfg.r1_interval == 0:
            real_grad = real.detach().requires_grad_(True)
            loss_d = loss_d + grad_penalty(disc(real_grad), real_grad,
                                           cfg.r1_gamma) * cfg.r1_interval
        loss_d.backward()
        opt_d.step()

        opt_g.zero_grad(set_to_none=True)
        with torch.no_grad():
            parent_img = parent.synthesize(w, noise)
            parent_feat = features(parent_img)
        loss_g = adversarial_g_loss(disc(fake))
        child_feat = features(fake)
        drift = (child_feat - parent_feat).pow(2).mean()
        pixel_drift = (fake - parent_img).pow(2).mean()
        loss_g = loss_g + identity_weight * drift + perceptual_weight * pixel_drift
        loss_g.backward()
        opt_g.step()
    return child


def _disc_cfg(decoder_cfg):
    from .configs import DiscriminatorConfig
    return DiscriminatorConfig(img_resolution=decoder_cfg.img_resolution,
                               img_channels=decoder_cfg.img_channels,
                               base_channels=decoder_cfg.base_channels,
                               channel_max=decoder_cfg.channel_max)


@torch.no_grad()
def transfer_video(child: Decoder, latents: torch.Tensor,
                   noise: dict | None = None) -> torch.Tensor:
    """Decode a motion-latent sequence with a (possibly fine-tuned) decoder,
    reusing one per-video noise realization for all frames."""
    if latents.shape[-1] != child.cfg.w_dim:
        raise ValueError(f"latent dim {latents.shape[-1]} != w_dim "
                         f"{child.cfg.w_dim}")
    return child.synthesize(latents, noise)
