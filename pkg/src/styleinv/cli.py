"""Command-line surface for the full pipeline.

Exit codes: 0 success, 2 config error, 3 checkpoint error, 4 runtime
numeric failure.  STYLEINV_SEED overrides the config seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np
import torch

from .checkpoint import CheckpointError
from .configs import ConfigError, ExperimentConfig, load_config
from .data import ShapeVideoDataset
from .discriminator import ImageDiscriminator
from .pipeline import VideoPipeline
from . import metrics as metrics_mod

EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3
EXIT_NUMERIC = 4


class NumericFailure(RuntimeError):
    pass


def _load_experiment(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cfg = load_config(path)
    seed_env = os.environ.get("STYLEINV_SEED")
    if seed_env is not None:
        try:
            seed = int(seed_env)
        except ValueError as e:
            raise ConfigError(f"STYLEINV_SEED must be an integer, got {seed_env!r}") from e
        cfg.train = dataclasses.replace(cfg.train, seed=seed)
    return cfg


def _save_frames(frames: torch.Tensor, out_dir: str, contact_sheet: bool = False):
    from PIL import Image
    os.makedirs(out_dir, exist_ok=True)
    arrays = []
    for i, frame in enumerate(frames):
        arr = np.clip((frame.numpy().transpose(1, 2, 0) + 1) * 127.5,
                      0, 255).astype(np.uint8)
        if arr.shape[-1] == 1:
            arr = arr[..., 0]
        Image.fromarray(arr).save(os.path.join(out_dir, f"frame_{i:06d}.png"))
        arrays.append(arr)
    if contact_sheet and arrays:
        cols = min(8, len(arrays))
        rows = (len(arrays) + cols - 1) // cols
        h, w = arrays[0].shape[:2]
        sheet = np.zeros((rows * h, cols * w) + arrays[0].shape[2:], dtype=np.uint8)
        for i, arr in enumerate(arrays):
            r, c = divmod(i, cols)
            sheet[r * h:(r + 1) * h, c * w:(c + 1) * w] = arr
        Image.fromarray(sheet).save(os.path.join(out_dir, "contact_sheet.png"))


def cmd_pretrain_gan(args) -> None:
    from .training import pretrain_image_gan
    cfg = _load_experiment(args.config)
    pipe = VideoPipeline(cfg, seed=cfg.train.seed)
    dataset = ShapeVideoDataset(cfg.data)
    disc = ImageDiscriminator(cfg.discriminator)
    pretrain_image_gan(pipe.decoder, disc, dataset, cfg.train.gan_steps,
                       cfg.train, log_path=args.log)
    pipe.save(args.out, extra={"stage": "pretrain-gan"})


def cmd_pretrain_encoder(args) -> None:
    from .training import pretrain_inversion
    cfg = _load_experiment(args.config)
    pipe = VideoPipeline.load(args.checkpoint)
    dataset = ShapeVideoDataset(pipe.cfg.data)
    pretrain_inversion(pipe.decoder, pipe.raw_encoder, dataset,
                       cfg.train.inversion_steps, cfg.train, log_path=args.log)
    pipe.motion.init_from_inversion(pipe.raw_encoder)
    pipe.save(args.out, extra={"stage": "pretrain-encoder"})


def cmd_train_styleinv(args) -> None:
    from .training import SparseVideoTrainer
    cfg = _load_experiment(args.config)
    pipe = VideoPipeline.load(args.checkpoint)
    pipe.cfg.train = cfg.train
    dataset = ShapeVideoDataset(pipe.cfg.data)
    trainer = SparseVideoTrainer(pipe.decoder, pipe.motion, pipe.discriminator,
                                 dataset, cfg.train, log_path=args.log)
    trainer.run(cfg.train.total_steps)
    pipe.save(args.out, extra={"stage": "train-styleinv"})


def cmd_finetune_style(args) -> None:
    from .style_transfer import finetune_decoder
    from .checkpoint import module_tensors, save_bundle, CheckpointBundle
    cfg = _load_experiment(args.config)
    pipe = VideoPipeline.load(args.checkpoint)
    target = torch.load(args.target_images, weights_only=True) \
        if args.target_images.endswith(".pt") else _load_image_dir(args.target_images)
    child = finetune_decoder(pipe.decoder, target, args.freeze_res,
                             cfg.train.total_steps, cfg.train,
                             feature_net=pipe.raw_encoder)
    parent_sum = pipe.to_bundle().checksum()
    bundle = CheckpointBundle(config=pipe.cfg,
                              tensors=module_tensors("decoder", child),
                              extra={"stage": "finetune-style",
                                     "parent_checksum": parent_sum,
                                     "freeze_res": args.freeze_res})
    save_bundle(args.out, bundle)


def _load_image_dir(path: str) -> torch.Tensor:
    from PIL import Image
    files = sorted(f for f in os.listdir(path) if f.endswith(".png"))
    if not files:
        raise ConfigError(f"no .png images in {path}")
    imgs = []
    for f in files:
        arr = np.asarray(Image.open(os.path.join(path, f)).convert("RGB"),
                         dtype=np.float32)
        imgs.append(torch.from_numpy(arr.transpose(2, 0, 1) / 127.5 - 1))
    return torch.stack(imgs)


def _load_init_latent(pipe: VideoPipeline, path: str) -> torch.Tensor:
    """Invert a real image into the latent space with the raw encoder."""
    from PIL import Image
    res = pipe.cfg.decoder.img_resolution
    img = Image.open(path).convert("RGB").resize((res, res))
    arr = np.asarray(img, dtype=np.float32).transpose(2, 0, 1) / 127.5 - 1
    x = torch.from_numpy(arr).to(pipe.decoder.dtype)
    with torch.no_grad():
        return pipe.raw_encoder.invert(x, pipe.decoder.w_avg)


def cmd_generate(args) -> None:
    pipe = VideoPipeline.load(args.checkpoint)
    seed = int(os.environ.get("STYLEINV_SEED", args.seed))
    w0 = _load_init_latent(pipe, args.init_image) if args.init_image else None
    frames, latents = pipe.generate(seed, args.frames,
                                    fps_multiplier=args.fps_multiplier,
                                    truncation=args.truncation, w0=w0)
    if not torch.isfinite(frames).all():
        raise NumericFailure("generated frames contain non-finite values")
    _save_frames(frames, args.out, contact_sheet=args.contact_sheet)
    if args.save_latents:
        np.save(os.path.join(args.out, "latents.npy"),
                latents.numpy().astype(np.float32))


def cmd_eval(args) -> None:
    pipe = VideoPipeline.load(args.checkpoint)
    cfg = pipe.cfg
    dataset = ShapeVideoDataset(cfg.data)
    extractor = metrics_mod.FeatureExtractor(cfg.data.resolution,
                                             cfg.data.channels)
    clip_len = min(args.clip_len, cfg.data.video_length)
    real_clips = torch.stack([
        dataset.clip(i % len(dataset), range(clip_len))
        for i in range(args.num_clips)])
    fake_clips = torch.stack([
        pipe.generate(1000 + i, clip_len)[0] for i in range(args.num_clips)])
    if not torch.isfinite(fake_clips).all():
        raise NumericFailure("generated clips contain non-finite values")
    flat_real = real_clips.reshape(-1, *real_clips.shape[2:])
    flat_fake = fake_clips.reshape(-1, *fake_clips.shape[2:])
    report = {
        "fid_proxy": metrics_mod.fid_proxy(flat_fake, flat_real, extractor),
        "fvd16_proxy": metrics_mod.fvd_proxy(fake_clips, real_clips,
                                             min(16, clip_len), extractor),
        "fvd_full_proxy": metrics_mod.fvd_proxy(fake_clips, real_clips,
                                                clip_len, extractor),
        "identity_drift": float(np.mean([
            metrics_mod.identity_drift(c, extractor) for c in fake_clips])),
        "latent_jump": float(np.mean([
            metrics_mod.latent_jump(pipe.generate(2000 + i, clip_len)[1])
            for i in range(min(8, args.num_clips))])),
    }
    metrics_mod.write_report(args.out, report)
    for k, v in report.items():
        print(f"{k}={v}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="styleinv")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-gan", help="stage 1: image GAN for the decoder")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_pretrain_gan)

    p = sub.add_parser("pretrain-encoder", help="stage 2: raw inversion encoder")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_pretrain_encoder)

    p = sub.add_parser("train-styleinv", help="stage 3: sparse video training")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_train_styleinv)

    p = sub.add_parser("finetune-style", help="decoder fine-tuning on a new domain")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target-images", required=True,
                   help=".pt tensor file or directory of PNGs")
    p.add_argument("--freeze-res", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_finetune_style)

    p = sub.add_parser("generate", help="render a video as PNG frames")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--fps-multiplier", type=float, default=1.0)
    p.add_argument("--truncation", type=float, default=1.0)
    p.add_argument("--init-image", default=None)
    p.add_argument("--contact-sheet", action="store_true")
    p.add_argument("--save-latents", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="proxy metrics of generated vs dataset clips")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--num-clips", type=int, default=16)
    p.add_argument("--clip-len", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (NumericFailure, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
