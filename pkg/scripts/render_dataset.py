#!/usr/bin/env python3
"""Export frames of the synthetic moving-shapes dataset as PNGs.

Handy for eyeballing what the models train on:

    python3 scripts/render_dataset.py --out /tmp/shapes --videos 4
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from styleinv.configs import DataConfig  # noqa: E402
from styleinv.data import ShapeVideoDataset  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--videos", type=int, default=2)
    parser.add_argument("--length", type=int, default=32)
    parser.add_argument("--resolution", type=int, default=64)
    parser.add_argument("--master-seed", type=int, default=11)
    args = parser.parse_args()

    cfg = DataConfig(num_videos=args.videos, video_length=args.length,
                     resolution=args.resolution, channels=3,
                     master_seed=args.master_seed)
    dataset = ShapeVideoDataset(cfg)
    out = pathlib.Path(args.out)
    for v in range(len(dataset)):
        dataset.export_frames(v, out / f"video_{v:03d}")
        print(f"video_{v:03d}: {dataset.specs[v].shape}")
    print(f"wrote {len(dataset)} videos under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
