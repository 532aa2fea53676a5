"""Dataclass configs and the flat key=value config-file format.

Config files are plain text, one ``section.field=value`` per line, ``#``
comments allowed.  Parsing is typed against the dataclass fields and
rejects unknown keys; serialize(parse(text)) is idempotent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from typing import get_args, get_origin


class ConfigError(ValueError):
    """Malformed config file or invalid field value."""


@dataclass
class DecoderConfig:
    z_dim: int = 64
    w_dim: int = 64
    img_resolution: int = 64
    img_channels: int = 3
    base_channels: int = 512  # channels at resolution r: min(channel_max, base_channels // r)
    channel_max: int = 64
    mapping_layers: int = 4
    noise_mode: str = "constant_per_video"  # off | constant_per_video | random

    def __post_init__(self):
        r = self.img_resolution
        if r < 8 or (r & (r - 1)) != 0:
            raise ConfigError(f"img_resolution must be a power of two >= 8, got {r}")
        if self.noise_mode not in ("off", "constant_per_video", "random"):
            raise ConfigError(f"unknown noise_mode {self.noise_mode!r}")

    def channels(self, res: int) -> int:
        return max(1, min(self.channel_max, self.base_channels // res))

    @property
    def block_resolutions(self) -> list[int]:
        res, out = 4, []
        while res <= self.img_resolution:
            out.append(res)
            res *= 2
        return out


@dataclass
class TimeCodeConfig:
    anchor_distance: float = 32.0
    code_dim: int = 64
    kernel_size: int = 6
    pad_len: int = 5
    conv_layers: int = 2
    first_frame_fixed: bool = True  # False reverts anchor 0 to per-video noise

    def __post_init__(self):
        if self.anchor_distance <= 0:
            raise ConfigError("anchor_distance must be > 0")
        if self.pad_len != self.kernel_size - 1:
            raise ConfigError("pad_len must equal kernel_size - 1 (causality)")
        if self.conv_layers < 1:
            raise ConfigError("conv_layers must be >= 1")

    @property
    def receptive_field(self) -> int:
        return self.conv_layers * (self.kernel_size - 1) + 1


@dataclass
class EncoderConfig:
    img_resolution: int = 64
    img_channels: int = 3
    w_dim: int = 64
    base_channels: int = 512
    channel_max: int = 64

    @property
    def num_blocks(self) -> int:
        # downsample img_resolution -> 4, one AdaIN site per block
        n, res = 0, self.img_resolution
        while res > 4:
            res //= 2
            n += 1
        return n

    def channels(self, res: int) -> int:
        return max(1, min(self.channel_max, self.base_channels // res))


@dataclass
class StyleHeadConfig:
    style_dim: int = 64
    code_dim: int = 64
    w_dim: int = 64


@dataclass
class DiscriminatorConfig:
    img_resolution: int = 64
    img_channels: int = 3
    base_channels: int = 512
    channel_max: int = 64
    delta_embed_dim: int = 16
    num_frames: int = 4

    def channels(self, res: int) -> int:
        return max(1, min(self.channel_max, self.base_channels // res))


@dataclass
class DataConfig:
    num_videos: int = 32
    video_length: int = 128
    resolution: int = 64
    channels: int = 3
    master_seed: int = 1234


@dataclass
class TrainConfig:
    lambda_l2: float = 10.0
    lambda_reg: float = 0.05
    lr_encoder: float = 1e-4
    lr_disc: float = 2e-3
    r1_gamma: float = 1.0
    r1_interval: int = 16
    batch_size: int = 8
    total_steps: int = 1000
    max_t: int = 127
    seed: int = 0
    ada_enabled: bool = False
    ada_target: float = 0.6
    ada_step: float = 0.01
    ada_interval: int = 4
    truncation: float = 1.0
    # stage-1 / stage-2 budgets, used by the CLI pipeline commands
    gan_steps: int = 1000
    gan_lr: float = 2e-3
    inversion_steps: int = 500
    inversion_lr: float = 1e-3
    log_every: int = 10
    checkpoint_every: int = 0  # 0: only at the end
    # ablation switches
    recon_enabled: bool = True
    ffa_disc_enabled: bool = True

    def __post_init__(self):
        if self.lambda_l2 < 0 or self.lambda_reg < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.lr_encoder <= 0 or self.lr_disc <= 0:
            raise ConfigError("learning rates must be > 0")
        if self.max_t < 3:
            raise ConfigError("max_t must be >= 3")


@dataclass
class ExperimentConfig:
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    time_code: TimeCodeConfig = field(default_factory=TimeCodeConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    style_head: StyleHeadConfig = field(default_factory=StyleHeadConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


def _parse_value(text: str, typ):
    if typ is bool:
        if text in ("true", "True", "1"):
            return True
        if text in ("false", "False", "0"):
            return False
        raise ConfigError(f"expected bool, got {text!r}")
    if typ is int:
        try:
            return int(text)
        except ValueError as e:
            raise ConfigError(f"expected int, got {text!r}") from e
    if typ is float:
        try:
            return float(text)
        except ValueError as e:
            raise ConfigError(f"expected float, got {text!r}") from e
    if typ is str:
        return text
    raise ConfigError(f"unsupported field type {typ}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``section.field=value`` text into an ExperimentConfig."""
    sections = {f.name: f for f in fields(ExperimentConfig)}
    values: dict[str, dict[str, object]] = {name: {} for name in sections}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key must be section.field, got {key!r}")
        section, fname = key.split(".", 1)
        if section not in sections:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        sec_type = sections[section].default_factory
        sec_fields = {f.name: f for f in fields(sec_type)}
        if fname not in sec_fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if fname in values[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[section][fname] = _parse_value(val, _resolve_type(sec_type, fname))
    try:
        return ExperimentConfig(**{
            name: sections[name].default_factory(**values[name]) for name in sections
        })
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _resolve_type(cls, fname: str):
    import typing
    hints = typing.get_type_hints(cls)
    typ = hints[fname]
    if get_origin(typ) is not None:  # Optional etc. not used in configs
        args = [a for a in get_args(typ) if a is not type(None)]
        typ = args[0]
    return typ


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for sec in fields(ExperimentConfig):
        sub = getattr(cfg, sec.name)
        for f in fields(sub):
            lines.append(f"{sec.name}.{f.name}={_format_value(getattr(sub, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_as_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(data: dict) -> ExperimentConfig:
    kwargs = {}
    for sec in fields(ExperimentConfig):
        sec_cls = sec.default_factory
        sec_data = data.get(sec.name, {})
        known = {f.name for f in fields(sec_cls)}
        unknown = set(sec_data) - known
        if unknown:
            raise ConfigError(f"unknown keys in section {sec.name}: {sorted(unknown)}")
        kwargs[sec.name] = sec_cls(**sec_data)
    return ExperimentConfig(**kwargs)
