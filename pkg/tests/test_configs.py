import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from styleinv.configs import (ConfigError, DecoderConfig, ExperimentConfig,
                              TimeCodeConfig, TrainConfig, config_as_dict,
                              config_from_dict, parse_config, serialize_config)


def test_roundtrip_idempotent():
    text = serialize_config(ExperimentConfig())
    assert serialize_config(parse_config(text)) == text


def test_roundtrip_preserves_values():
    cfg = ExperimentConfig()
    cfg = dataclasses.replace(
        cfg,
        train=dataclasses.replace(cfg.train, lambda_l2=3.5, max_t=63, seed=9),
        decoder=dataclasses.replace(cfg.decoder, img_resolution=32, noise_mode="off"),
    )
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("train.not_a_field=3\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("nonsense.x=3\n")


def test_malformed_lines_rejected():
    with pytest.raises(ConfigError):
        parse_config("train.max_t\n")
    with pytest.raises(ConfigError):
        parse_config("max_t=5\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("train.max_t=5\ntrain.max_t=6\n")


def test_typed_parsing():
    cfg = parse_config("train.ada_enabled=true\ntrain.lambda_l2=2.0\n"
                       "decoder.mapping_layers=3\n")
    assert cfg.train.ada_enabled is True
    assert cfg.train.lambda_l2 == 2.0
    assert cfg.decoder.mapping_layers == 3
    with pytest.raises(ConfigError, match="expected int"):
        parse_config("decoder.mapping_layers=2.5\n")
    with pytest.raises(ConfigError, match="expected bool"):
        parse_config("train.ada_enabled=maybe\n")


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\ntrain.max_t=15  # inline\n")
    assert cfg.train.max_t == 15


def test_invariants_enforced():
    with pytest.raises(ConfigError):
        DecoderConfig(img_resolution=48)
    with pytest.raises(ConfigError):
        DecoderConfig(noise_mode="sometimes")
    with pytest.raises(ConfigError):
        TimeCodeConfig(kernel_size=6, pad_len=4)
    with pytest.raises(ConfigError):
        TimeCodeConfig(anchor_distance=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(max_t=2)
    with pytest.raises(ConfigError):
        TrainConfig(lr_encoder=0.0)


def test_dict_roundtrip():
    cfg = ExperimentConfig()
    assert config_from_dict(config_as_dict(cfg)) == cfg
    with pytest.raises(ConfigError, match="unknown keys"):
        config_from_dict({"train": {"bogus": 1}})


@given(lambda_l2=st.floats(0, 100, allow_nan=False),
       max_t=st.integers(3, 10_000),
       steps=st.integers(1, 10_000),
       enabled=st.booleans())
@settings(max_examples=40, deadline=None)
def test_roundtrip_property(lambda_l2, max_t, steps, enabled):
    cfg = ExperimentConfig()
    cfg = dataclasses.replace(cfg, train=dataclasses.replace(
        cfg.train, lambda_l2=lambda_l2, max_t=max_t, total_steps=steps,
        ada_enabled=enabled))
    assert parse_config(serialize_config(cfg)) == cfg
