import dataclasses

import pytest
import torch

from styleinv.configs import (DataConfig, DecoderConfig, DiscriminatorConfig,
                              EncoderConfig, ExperimentConfig, StyleHeadConfig,
                              TimeCodeConfig, TrainConfig)

torch.set_num_threads(2)


def tiny_experiment(**train_kwargs) -> ExperimentConfig:
    """8x8, 2-channel, low-dim config for fast tests and gradient checks."""
    return ExperimentConfig(
        decoder=DecoderConfig(z_dim=6, w_dim=8, img_resolution=8, img_channels=2,
                              base_channels=32, channel_max=8, mapping_layers=2),
        time_code=TimeCodeConfig(anchor_distance=8.0, code_dim=6, kernel_size=3,
                                 pad_len=2, conv_layers=2),
        encoder=EncoderConfig(img_resolution=8, img_channels=2, w_dim=8,
                              base_channels=32, channel_max=8),
        style_head=StyleHeadConfig(style_dim=8, code_dim=6, w_dim=8),
        discriminator=DiscriminatorConfig(img_resolution=8, img_channels=2,
                                          base_channels=32, channel_max=8,
                                          delta_embed_dim=4),
        data=DataConfig(num_videos=4, video_length=32, resolution=8, channels=2,
                        master_seed=7),
        train=TrainConfig(**{"batch_size": 2, "total_steps": 4, "max_t": 31,
                             **train_kwargs}),
    )


@pytest.fixture
def tiny_cfg() -> ExperimentConfig:
    return tiny_experiment()


@pytest.fixture
def tiny_pipe(tiny_cfg):
    from styleinv.pipeline import VideoPipeline
    return VideoPipeline(tiny_cfg, seed=11)


# one "[criterion N] PASS/FAIL" line per acceptance test, echoed after the
# summary so output capture cannot hide the passing ones
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
