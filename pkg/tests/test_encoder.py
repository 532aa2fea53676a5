import math

import pytest
import torch

from styleinv.decoder import Decoder
from styleinv.encoder import (EncoderBackbone, MotionGenerator,
                              RawInversionEncoder, adain)
from styleinv.time_encoding import AnchorTrack, TimeEncoder

from _gradcheck import fd_gradcheck
from conftest import tiny_experiment


def build_parts(seed: int = 0):
    cfg = tiny_experiment()
    torch.manual_seed(seed)
    decoder = Decoder(cfg.decoder)
    raw = RawInversionEncoder(cfg.encoder)
    motion = MotionGenerator(cfg.encoder, TimeEncoder(cfg.time_code),
                             cfg.style_head)
    return cfg, decoder, raw, motion


# -- adain -------------------------------------------------------------------

def test_adain_normalizes_stats():
    torch.manual_seed(0)
    h = torch.randn(2, 3, 8, 8) * 5 + 2
    scale = torch.full((2, 3), 2.0)
    shift = torch.full((2, 3), -1.0)
    out = adain(h, scale, shift)
    # recompute by hand from instance stats
    mu = h.mean(dim=(-1, -2), keepdim=True)
    var = h.var(dim=(-1, -2), keepdim=True, unbiased=False)
    norm = (h - mu) / torch.sqrt(var + 1e-5)
    want = (h + 2.0 * norm - 1.0) / math.sqrt(2.0)
    assert torch.allclose(out, want, atol=1e-6)


def test_adain_identity_params_keep_residual_form():
    torch.manual_seed(1)
    h = torch.randn(1, 2, 4, 4)
    out = adain(h, torch.ones(1, 2), torch.zeros(1, 2))
    mu = h.mean(dim=(-1, -2), keepdim=True)
    var = h.var(dim=(-1, -2), keepdim=True, unbiased=False)
    want = (h + (h - mu) / torch.sqrt(var + 1e-5)) / math.sqrt(2.0)
    assert torch.allclose(out, want, atol=1e-6)


# -- backbone ----------------------------------------------------------------

def test_backbone_shapes_and_batch_handling():
    cfg, _, raw, _ = build_parts()
    res, ch = cfg.encoder.img_resolution, cfg.encoder.img_channels
    single = raw(torch.randn(ch, res, res))
    batch = raw(torch.randn(5, ch, res, res))
    assert single.shape == (cfg.encoder.w_dim,)
    assert batch.shape == (5, cfg.encoder.w_dim)


def test_backbone_rejects_wrong_resolution():
    cfg, _, raw, _ = build_parts()
    with pytest.raises(ValueError):
        raw(torch.randn(cfg.encoder.img_channels, 4, 4))


def test_identity_modulation_matches_raw_backbone():
    cfg, _, raw, motion = build_parts()
    motion.init_from_inversion(raw)
    frame = torch.randn(cfg.encoder.img_channels, cfg.encoder.img_resolution,
                        cfg.encoder.img_resolution)

    def identity(site):
        ch = motion.backbone.site_channels[site]
        return torch.ones(1, ch), torch.zeros(1, ch)

    got = motion.backbone(frame, identity)
    assert torch.equal(got, raw(frame))


def test_init_from_inversion_copies_backbone_not_heads():
    _, _, raw, motion = build_parts()
    style_before = {n: p.detach().clone()
                    for n, p in motion.style_head.named_parameters()}
    time_before = {n: p.detach().clone()
                   for n, p in motion.time_encoder.named_parameters()}
    motion.init_from_inversion(raw)
    for name, tensor in raw.backbone.state_dict().items():
        assert torch.equal(motion.backbone.state_dict()[name], tensor), name
    for n, p in motion.style_head.named_parameters():
        assert torch.equal(p, style_before[n]), n
    for n, p in motion.time_encoder.named_parameters():
        assert torch.equal(p, time_before[n]), n


def test_init_from_inversion_shape_mismatch_errors():
    cfg, _, _, motion = build_parts()
    import dataclasses
    other = RawInversionEncoder(dataclasses.replace(cfg.encoder, base_channels=cfg.encoder.base_channels * 2))
    with pytest.raises(ValueError):
        motion.init_from_inversion(other)


def test_invert_adds_mean_latent():
    cfg, decoder, raw, _ = build_parts()
    frame = torch.randn(cfg.encoder.img_channels, cfg.encoder.img_resolution,
                        cfg.encoder.img_resolution)
    w_avg = decoder.mapping.w_avg
    assert torch.allclose(raw.invert(frame, w_avg), raw(frame) + w_avg)


# -- motion generator ----------------------------------------------------------

def test_zero_final_fc_means_styleinv_returns_w0():
    _, decoder, _, motion = build_parts()
    with torch.no_grad():
        motion.backbone.final_fc.weight.zero_()
        motion.backbone.final_fc.bias.zero_()
    w0 = decoder.sample_w0(3)
    got = motion.styleinv(decoder, w0, 9.25, AnchorTrack(3))
    assert torch.equal(got, w0)


def test_styleinv_at_zero_matches_residual_plus_w0():
    _, decoder, _, motion = build_parts()
    track = AnchorTrack(4)
    w0 = decoder.sample_w0(4)
    frame = motion.render_initial(decoder, w0, track)
    want = motion.residual(frame, w0, 0.0, track) + w0
    assert torch.equal(motion.styleinv(decoder, w0, 0.0, track), want)


def test_styleinv_deterministic_and_time_sensitive():
    _, decoder, _, motion = build_parts()
    # fresh site affines are zero (identity modulation), which would hide the
    # timestamp entirely; perturb them so time flows through
    with torch.no_grad():
        for affine in motion.style_head.site_affines:
            affine.weight.normal_()
    track = AnchorTrack(8)
    w0 = decoder.sample_w0(8)
    a = motion.styleinv(decoder, w0, 5.0, track)
    b = motion.styleinv(decoder, w0, 5.0, track)
    c = motion.styleinv(decoder, w0, 45.0, track)
    assert torch.equal(a, b)
    assert not torch.equal(a, c)


def test_render_initial_noise_flag():
    cfg, decoder, _, motion = build_parts()
    assert decoder.cfg.noise_mode == "constant_per_video"
    with torch.no_grad():
        for block in decoder.blocks:  # noise strength starts at 0
            block.noise_strength.fill_(0.5)
    track = AnchorTrack(2)
    w0 = decoder.sample_w0(2)
    with_noise = motion.render_initial(decoder, w0, track)
    motion.render_with_noise = False
    zero_noise = motion.render_initial(decoder, w0, track)
    quiet = {res: torch.zeros_like(v) for res, v in
             decoder.sample_video_noise(track.video_seed).items()}
    assert torch.equal(zero_noise, decoder.synthesize(w0, quiet))
    assert not torch.equal(with_noise, zero_noise)


def test_full_path_gradients():
    cfg, decoder, _, motion = build_parts(2)
    decoder = decoder.double()
    motion = motion.double()
    track = AnchorTrack(5)
    w0 = decoder.sample_w0(5).double()

    def loss_fn():
        w_t = motion.styleinv(decoder, w0, 7.3, track)
        return w_t.pow(2).sum()

    fd_gradcheck(loss_fn, motion.named_parameters(), max_per_tensor=5)
