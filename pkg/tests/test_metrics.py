import json
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from styleinv.metrics import (FeatureExtractor, clip_feature, fid_proxy,
                              frame_features, frechet_distance, fvd_proxy,
                              gaussian_fit, identity_drift, latent_jump,
                              write_report)


# -- frechet distance: closed-form oracles --------------------------------------

def test_identical_gaussians_give_zero():
    rng = np.random.default_rng(0)
    mu = rng.normal(size=4)
    a = rng.normal(size=(4, 4))
    sigma = a @ a.T + np.eye(4)
    assert frechet_distance(mu, sigma, mu, sigma) == pytest.approx(0.0, abs=1e-9)


def test_mean_shift_only():
    sigma = np.eye(3)
    mu1, mu2 = np.zeros(3), np.array([1.0, 2.0, -2.0])
    assert frechet_distance(mu1, sigma, mu2, sigma) == pytest.approx(9.0, rel=1e-12)


def test_one_dim_unit_variances():
    # d = (mu1-mu2)^2 + s1 + s2 - 2*sqrt(s1*s2); with s1=4, s2=1, mu gap 0:
    # 4 + 1 - 2*2 = 1
    got = frechet_distance([0.0], [[4.0]], [0.0], [[1.0]])
    assert got == pytest.approx(1.0, rel=1e-12)


def test_diagonal_case_closed_form():
    # diagonal covariances: d = ||dmu||^2 + sum_i (sqrt(a_i) - sqrt(b_i))^2
    rng = np.random.default_rng(1)
    a = rng.uniform(0.1, 3.0, size=5)
    b = rng.uniform(0.1, 3.0, size=5)
    dmu = rng.normal(size=5)
    want = float(dmu @ dmu + ((np.sqrt(a) - np.sqrt(b)) ** 2).sum())
    got = frechet_distance(np.zeros(5), np.diag(a), dmu, np.diag(b))
    assert got == pytest.approx(want, rel=1e-10)


def test_commuting_full_covariances():
    # covariances sharing an eigenbasis reduce to the diagonal formula
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    da = np.array([0.5, 1.0, 2.0, 3.0])
    db = np.array([1.5, 0.2, 2.5, 0.7])
    s1 = q @ np.diag(da) @ q.T
    s2 = q @ np.diag(db) @ q.T
    want = float(((np.sqrt(da) - np.sqrt(db)) ** 2).sum())
    assert frechet_distance(np.zeros(4), s1, np.zeros(4), s2) == \
        pytest.approx(want, rel=1e-9)


def test_rejects_non_finite_stats():
    with pytest.raises(ValueError):
        frechet_distance([np.nan], [[1.0]], [0.0], [[1.0]])


@given(arrays(np.float64, (3,), elements=st.floats(-5, 5)),
       arrays(np.float64, (3,), elements=st.floats(-5, 5)),
       arrays(np.float64, (3, 3), elements=st.floats(-1, 1)),
       arrays(np.float64, (3, 3), elements=st.floats(-1, 1)))
@settings(max_examples=50, deadline=None)
def test_symmetry_and_nonnegativity(mu1, mu2, a, b):
    s1 = a @ a.T + 0.1 * np.eye(3)
    s2 = b @ b.T + 0.1 * np.eye(3)
    d12 = frechet_distance(mu1, s1, mu2, s2)
    d21 = frechet_distance(mu2, s2, mu1, s1)
    assert d12 >= 0.0
    assert d12 == pytest.approx(d21, rel=1e-6, abs=1e-8)


def test_gaussian_fit_matches_numpy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 6))
    mu, sigma = gaussian_fit(x)
    np.testing.assert_allclose(mu, x.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(sigma, np.cov(x, rowvar=False), rtol=1e-10)


# -- proxies ---------------------------------------------------------------------

def make_frames(n, seed, res=16):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(n, 3, res, res, generator=gen).clamp(-1, 1)


def test_fid_proxy_zero_on_identical_sets():
    ext = FeatureExtractor(16)
    frames = make_frames(32, 0)
    assert fid_proxy(frames, frames.clone(), ext) == pytest.approx(0.0, abs=1e-8)


def test_fid_proxy_detects_distribution_shift():
    ext = FeatureExtractor(16)
    a = make_frames(64, 1)
    near = make_frames(64, 2)
    far = (make_frames(64, 3) * 0.1) - 0.8
    assert fid_proxy(a, far, ext) > 5 * fid_proxy(a, near, ext)


def test_fid_proxy_needs_two_frames():
    ext = FeatureExtractor(16)
    with pytest.raises(ValueError):
        fid_proxy(make_frames(1, 0), make_frames(8, 1), ext)


def test_feature_extractor_seeded_and_frozen():
    a = FeatureExtractor(16, seed=5)
    b = FeatureExtractor(16, seed=5)
    x = make_frames(2, 0)
    assert torch.equal(a(x), b(x))
    assert all(not p.requires_grad for p in a.parameters())
    assert not torch.equal(a(x), FeatureExtractor(16, seed=6)(x))


def test_clip_feature_encodes_motion():
    ext = FeatureExtractor(16)
    clip = make_frames(6, 4)
    static = clip[0:1].repeat(6, 1, 1, 1)
    moving = clip
    f_static = clip_feature(static, ext)
    f_moving = clip_feature(moving, ext)
    # static clip: all consecutive diffs are zero
    assert np.allclose(f_static[64:], 0.0)
    assert f_static.shape == (128,)
    assert not np.allclose(f_moving[64:], 0.0)


def test_fvd_proxy_penalizes_shuffled_time():
    ext = FeatureExtractor(16)
    gen = torch.Generator().manual_seed(7)
    # smooth clips: frame t = base + t * drift
    base = torch.randn(24, 1, 3, 16, 16, generator=gen)
    drift = 0.3 * torch.randn(24, 1, 3, 16, 16, generator=gen)
    steps = torch.arange(6).view(1, 6, 1, 1, 1).float()
    clips = (base + steps * drift).clamp(-1, 1)
    reversed_time = clips[:, torch.arange(5, -1, -1)]
    d_same = fvd_proxy(clips, clips.clone(), 6, ext)
    d_rev = fvd_proxy(clips, reversed_time, 6, ext)
    assert d_same == pytest.approx(0.0, abs=1e-8)
    assert d_rev > 1e-3


def test_fvd_proxy_uses_first_clip_len_frames_and_validates():
    ext = FeatureExtractor(16)
    gen = torch.Generator().manual_seed(8)
    clips = torch.randn(8, 6, 3, 16, 16, generator=gen)
    full = fvd_proxy(clips[:4], clips[4:], 4, ext)
    trimmed = fvd_proxy(clips[:4, :4], clips[4:, :5], 4, ext)
    assert full == pytest.approx(trimmed, rel=1e-12)
    with pytest.raises(ValueError):
        fvd_proxy(clips[:4, :3], clips[4:], 4, ext)


# -- scalar diagnostics ------------------------------------------------------------

def test_identity_drift_zero_for_static_clip():
    ext = FeatureExtractor(16)
    frame = make_frames(1, 9)
    clip = frame.repeat(5, 1, 1, 1)
    assert identity_drift(clip, ext) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        identity_drift(frame, ext)


def test_latent_jump_closed_forms():
    # steps of norm 3, 1, 1, 1 -> median 1 -> jump 3
    lat = torch.tensor([[0.0], [3.0], [4.0], [5.0], [6.0]])
    assert latent_jump(lat) == pytest.approx(3.0, rel=1e-12)
    # constant sequence is 0/0 := 0
    assert latent_jump(torch.ones(4, 2)) == 0.0
    # nonzero first step over zero median -> inf
    lat = torch.tensor([[0.0], [1.0], [1.0], [1.0]])
    assert latent_jump(lat) == math.inf
    with pytest.raises(ValueError):
        latent_jump(torch.zeros(1, 3))


def test_write_report_round_trip(tmp_path):
    path = tmp_path / "report.txt"
    metrics = {"fid": 1.25, "steps": 10}
    write_report(path, metrics)
    assert path.read_text() == "fid=1.25\nsteps=10\n"
    assert json.loads((tmp_path / "report.json").read_text()) == metrics
