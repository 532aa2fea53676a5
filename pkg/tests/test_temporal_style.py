import pytest
import torch
import torch.nn.functional as F

from styleinv.configs import StyleHeadConfig
from styleinv.temporal_style import StyleHead

from _gradcheck import fd_gradcheck

CFG = StyleHeadConfig(code_dim=6, w_dim=8, style_dim=10)


def make_head(seed: int = 0) -> StyleHead:
    torch.manual_seed(seed)
    return StyleHead(CFG, site_channels=[4, 2])


def test_fuse_matches_hand_computation():
    head = make_head()
    v = torch.randn(3, 6)
    w = torch.randn(3, 8)
    got = head.fuse(v, w)
    h = torch.cat([v, w], dim=-1)
    h = F.linear(h, head.fc1.weight, head.fc1.bias)
    h = torch.where(h >= 0, h, 0.2 * h)
    want = F.linear(h, head.fc2.weight, head.fc2.bias)
    assert torch.allclose(got, want, atol=1e-7)


def test_fuse_rejects_wrong_dims():
    head = make_head()
    with pytest.raises(ValueError):
        head.fuse(torch.zeros(5), torch.zeros(8))
    with pytest.raises(ValueError):
        head.fuse(torch.zeros(6), torch.zeros(5))


def test_site_params_identity_at_init():
    head = make_head()
    s = torch.randn(4, 10)
    for site, ch in enumerate((4, 2)):
        scale, shift = head.site_params(s, site)
        assert scale.shape == (4, ch) and shift.shape == (4, ch)
        assert torch.equal(scale, torch.ones(4, ch))
        assert torch.equal(shift, torch.zeros(4, ch))


def test_site_params_linear_in_style():
    head = make_head()
    with torch.no_grad():
        for affine in head.site_affines:
            affine.weight.normal_()
            affine.bias.normal_()
    s1, s2 = torch.randn(10), torch.randn(10)
    sc1, sh1 = head.site_params(s1, 0)
    sc2, sh2 = head.site_params(s2, 0)
    scm, shm = head.site_params((s1 + s2) / 2, 0)
    # shifts are affine in s; scales are 1 + affine, so midpoints match
    assert torch.allclose(shm, (sh1 + sh2) / 2, atol=1e-6)
    assert torch.allclose(scm, (sc1 + sc2) / 2, atol=1e-6)


def test_site_params_index_errors():
    head = make_head()
    s = torch.zeros(10)
    with pytest.raises(IndexError):
        head.site_params(s, 2)
    with pytest.raises(IndexError):
        head.site_params(s, -1)


def test_fuse_deterministic():
    head = make_head(7)
    v, w = torch.randn(6), torch.randn(8)
    assert torch.equal(head.fuse(v, w), head.fuse(v, w))


def test_gradients():
    head = make_head(3).double()
    with torch.no_grad():
        for affine in head.site_affines:
            affine.weight.normal_()
            affine.bias.normal_()
    v = torch.randn(2, 6, dtype=torch.float64)
    w = torch.randn(2, 8, dtype=torch.float64)

    def loss_fn():
        s = head.fuse(v, w)
        scale, shift = head.site_params(s, 0)
        return (scale.pow(2) + shift.pow(2)).sum()

    fd_gradcheck(loss_fn, head.named_parameters(), max_per_tensor=15)
