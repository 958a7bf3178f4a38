import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from demoire.blocks import (
    CBAM, RCAB, AttentionBlock, AttentionParams, ChannelAttention, ConfigError,
    coord_channels, coord_concat, pixel_shuffle, pixel_unshuffle,
)

from conftest import autograd_grad, central_diff_grad, rel_error, zero_weights


def shuffle_oracle(x, r):
    n, c, h, w = x.shape
    oc = c // (r * r)
    out = np.zeros((n, oc, h * r, w * r), dtype=np.asarray(x).dtype)
    xa = np.asarray(x)
    for b in range(n):
        for ch in range(oc):
            for hh in range(h):
                for ww in range(w):
                    for i in range(r):
                        for j in range(r):
                            out[b, ch, hh * r + i, ww * r + j] = xa[b, ch * r * r + i * r + j, hh, ww]
    return out


class TestCoordChannels:
    def test_two_by_three(self):
        # 2*i/(n-1) - 1 evaluated by hand
        c = coord_channels(2, 3)[0]
        assert c[0].tolist() == [[-1, 0, 1], [-1, 0, 1]]
        assert c[1].tolist() == [[-1, -1, -1], [1, 1, 1]]

    def test_degenerate_row(self):
        c = coord_channels(1, 3)[0]
        assert c[0].tolist() == [[-1, 0, 1]]
        assert c[1].tolist() == [[0, 0, 0]]

    def test_endpoints(self):
        c = coord_channels(2, 2)[0]
        assert c[0].tolist() == [[-1, 1], [-1, 1]]
        assert c[1].tolist() == [[-1, -1], [1, 1]]

    @pytest.mark.parametrize("h,w", [(0, 3), (3, 0), (-1, 2)])
    def test_rejects_nonpositive(self, h, w):
        with pytest.raises(ValueError):
            coord_channels(h, w)

    @given(st.integers(2, 40), st.integers(2, 40))
    def test_range_and_antisymmetry(self, h, w):
        c = coord_channels(h, w, dtype=torch.float64)[0]
        assert c.abs().max() <= 1
        torch.testing.assert_close(c[0], -torch.flip(c[0], dims=(1,)), rtol=0, atol=1e-15)
        torch.testing.assert_close(c[1], -torch.flip(c[1], dims=(0,)), rtol=0, atol=1e-15)


class TestCoordConcat:
    def test_channels_preserved_first(self):
        x = torch.rand(1, 3, 4, 4)
        y = coord_concat(x)
        assert y.shape == (1, 5, 4, 4)
        assert torch.equal(y[:, :3], x)

    def test_coords_shared_across_batch(self):
        y = coord_concat(torch.rand(2, 3, 8, 8))
        assert y.shape == (2, 5, 8, 8)
        assert torch.equal(y[0, 3:], y[1, 3:])

    def test_single_pixel(self):
        y = coord_concat(torch.rand(1, 3, 1, 1))
        assert y.shape == (1, 5, 1, 1)
        assert y[0, 3:].flatten().tolist() == [0, 0]


class TestChannelAttention:
    def test_zero_weights_half(self):
        ca = zero_weights(ChannelAttention(16))
        x = torch.randn(2, 16, 5, 5)
        assert torch.equal(ca(x), 0.5 * x)

    def test_zero_input(self):
        ca = ChannelAttention(16)
        with torch.no_grad():
            ca.reduce.bias.zero_()
            ca.expand.bias.zero_()
        assert torch.equal(ca(torch.zeros(1, 16, 4, 4)), torch.zeros(1, 16, 4, 4))

    def test_scalar_gate(self):
        ca = ChannelAttention(1, AttentionParams(reduction_ratio=8))
        with torch.no_grad():
            ca.reduce.weight.fill_(1.0)
            ca.expand.weight.fill_(1.0)
            ca.reduce.bias.zero_()
            ca.expand.bias.zero_()
        x = torch.ones(1, 1, 3, 3, dtype=torch.float64)
        ca = ca.double()
        expected = 1 / (1 + math.exp(-1))  # sigmoid(relu(1))
        torch.testing.assert_close(ca(x), expected * x)
        assert abs(expected - 0.7311) < 1e-4

    def test_gate_strictly_in_unit_interval(self):
        torch.manual_seed(0)
        ca = ChannelAttention(32)
        g = ca.gate(torch.randn(3, 32, 6, 6))
        assert (g > 0).all() and (g < 1).all()

    def test_channel_mismatch(self):
        with pytest.raises(ConfigError):
            ChannelAttention(16)(torch.rand(1, 8, 4, 4))

    def test_hidden_floor(self):
        assert AttentionParams(8).hidden(4) == 1
        assert AttentionParams(8).hidden(64) == 8


class TestCBAM:
    def test_zero_weights_quarter(self):
        m = zero_weights(CBAM(16))
        x = torch.randn(1, 16, 8, 8)
        assert torch.equal(m(x), 0.25 * x)

    def test_zero_input(self):
        m = CBAM(16)
        assert torch.equal(m(torch.zeros(1, 16, 8, 8)), torch.zeros(1, 16, 8, 8))

    def test_shape(self):
        assert CBAM(16)(torch.rand(1, 16, 8, 8)).shape == (1, 16, 8, 8)

    def test_gates_in_unit_interval(self):
        torch.manual_seed(1)
        m = CBAM(16)
        x = torch.randn(2, 16, 8, 8)
        cg = m.channel_gate(x)
        sg = m.spatial_gate(x * cg)
        for g in (cg, sg):
            assert (g > 0).all() and (g < 1).all()

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            AttentionParams(8, 6)


class TestAttentionBlockAndRCAB:
    def test_zero_conv_gives_zero(self):
        blk = AttentionBlock(16)
        with torch.no_grad():
            blk.conv.weight.zero_()
            blk.conv.bias.zero_()
        assert torch.equal(blk(torch.randn(1, 16, 8, 8)), torch.zeros(1, 16, 8, 8))

    def test_nonnegative_output(self):
        blk = AttentionBlock(16)
        with torch.no_grad():
            blk.conv.weight.abs_()
            blk.conv.bias.fill_(0.1)
        assert (blk(torch.rand(1, 16, 8, 8)) >= 0).all()

    def test_rcab_zero_identity(self):
        m = zero_weights(RCAB(32)).double()
        x = torch.randn(2, 32, 16, 16, dtype=torch.float64)
        assert torch.equal(m(x), x)

    def test_rcab_chain_identity(self):
        chain = torch.nn.Sequential(*(zero_weights(RCAB(8)) for _ in range(3))).double()
        x = torch.randn(1, 8, 6, 6, dtype=torch.float64)
        assert torch.equal(chain(x), x)

    def test_rcab_topology(self):
        # chained units, dense concat, 1x1 fuse, residual
        torch.manual_seed(2)
        m = RCAB(8)
        x = torch.randn(1, 8, 6, 6)
        a1 = m.units[0](x)
        a2 = m.units[1](a1)
        a3 = m.units[2](a2)
        expected = x + m.fuse(torch.cat([a1, a2, a3], 1))
        torch.testing.assert_close(m(x), expected, rtol=0, atol=0)

    def test_no_attention_variant(self):
        m = RCAB(8, attention=False)
        assert all(isinstance(u.ca, torch.nn.Identity) for u in m.units)
        assert m(torch.rand(1, 8, 4, 4)).shape == (1, 8, 4, 4)


class TestPixelShuffle:
    def test_small_example(self):
        x = torch.tensor([1.0, 2.0, 3.0, 4.0]).view(1, 4, 1, 1)
        assert pixel_shuffle(x, 2).tolist() == [[[[1.0, 2.0], [3.0, 4.0]]]]

    def test_identity_r1(self):
        x = torch.rand(2, 3, 4, 5)
        assert torch.equal(pixel_shuffle(x, 1), x)

    def test_bad_channels(self):
        with pytest.raises(ValueError):
            pixel_shuffle(torch.rand(1, 6, 2, 2), 2)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(1, 3))
    def test_matches_oracle_and_inverts(self, n, c, h, w, r):
        x = torch.randn(n, c * r * r, h, w, dtype=torch.float64)
        y = pixel_shuffle(x, r)
        assert np.array_equal(y.numpy(), shuffle_oracle(x.numpy(), r))
        assert torch.equal(pixel_unshuffle(y, r), x)
        assert torch.equal(torch.sort(y.flatten()).values, torch.sort(x.flatten()).values)

    def test_sum_preserved(self):
        x = torch.arange(36, dtype=torch.float64).view(1, 9, 2, 2)
        assert pixel_shuffle(x, 3).sum() == x.sum()


def _blocks():
    torch.manual_seed(3)
    return {
        "coord_concat": lambda x: coord_concat(x),
        "channel_attention": ChannelAttention(4, AttentionParams(2)).double(),
        "cbam": CBAM(4, AttentionParams(2, 3)).double(),
        "attention_block": AttentionBlock(4, AttentionParams(2)).double(),
        "rcab": RCAB(4, AttentionParams(2)).double(),
        "pixel_shuffle": lambda x: pixel_shuffle(x, 2),
    }


@pytest.mark.parametrize("name", list(_blocks()))
def test_input_gradients_match_finite_differences(name):
    block = _blocks()[name]
    gen = torch.Generator().manual_seed(5)
    x = torch.randn(1, 4, 6, 6, dtype=torch.float64, generator=gen)
    weight = torch.randn(block(x).shape, dtype=torch.float64, generator=gen)

    def fn(t):
        return (block(t) * weight).sum()

    assert rel_error(autograd_grad(fn, x), central_diff_grad(fn, x)) < 1e-5


@pytest.mark.parametrize("name", list(_blocks()))
def test_shape_and_finiteness(name):
    block = _blocks()[name]
    x = torch.randn(2, 4, 6, 6, dtype=torch.float64)
    y = block(x)
    assert torch.isfinite(y).all()
    if name == "pixel_shuffle":
        assert y.shape == (2, 1, 12, 12)
    elif name == "coord_concat":
        assert y.shape == (2, 6, 6, 6)
    else:
        assert y.shape == x.shape
