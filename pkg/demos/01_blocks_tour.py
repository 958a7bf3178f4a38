"""A walk through the building blocks.

Coordinate channels, channel attention, CBAM and the RCAB residual behave in
easily checked ways when their weights are zeroed; this script prints those
cases alongside a randomly initialized block.
"""
import torch

from demoire.blocks import CBAM, RCAB, ChannelAttention, coord_channels, pixel_shuffle, pixel_unshuffle

torch.manual_seed(0)

# Coordinate maps: x varies along width, y along height, both in [-1, 1]
print(coord_channels(3, 5)[0])

x = torch.randn(1, 16, 8, 8)

# Zeroed attention: sigmoid(0) = 0.5 per gate
ca = ChannelAttention(16)
for p in ca.parameters():
    torch.nn.init.zeros_(p)
print("channel attention ratio:", (ca(x) / x).unique())

cbam = CBAM(16)
for p in cbam.parameters():
    torch.nn.init.zeros_(p)
print("cbam ratio:", (cbam(x) / x).unique())

# A freshly initialized RCAB: the residual keeps the output close to the input
rcab = RCAB(16)
print("rcab relative change:", float((rcab(x) - x).norm() / x.norm()))

# Pixel shuffle moves channel blocks into 2x2 spatial tiles
t = torch.arange(8.0).view(1, 8, 1, 1)
print(pixel_shuffle(t, 2))
assert torch.equal(pixel_unshuffle(pixel_shuffle(t, 2), 2), t)
