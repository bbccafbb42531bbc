"""Building blocks of the dual-branch network: convolutions, the cross
attention block, the gated intensity/color layers and the LCA block."""
from __future__ import annotations

import math

import numpy as np

from .. import autograd as ag
from ..autograd import ConvSpec


class Module:
    """Tiny parameter container; parameters are found by walking attributes."""

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, ag.Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for idx, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{idx}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]


class Conv(Module):
    """Convolution layer with fan-in scaled uniform initialization."""

    def __init__(self, spec: ConvSpec, rng: np.random.Generator, dtype=np.float64):
        self.spec = spec
        fan_in = spec.weight_shape[1] * spec.kernel[0] * spec.kernel[1]
        bound = 1.0 / math.sqrt(fan_in)
        self.weight = ag.Tensor(rng.uniform(-bound, bound, spec.weight_shape).astype(dtype), requires_grad=True)
        self.bias = None
        if spec.bias:
            self.bias = ag.Tensor(rng.uniform(-bound, bound, spec.out_channels).astype(dtype), requires_grad=True)

    def __call__(self, x):
        return ag.conv2d_spec(x, self.weight, self.bias, self.spec)

    def zero_(self):
        self.weight.data[...] = 0
        if self.bias is not None:
            self.bias.data[...] = 0


def conv(cin, cout, k, rng, dtype, stride=1, groups=1, padding="reflect", bias=True):
    return Conv(ConvSpec(cin, cout, (k, k), stride, padding, groups, bias), rng, dtype)


class Embedding(Module):
    """1x1 depthwise convolution followed by a 3x3 group convolution."""

    def __init__(self, channels, groups, rng, dtype, padding="reflect"):
        self.point = conv(channels, channels, 1, rng, dtype, groups=channels, padding=padding)
        self.spatial = conv(channels, channels, 3, rng, dtype, groups=groups, padding=padding)

    def __call__(self, x):
        return self.spatial(self.point(x))


class CrossAttention(Module):
    """Channel-wise multi-head attention where one branch queries the other.

    Scores are ``C/heads x C/heads`` per head, contracting over the flattened
    spatial positions and scaled by the square root of that length. The
    query-side input is added back before the output embedding.
    """

    def __init__(self, channels, heads, rng, dtype, padding="reflect"):
        if channels % heads:
            raise ValueError(f"{channels} channels not divisible by {heads} heads")
        self.heads = heads
        self.query = Embedding(channels, heads, rng, dtype, padding)
        self.key = Embedding(channels, heads, rng, dtype, padding)
        self.value = Embedding(channels, heads, rng, dtype, padding)
        self.out = Embedding(channels, heads, rng, dtype, padding)

    def __call__(self, y, guide):
        n, c, h, w = y.shape
        if guide.shape != y.shape:
            raise ValueError(f"branch shapes differ: {y.shape} vs {guide.shape}")
        split = (n, self.heads, c // self.heads, h * w)
        q = self.query(y).reshape(split)
        k = self.key(guide).reshape(split)
        v = self.value(guide).reshape(split)
        scores = (q @ k.transpose(0, 1, 3, 2)) / math.sqrt(h * w)
        attended = (ag.softmax(scores, axis=-1) @ v).reshape((n, c, h, w))
        return self.out(attended + y)


class GatedLayer(Module):
    """Two tanh-gated paths multiplied together, then a residual.

    ``out = Ws((tanh(Ws1 a) + a) * (tanh(Ws2 b) + b)) + y`` with
    ``a = W_a y`` and ``b = W_b y`` (1x1 projections) and three independent
    3x3 depthwise convolutions. Used for both the intensity-enhance and the
    color-denoise layer.
    """

    def __init__(self, channels, rng, dtype, padding="reflect"):
        self.proj_a = conv(channels, channels, 1, rng, dtype, padding=padding)
        self.proj_b = conv(channels, channels, 1, rng, dtype, padding=padding)
        self.gate_a = conv(channels, channels, 3, rng, dtype, groups=channels, padding=padding)
        self.gate_b = conv(channels, channels, 3, rng, dtype, groups=channels, padding=padding)
        self.mix = conv(channels, channels, 3, rng, dtype, groups=channels, padding=padding)

    def __call__(self, y):
        a = self.proj_a(y)
        b = self.proj_b(y)
        core = (ag.tanh(self.gate_a(a)) + a) * (ag.tanh(self.gate_b(b)) + b)
        return self.mix(core) + y


class LightenCrossAttention(Module):
    """One LCA block: attention in both directions, then IEL / CDL.

    ``cross=False`` swaps the cross attention for per-branch self attention
    and ``cab_first=False`` runs the gated layers before attention.
    """

    def __init__(self, channels, heads, rng, dtype, padding="reflect", cross=True, cab_first=True):
        self.cross = cross
        self.cab_first = cab_first
        self.cab_i = CrossAttention(channels, heads, rng, dtype, padding)
        self.cab_hv = CrossAttention(channels, heads, rng, dtype, padding)
        self.iel = GatedLayer(channels, rng, dtype, padding)
        self.cdl = GatedLayer(channels, rng, dtype, padding)

    def attend(self, y_i, y_hv):
        guide_i, guide_hv = (y_hv, y_i) if self.cross else (y_i, y_hv)
        return self.cab_i(y_i, guide_i), self.cab_hv(y_hv, guide_hv)

    def __call__(self, y_i, y_hv):
        if self.cab_first:
            y_i, y_hv = self.attend(y_i, y_hv)
            return self.iel(y_i), self.cdl(y_hv)
        return self.attend(self.iel(y_i), self.cdl(y_hv))
