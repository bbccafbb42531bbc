"""Image operators on ``(N, C, H, W)`` tensors: padding, convolution,
resampling and softmax."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _make, add, as_tensor


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: tuple = (3, 3)
    stride: int = 1
    padding: str = "reflect"
    groups: int = 1
    bias: bool = True

    def __post_init__(self):
        kernel = self.kernel if isinstance(self.kernel, tuple) else (self.kernel, self.kernel)
        object.__setattr__(self, "kernel", tuple(int(k) for k in kernel))
        if min(self.kernel) < 1:
            raise ValueError("kernel extents must be >= 1")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError("channel counts must be divisible by groups")
        if self.padding not in ("reflect", "zero"):
            raise ValueError(f"unknown padding mode {self.padding!r}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels // self.groups) + self.kernel

    @property
    def pad(self):
        kh, kw = self.kernel
        return ((kh - 1) // 2, kh // 2, (kw - 1) // 2, kw // 2)


def _fold_reflect(g, axis, before, after, n):
    """Adjoint of reflect padding along one axis."""
    g = np.moveaxis(g, axis, -1)
    out = g[..., before : before + n].copy()
    for j in range(before):
        out[..., before - j] += g[..., j]
    for j in range(after):
        out[..., n - 2 - j] += g[..., before + n + j]
    return np.moveaxis(out, -1, axis)


def pad2d(x: Tensor, pad, mode="reflect") -> Tensor:
    """Pad the last two axes by ``(top, bottom, left, right)``."""
    top, bottom, left, right = pad
    if not any(pad):
        return x
    h, w = x.shape[-2:]
    width = [(0, 0)] * (x.ndim - 2) + [(top, bottom), (left, right)]
    if mode == "zero":

        def backward(g):
            return (g[..., top : top + h, left : left + w],)

        return _make(np.pad(x.data, width), (x,), backward)
    if mode != "reflect":
        raise ValueError(f"unknown padding mode {mode!r}")
    if top >= h or bottom >= h or left >= w or right >= w:
        raise ValueError(f"reflect padding {pad} too large for spatial size {(h, w)}")

    def backward(g):
        g = _fold_reflect(g, -1, left, right, w)
        return (_fold_reflect(g, -2, top, bottom, h),)

    return _make(np.pad(x.data, width, mode="reflect"), (x,), backward)


def reflect_pad(x: Tensor, pad) -> Tensor:
    return pad2d(x, pad, "reflect")


def _im2col(xp, kh, kw, stride, ho, wo):
    n, c = xp.shape[:2]
    taps = [
        xp[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
        for i in range(kh)
        for j in range(kw)
    ]
    return np.stack(taps, axis=2).reshape(n, c, kh * kw, ho * wo)


def _col2im(cols, shape, kh, kw, stride, ho, wo):
    n, c = shape[:2]
    out = np.zeros(shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh * kw, ho, wo)
    t = 0
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += cols[:, :, t]
            t += 1
    return out


def _columns(xp, kh, kw, stride, ho, wo, groups):
    n, c = xp.shape[:2]
    if kh == kw == 1 and stride == 1:
        return xp.reshape(n, groups, c // groups, ho * wo)
    return _im2col(xp, kh, kw, stride, ho, wo).reshape(n, groups, (c // groups) * kh * kw, ho * wo)


def _correlate(xp, w, stride, groups):
    """Valid cross-correlation on raw arrays; returns ``(out, columns)``."""
    n, c, hp, wp = xp.shape
    o, cg, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = _columns(xp, kh, kw, stride, ho, wo, groups)
    wm = w.reshape(groups, o // groups, cg * kh * kw)
    return np.matmul(wm, cols).reshape(n, o, ho, wo), cols


def _transpose_kernel(w, groups):
    """Weights of the adjoint convolution (stride 1): flip space, swap in/out per group."""
    o, cg, kh, kw = w.shape
    og = o // groups
    wt = w.reshape(groups, og, cg, kh, kw).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(wt[..., ::-1, ::-1].reshape(groups * cg, og, kh, kw))


def _conv_valid(x: Tensor, w: Tensor, stride: int, groups: int) -> Tensor:
    n, c, hp, wp = x.shape
    o, cg, kh, kw = w.shape
    if c != cg * groups:
        raise ValueError(f"input has {c} channels, weight expects {cg * groups}")
    if o % groups:
        raise ValueError("out channels not divisible by groups")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError("input smaller than kernel")
    og = o // groups
    out, cols = _correlate(x.data, w.data, stride, groups)

    def backward(g):
        g4 = g
        g = g.reshape(n, groups, og, ho * wo)
        if og == 1 and cg == 1:
            gw = np.einsum("ngp,ngkp->gk", g[:, :, 0], cols).reshape(w.shape)
        else:
            gw = np.matmul(g, np.swapaxes(cols, -1, -2)).sum(axis=0).reshape(w.shape)
        if stride == 1:
            if kh == kw == 1:
                gx = np.matmul(np.swapaxes(w.data.reshape(groups, og, cg), -1, -2), g).reshape(x.shape)
            else:
                gp = np.pad(g4, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
                gx, _ = _correlate(gp, _transpose_kernel(w.data, groups), 1, groups)
        else:
            wm = w.data.reshape(groups, og, cg * kh * kw)
            gcols = np.matmul(np.swapaxes(wm, -1, -2), g).reshape(n, c, kh * kw, ho * wo)
            gx = _col2im(gcols, x.shape, kh, kw, stride, ho, wo)
        return gx, gw

    return _make(out, (x, w), backward)


def conv2d(x, w, b=None, stride=1, padding="zero", groups=1, pad=None) -> Tensor:
    """Cross-correlation of ``x (N, C, H, W)`` with ``w (O, C/groups, kh, kw)``.

    ``pad`` defaults to "same" padding for odd kernels; ``padding`` selects
    the fill mode (``"zero"`` or ``"reflect"``).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError("conv2d expects 4-d input and weight")
    kh, kw = w.shape[-2:]
    if pad is None:
        pad = ((kh - 1) // 2, kh // 2, (kw - 1) // 2, kw // 2)
    out = _conv_valid(pad2d(x, pad, padding), w, stride, groups)
    if b is not None:
        out = add(out, as_tensor(b).reshape((1, -1, 1, 1)))
    return out


def conv2d_spec(x, w, b, spec: ConvSpec) -> Tensor:
    if tuple(w.shape) != spec.weight_shape:
        raise ValueError(f"weight shape {w.shape} does not match {spec.weight_shape}")
    if x.shape[1] != spec.in_channels:
        raise ValueError(f"expected {spec.in_channels} input channels, got {x.shape[1]}")
    return conv2d(x, w, b if spec.bias else None, spec.stride, spec.padding, spec.groups, spec.pad)


def depthwise_conv2d(x, w, b=None, stride=1, padding="zero") -> Tensor:
    """Per-channel convolution; ``w`` has shape ``(C * m, 1, kh, kw)``."""
    return conv2d(x, w, b, stride, padding, groups=x.shape[1])


def grouped_conv2d(x, w, b=None, groups=1, stride=1, padding="zero") -> Tensor:
    return conv2d(x, w, b, stride, padding, groups=groups)


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def backward(g):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return _make(out, (x,), backward)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 mean pooling with stride 2; an odd trailing row/column is dropped."""
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    core = x.data[:, :, : 2 * h2, : 2 * w2]
    out = core.reshape(n, c, h2, 2, w2, 2).mean(axis=(3, 5))

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, :, : 2 * h2, : 2 * w2] = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) / 4.0
        return (full,)

    return _make(out, (x,), backward)


def softmax(x: Tensor, axis=-1) -> Tensor:
    """Max-shifted softmax along ``axis``."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (x,), backward)
