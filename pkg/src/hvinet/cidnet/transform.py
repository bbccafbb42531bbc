"""HVI transform on the gradient tape.

Same arithmetic as :mod:`hvinet.color`, but ``k``, the hue biases and the
density coefficients are tensors so the loss can train them alongside the
network weights. Images are ``(N, C, H, W)``.
"""
from __future__ import annotations

import numpy as np

from .. import autograd as ag
from ..color import EPS, TWO_PI, HviParams, InverseControls, check_gammas, srgb_to_hsv

THIRD = 1.0 / 3.0


def _safe_norm(a, b):
    r2 = a * a + b * b
    live = r2.data > 0
    return ag.where(live, ag.sqrt(ag.where(live, r2, 1.0)), 0.0), r2


def _pow_inv(base, k):
    """``base ** (1 / k)`` with a tensor exponent; zero bases give zero."""
    live = base.data > 0
    return ag.where(live, ag.exp(ag.log(ag.where(live, base, 1.0)) / k), 0.0)


class HviTransform:
    """Trainable HVI parameters and the transforms that use them."""

    def __init__(self, params: HviParams = HviParams(), dtype=np.float64, trainable=True):
        if params.t_fn is not None:
            raise ValueError("only constant or fourier density functions can be trained")
        self.dtype = np.dtype(dtype)
        self.t_mode = params.t_mode
        self.k = ag.Tensor(np.array(params.k, dtype=dtype), requires_grad=trainable)
        self.gamma_g = ag.Tensor(np.array(params.gamma_g, dtype=dtype), requires_grad=trainable)
        self.gamma_b = ag.Tensor(np.array(params.gamma_b, dtype=dtype), requires_grad=trainable)
        self.t_coeffs = None
        if params.t_mode == "fourier":
            self.t_coeffs = ag.Tensor(np.array(params.t_coeffs, dtype=dtype), requires_grad=trainable)

    def named_parameters(self, prefix="hvi."):
        yield prefix + "k", self.k
        yield prefix + "gamma_g", self.gamma_g
        yield prefix + "gamma_b", self.gamma_b
        if self.t_coeffs is not None:
            yield prefix + "t_coeffs", self.t_coeffs

    def params(self) -> HviParams:
        """Snapshot of the current values as plain parameters."""
        coeffs = () if self.t_coeffs is None else tuple(float(c) for c in self.t_coeffs.data)
        return HviParams(
            k=float(self.k.data),
            gamma_g=float(self.gamma_g.data),
            gamma_b=float(self.gamma_b.data),
            t_mode=self.t_mode,
            t_coeffs=coeffs,
        )

    def validate(self):
        if not float(self.k.data) > 0:
            raise ValueError(f"k left the positive range: {float(self.k.data)}")
        check_gammas(float(self.gamma_g.data), float(self.gamma_b.data))

    # -- pieces ----------------------------------------------------------
    def density(self, i):
        """Color density C_k for an intensity tensor."""
        return _pow_inv(ag.sin(i * (0.5 * np.pi)) + EPS, self.k)

    def t(self, x):
        if self.t_coeffs is None:
            return None
        c = self.t_coeffs
        series = c[0] * ag.Tensor(np.ones(x.shape, dtype=self.dtype))
        for n in range(1, (c.shape[0] - 1) // 2 + 1):
            phase = x * (TWO_PI * n)
            series = series + c[2 * n - 1] * ag.cos(phase) + c[2 * n] * ag.sin(phase)
        return ag.where(series.data > 0, series, 0.0)

    def perceptual_hue(self, h):
        hd = h.data if isinstance(h, ag.Tensor) else np.asarray(h)
        gg, gb = self.gamma_g, self.gamma_b
        first = 3.0 * gg * h
        second = 3.0 * (gb - gg) * (h - THIRD) + gg
        third = 3.0 * (1.0 - gb) * (h - 1.0) + 1.0
        return ag.where(hd < THIRD, first, ag.where(hd < 2 * THIRD, second, third))

    def inverse_hue(self, x):
        gg, gb = self.gamma_g, self.gamma_b
        xd = x.data
        first = x / (3.0 * gg)
        second = (x - gg) / (3.0 * (gb - gg)) + THIRD
        third = (x - 1.0) / (3.0 * (1.0 - gb)) + 1.0
        return ag.where(xd < gg.data, first, ag.where(xd < gb.data, second, third))

    # -- transforms ------------------------------------------------------
    def forward(self, img) -> ag.Tensor:
        """sRGB ``(N, 3, H, W)`` array to an HVI tensor of the same shape."""
        img = np.asarray(img.data if isinstance(img, ag.Tensor) else img)
        hsv = srgb_to_hsv(np.moveaxis(img, 1, -1)).astype(self.dtype)
        h, s, v = (ag.Tensor(hsv[..., c][:, None]) for c in range(3))
        p = self.perceptual_hue(h)
        radius = self.density(v) * s
        dt = self.t(p)
        if dt is not None:
            radius = radius * dt
        angle = p * TWO_PI
        return ag.concat([radius * ag.cos(angle), radius * ag.sin(angle), v], axis=1)

    def inverse(self, hvi, controls: InverseControls = InverseControls()) -> ag.Tensor:
        """HVI tensor back to sRGB (the perceptual inverse)."""
        hbar, vbar, i = hvi[:, 0:1], hvi[:, 1:2], hvi[:, 2:3]
        i = ag.clamp(i, 0.0, 1.0)
        x = ag.mod(ag.atan2(vbar, hbar) / TWO_PI, 1.0)
        denom = self.density(i)
        dt = self.t(x)
        if dt is not None:
            denom = denom * dt
        denom = denom + EPS
        radius, _ = _safe_norm(hbar / denom, vbar / denom)
        hue = self.inverse_hue(x)
        sat = ag.clamp(radius * controls.alpha_s, 0.0, 1.0)
        val = ag.clamp(i * controls.alpha_i, 0.0, 1.0)
        return hsv_to_srgb(hue, sat, val)

    def clip(self, hvi) -> ag.Tensor:
        """Radial projection into the valid HVI domain."""
        hbar, vbar, i = hvi[:, 0:1], hvi[:, 1:2], hvi[:, 2:3]
        i = ag.clamp(i, 0.0, 1.0)
        rmax = _pow_inv(ag.sin(i * (0.5 * np.pi)), self.k)
        r, r2 = _safe_norm(hbar, vbar)
        k = float(self.k.data)
        bound = np.sin(0.5 * np.pi * i.data) ** (2.0 / k)
        outside = r2.data > bound
        scale = ag.where(outside, rmax / ag.where(outside, r, 1.0), 1.0)
        return ag.concat([hbar * scale, vbar * scale, i], axis=1)


def hsv_to_srgb(h, s, v) -> ag.Tensor:
    def channel(n):
        k = ag.mod(h * 6.0 + n, 6.0)
        return v - v * s * ag.clamp(ag.minimum(k, 4.0 - k), 0.0, 1.0)

    return ag.concat([channel(5.0), channel(3.0), channel(1.0)], axis=1)
