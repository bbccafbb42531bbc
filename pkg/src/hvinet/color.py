"""HVI color space: sRGB/HSV helpers, the forward transform, its perceptual
inverse and the valid-domain projection.

All functions take row-major ``(..., 3)`` float arrays (``(H, W, 3)`` for an
image, ``(3,)`` for a single pixel) and return new arrays. Nothing here keeps
state, so every function is safe to call from several threads at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

EPS = 1e-8
TWO_PI = 2.0 * np.pi


def _channels(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.shape[-1] != 3:
        raise ValueError(f"expected 3 channels in the last axis, got shape {img.shape}")
    return img


def check_srgb(img) -> np.ndarray:
    """Return ``img`` as float64 after checking every channel lies in [0, 1]."""
    img = _channels(img)
    if img.size and (np.nanmin(img) < 0.0 or np.nanmax(img) > 1.0 or np.isnan(img).any()):
        raise ValueError("sRGB values must lie in [0, 1]")
    return img


# ---------------------------------------------------------------------------
# parameters


def check_gammas(gamma_g, gamma_b):
    if not (0.0 < gamma_g < gamma_b < 1.0):
        raise ValueError(
            f"hue biases must satisfy 0 < gamma_g < gamma_b < 1, got {gamma_g}, {gamma_b}"
        )


def fourier_series(x, coeffs: Sequence[float]):
    """Evaluate ``c0 + sum_n a_n cos(2 pi n x) + b_n sin(2 pi n x)``.

    ``coeffs`` is laid out as ``[c0, a1, b1, a2, b2, ...]``.
    """
    x = np.asarray(x, dtype=np.float64)
    coeffs = list(coeffs)
    out = np.full_like(x, coeffs[0] if coeffs else 0.0)
    rest = coeffs[1:]
    for n in range(1, len(rest) // 2 + 1):
        a, b = rest[2 * n - 2], rest[2 * n - 1]
        out = out + a * np.cos(TWO_PI * n * x) + b * np.sin(TWO_PI * n * x)
    return out


@dataclass(frozen=True)
class HviParams:
    """Trainable HVI parameters.

    ``t_mode`` is ``"constant"`` (T == 1) or ``"fourier"``, in which case
    ``t_coeffs`` holds ``[c0, a1, b1, ...]`` and T is the series clamped at zero.
    A custom periodic ``t_fn`` may be passed instead; it is checked on a grid.
    """

    k: float = 1.0
    gamma_g: float = 1.0 / 3.0
    gamma_b: float = 2.0 / 3.0
    t_mode: str = "constant"
    t_coeffs: tuple = ()
    t_fn: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        check_gammas(self.gamma_g, self.gamma_b)
        if self.t_mode not in ("constant", "fourier"):
            raise ValueError(f"unknown t_mode {self.t_mode!r}")
        object.__setattr__(self, "t_coeffs", tuple(float(c) for c in self.t_coeffs))
        if self.t_mode == "fourier":
            if len(self.t_coeffs) % 2 != 1:
                raise ValueError("fourier t_coeffs must be [c0, a1, b1, ...] (odd length)")
        if self.t_fn is not None:
            grid = np.linspace(0.0, 1.0, 1025)
            vals = np.asarray(self.t_fn(grid), dtype=np.float64)
            if np.any(vals < 0) or not np.isclose(vals[0], vals[-1], rtol=0, atol=1e-12):
                raise ValueError("t_fn must satisfy T(0) == T(1) and T(x) >= 0")

    def t(self, x):
        """Density function T evaluated pointwise."""
        x = np.asarray(x, dtype=np.float64)
        if self.t_fn is not None:
            return np.asarray(self.t_fn(x), dtype=np.float64)
        if self.t_mode == "constant":
            return np.ones_like(x)
        return np.maximum(fourier_series(x, self.t_coeffs), 0.0)


@dataclass(frozen=True)
class InverseControls:
    """Saturation/brightness scales applied by :func:`phvit`."""

    alpha_s: float = 1.0
    alpha_i: float = 1.0

    def __post_init__(self):
        if self.alpha_s < 0 or self.alpha_i < 0:
            raise ValueError("alpha_s and alpha_i must be nonnegative")


DEFAULT_PARAMS = HviParams()
IDENTITY_CONTROLS = InverseControls()


# ---------------------------------------------------------------------------
# sRGB <-> HSV


def intensity_map(img) -> np.ndarray:
    """Per-pixel maximum over the RGB channels."""
    return check_srgb(img).max(axis=-1)


def srgb_to_hsv(img) -> np.ndarray:
    """Convert sRGB to HSV with hue stored as a fraction of a turn.

    Achromatic pixels (max == min) get hue 0.
    """
    img = check_srgb(img)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    v = img.max(axis=-1)
    c = v - img.min(axis=-1)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe_c) % 6.0,
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h / 6.0, 0.0)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_srgb(hsv) -> np.ndarray:
    """Convert HSV (hue in turns) back to sRGB."""
    hsv = _channels(hsv)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]

    def channel(n):
        k = (n + 6.0 * h) % 6.0
        return v - v * s * np.clip(np.minimum(k, 4.0 - k), 0.0, 1.0)

    return np.stack([channel(5.0), channel(3.0), channel(1.0)], axis=-1)


# ---------------------------------------------------------------------------
# HVI building blocks


def color_density(i, k) -> np.ndarray:
    """``(sin(pi i / 2) + eps) ** (1 / k)``; shrinks the chroma plane at low intensity."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    i = np.asarray(i, dtype=np.float64)
    return (np.sin(0.5 * np.pi * i) + EPS) ** (1.0 / k)


def perceptual_hue(h, gamma_g, gamma_b) -> np.ndarray:
    """Piecewise-linear hue remap with breakpoints at 1/3 and 2/3."""
    check_gammas(gamma_g, gamma_b)
    h = np.asarray(h, dtype=np.float64)
    return np.where(
        h < 1.0 / 3.0,
        3.0 * gamma_g * h,
        np.where(
            h < 2.0 / 3.0,
            3.0 * (gamma_b - gamma_g) * (h - 1.0 / 3.0) + gamma_g,
            3.0 * (1.0 - gamma_b) * (h - 1.0) + 1.0,
        ),
    )


def inverse_hue(x, gamma_g, gamma_b) -> np.ndarray:
    """Exact inverse of :func:`perceptual_hue` on [0, 1]."""
    check_gammas(gamma_g, gamma_b)
    x = np.asarray(x, dtype=np.float64)
    return np.where(
        x < gamma_g,
        x / (3.0 * gamma_g),
        np.where(
            x < gamma_b,
            (x - gamma_g) / (3.0 * (gamma_b - gamma_g)) + 1.0 / 3.0,
            (x - 1.0) / (3.0 * (1.0 - gamma_b)) + 1.0,
        ),
    )


def density_t(p_gamma, t_fn) -> np.ndarray:
    """Apply the hue density function pointwise. ``t_fn`` may be an HviParams."""
    fn = t_fn.t if isinstance(t_fn, HviParams) else t_fn
    return np.asarray(fn(np.asarray(p_gamma, dtype=np.float64)), dtype=np.float64)


# ---------------------------------------------------------------------------
# transforms


def hsv_to_hvi(hsv, params: HviParams = DEFAULT_PARAMS) -> np.ndarray:
    """Map HSV triples to HVI planes."""
    hsv = _channels(hsv)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    p = perceptual_hue(h, params.gamma_g, params.gamma_b)
    radius = color_density(v, params.k) * s * params.t(p)
    return np.stack([radius * np.cos(TWO_PI * p), radius * np.sin(TWO_PI * p), v], axis=-1)


def hvi_forward(img, params: HviParams = DEFAULT_PARAMS) -> np.ndarray:
    """sRGB image ``(..., 3)`` to HVI planes ``(hbar, vbar, i)``."""
    return hsv_to_hvi(srgb_to_hsv(img), params)


def hvi_angle(hbar, vbar) -> np.ndarray:
    """Full-quadrant angle of the HV point as a fraction of a turn in [0, 1]."""
    return (np.arctan2(vbar, hbar) / TWO_PI) % 1.0


def phvit(
    hvi,
    params: HviParams = DEFAULT_PARAMS,
    controls: InverseControls = IDENTITY_CONTROLS,
) -> np.ndarray:
    """Perceptual inverse HVI transform back to sRGB.

    The angle is read from the raw (hbar, vbar) ratio first, which does not
    depend on the positive density factors, so D_T can be evaluated before the
    division without iterating.
    """
    hvi = _channels(hvi)
    hbar, vbar, i = hvi[..., 0], hvi[..., 1], hvi[..., 2]
    i = np.clip(i, 0.0, 1.0)
    x = hvi_angle(hbar, vbar)
    denom = params.t(x) * color_density(i, params.k) + EPS
    h_hat = hbar / denom
    v_hat = vbar / denom
    hue = inverse_hue(x, params.gamma_g, params.gamma_b)
    sat = np.clip(controls.alpha_s * np.hypot(h_hat, v_hat), 0.0, 1.0)
    val = np.clip(controls.alpha_i * i, 0.0, 1.0)
    return hsv_to_srgb(np.stack([hue, sat, val], axis=-1))


def domain_bound_sq(i, k) -> np.ndarray:
    """Squared maximal HV radius ``sin(pi i / 2) ** (2 / k)`` at intensity ``i``."""
    return np.sin(0.5 * np.pi * np.asarray(i, dtype=np.float64)) ** (2.0 / k)


def clip_domain(hvi, k=1.0) -> np.ndarray:
    """Project HVI points into the valid domain.

    Intensity is clamped to [0, 1]; HV points outside the radius bound are
    rescaled radially onto it. In-domain points come back bit-identical, so
    the projection is idempotent.
    """
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    hvi = _channels(hvi)
    i = np.clip(hvi[..., 2], 0.0, 1.0)
    hbar, vbar = hvi[..., 0].copy(), hvi[..., 1].copy()
    bound = domain_bound_sq(i, k)
    r2 = hbar * hbar + vbar * vbar
    out = r2 > bound
    if np.any(out):
        scale = np.sqrt(bound[out]) / np.sqrt(r2[out])
        hs, vs, bs = hbar[out] * scale, vbar[out] * scale, bound[out]
        # rounding can leave the rescaled point an ulp outside; pull it in
        bad = hs * hs + vs * vs > bs
        while np.any(bad):
            hs[bad] = np.nextafter(hs[bad], 0.0)
            vs[bad] = np.nextafter(vs[bad], 0.0)
            bad = hs * hs + vs * vs > bs
        hbar[out], vbar[out] = hs, vs
    return np.stack([hbar, vbar, i], axis=-1)
