"""Training objective: the same pixel + edge + perceptual-surrogate loss
applied in HVI space and in sRGB, balanced by ``lambda_c``.

Every function takes ``(N, C, H, W)`` tensors (or arrays) and returns a
scalar tensor on the gradient tape.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autograd as ag

EDGE_EPS = 1e-3
LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

LOSS_MODES = ("hvi", "srgb", "both", "both+perceptual")


@dataclass(frozen=True)
class LossWeights:
    """Term weights. ``lambda_c`` scales the HVI-space term and
    ``lambda_srgb`` the sRGB-space term; ``perceptual=False`` drops the
    perceptual surrogate entirely."""

    lambda_1: float = 1.0
    lambda_e: float = 1.0
    lambda_p: float = 0.01
    lambda_c: float = 1.0
    lambda_srgb: float = 1.0
    pixel_mode: str = "l1"
    perceptual: bool = True

    def __post_init__(self):
        for name in ("lambda_1", "lambda_e", "lambda_p", "lambda_c", "lambda_srgb"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.pixel_mode not in ("l1", "mse"):
            raise ValueError(f"pixel_mode must be 'l1' or 'mse', got {self.pixel_mode!r}")

    @classmethod
    def for_mode(cls, mode: str, **overrides) -> "LossWeights":
        """Preset for one of the loss-ablation groups."""
        presets = {
            "hvi": dict(lambda_srgb=0.0, perceptual=False),
            "srgb": dict(lambda_c=0.0, perceptual=False),
            "both": dict(perceptual=False),
            "both+perceptual": dict(perceptual=True),
        }
        if mode not in presets:
            raise ValueError(f"unknown loss mode {mode!r}; choose from {LOSS_MODES}")
        return replace(cls(**overrides), **presets[mode])


def _pair(x, y):
    x, y = ag.as_tensor(x), ag.as_tensor(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def pixel_loss(x, y, mode="l1"):
    """Mean absolute (``l1``) or mean squared (``mse``) difference."""
    x, y = _pair(x, y)
    d = x - y
    if mode == "l1":
        return ag.tabs(d).mean()
    if mode == "mse":
        return (d * d).mean()
    raise ValueError(f"unknown pixel mode {mode!r}")


def laplacian(x):
    """Per-channel 3x3 Laplacian with reflect padding."""
    x = ag.as_tensor(x)
    c = x.shape[1]
    kernel = np.broadcast_to(LAPLACIAN, (c, 1, 3, 3)).astype(x.dtype)
    return ag.conv2d(x, kernel, padding="reflect", groups=c)


def edge_loss(x, y):
    """Charbonnier penalty on the difference of Laplacians."""
    x, y = _pair(x, y)
    d = laplacian(x) - laplacian(y)
    return ag.sqrt(d * d + EDGE_EPS**2).mean()


def _gradients(x):
    return x[:, :, :, 1:] - x[:, :, :, :-1], x[:, :, 1:, :] - x[:, :, :-1, :]


def perceptual_surrogate(x, y, scales=3):
    """Multi-scale L1 distance between finite-difference gradient fields.

    Stands in for a pretrained-feature loss: the image is compared at full,
    half and quarter resolution (2x2 mean pooling). Zero exactly when the
    gradient fields agree at every scale, so constant offsets cost nothing.
    """
    x, y = _pair(x, y)
    total = None
    for s in range(scales):
        if s:
            if min(x.shape[-2:]) < 2:
                break
            x, y = ag.avg_pool2(x), ag.avg_pool2(y)
        terms = []
        for gx, gy in zip(_gradients(x), _gradients(y)):
            if gx.size:
                terms.append(ag.tabs(gx - gy).mean())
        for t in terms:
            total = t if total is None else total + t
    if total is None:
        return ag.Tensor(np.zeros((), dtype=x.dtype))
    return total / scales


def space_loss(x, y, w: LossWeights):
    """Pixel + edge (+ perceptual) loss within one color space."""
    loss = w.lambda_1 * pixel_loss(x, y, w.pixel_mode) + w.lambda_e * edge_loss(x, y)
    if w.perceptual:
        loss = loss + w.lambda_p * perceptual_surrogate(x, y)
    return loss


def total_loss(pred_hvi, gt_hvi, pred_rgb, gt_rgb, w: LossWeights = LossWeights()):
    """``lambda_c * l(HVI pair) + lambda_srgb * l(sRGB pair)``.

    Terms with zero weight are skipped so they add nothing to the tape.
    """
    loss = None
    if w.lambda_c:
        loss = w.lambda_c * space_loss(pred_hvi, gt_hvi, w)
    if w.lambda_srgb:
        rgb = w.lambda_srgb * space_loss(pred_rgb, gt_rgb, w)
        loss = rgb if loss is None else loss + rgb
    if loss is None:
        ref = ag.as_tensor(pred_rgb)
        return ag.Tensor(np.zeros((), dtype=ref.dtype))
    return loss
