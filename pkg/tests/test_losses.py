import math

import numpy as np
import pytest

from hvinet import autograd as ag
from hvinet.losses import (
    EDGE_EPS,
    LOSS_MODES,
    LossWeights,
    edge_loss,
    laplacian,
    perceptual_surrogate,
    pixel_loss,
    total_loss,
)


def val(t):
    return float(t.data)


@pytest.fixture
def img():
    return np.random.default_rng(0).uniform(0, 1, (2, 3, 8, 8))


def test_pixel_loss_examples(img):
    assert val(pixel_loss(img, img)) == 0.0
    assert val(pixel_loss(img + 0.5, img)) == pytest.approx(0.5, abs=1e-15)
    assert val(pixel_loss(img + 0.5, img, "mse")) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        pixel_loss(img, img, "huber")
    with pytest.raises(ValueError):
        pixel_loss(img, img[:, :, :4])


def test_edge_loss_floor(img):
    assert val(edge_loss(img, img)) == pytest.approx(EDGE_EPS, abs=1e-18)
    assert val(edge_loss(img + 0.3, img)) == pytest.approx(EDGE_EPS, abs=1e-12)


def test_edge_loss_impulse_by_hand():
    x = np.zeros((1, 1, 5, 5))
    x[0, 0, 2, 2] = 1.0
    y = np.zeros_like(x)
    # Laplacian of a centred impulse: -4 at the centre, 1 at the four
    # neighbours, 0 elsewhere (the border is untouched by the impulse)
    expected = (math.sqrt(16 + EDGE_EPS**2) + 4 * math.sqrt(1 + EDGE_EPS**2) + 20 * EDGE_EPS) / 25
    assert val(edge_loss(x, y)) == pytest.approx(expected, abs=1e-15)


def test_laplacian_kills_constants_and_ramps():
    ramp = np.broadcast_to(np.arange(6.0), (1, 2, 6, 6)).copy()
    out = laplacian(ramp).data
    assert np.abs(out[..., 1:-1]).max() < 1e-12
    assert np.abs(laplacian(np.full((1, 1, 4, 4), 0.7)).data).max() < 1e-15


def perceptual_oracle(x, y, scales=3):
    total = 0.0
    for s in range(scales):
        if s:
            x = x.reshape(x.shape[0], x.shape[1], x.shape[2] // 2, 2, x.shape[3] // 2, 2).mean(axis=(3, 5))
            y = y.reshape(y.shape[0], y.shape[1], y.shape[2] // 2, 2, y.shape[3] // 2, 2).mean(axis=(3, 5))
        total += np.abs(np.diff(x, axis=3) - np.diff(y, axis=3)).mean()
        total += np.abs(np.diff(x, axis=2) - np.diff(y, axis=2)).mean()
    return total / scales


def test_perceptual_surrogate_examples(img):
    assert val(perceptual_surrogate(img, img)) == 0.0
    assert val(perceptual_surrogate(img + 0.2, img)) == pytest.approx(0.0, abs=1e-15)
    checker = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)[None, None]
    gray = np.full_like(checker, 0.5)
    got = val(perceptual_surrogate(checker, gray))
    assert got > 0
    assert got == pytest.approx(perceptual_oracle(checker, gray), abs=1e-15)
    assert val(perceptual_surrogate(img, img[::-1])) == pytest.approx(perceptual_oracle(img, img[::-1]), abs=1e-14)


def test_total_loss_floor(img):
    t = ag.Tensor(img)
    w = LossWeights()
    assert val(total_loss(t, t, t, t, w)) == pytest.approx((w.lambda_c + 1) * w.lambda_e * EDGE_EPS, abs=1e-15)
    w = LossWeights(lambda_c=0.5, lambda_e=2.0)
    assert val(total_loss(t, t, t, t, w)) == pytest.approx(1.5 * 2.0 * EDGE_EPS, abs=1e-15)


def test_total_loss_weighting(img):
    rng = np.random.default_rng(1)
    a, b = ag.Tensor(img), ag.Tensor(rng.uniform(0, 1, img.shape))
    c, d = ag.Tensor(rng.uniform(0, 1, img.shape)), ag.Tensor(rng.uniform(0, 1, img.shape))
    hvi = val(total_loss(a, b, c, d, LossWeights.for_mode("hvi")))
    srgb = val(total_loss(a, b, c, d, LossWeights.for_mode("srgb")))
    both = val(total_loss(a, b, c, d, LossWeights.for_mode("both", lambda_c=0.7)))
    assert both == pytest.approx(0.7 * hvi + srgb, rel=1e-12)
    with_p = val(total_loss(a, b, c, d, LossWeights.for_mode("both+perceptual")))
    extra = 0.01 * (val(perceptual_surrogate(a, b)) + val(perceptual_surrogate(c, d)))
    assert with_p == pytest.approx(hvi + srgb + extra, rel=1e-12)


def test_loss_modes():
    assert LOSS_MODES == ("hvi", "srgb", "both", "both+perceptual")
    assert LossWeights.for_mode("hvi").lambda_srgb == 0
    assert LossWeights.for_mode("srgb").lambda_c == 0
    assert not LossWeights.for_mode("both").perceptual
    assert LossWeights.for_mode("both+perceptual").perceptual
    with pytest.raises(ValueError):
        LossWeights.for_mode("rgb")
    with pytest.raises(ValueError):
        LossWeights(lambda_e=-1)


def test_zero_weight_terms_do_not_touch_the_tape(img):
    rgb = ag.Tensor(img, requires_grad=True)
    hvi = ag.Tensor(img, requires_grad=True)
    ag.backward(total_loss(hvi, img * 0.5, rgb, img, LossWeights.for_mode("hvi")))
    assert rgb.grad is None and hvi.grad is not None


@pytest.mark.parametrize("mode", ["l1", "mse"])
def test_loss_gradcheck(mode):
    rng = np.random.default_rng(2)
    gt = rng.uniform(0, 1, (1, 3, 8, 8))
    x = ag.Tensor(gt + rng.choice([-1, 1], gt.shape) * rng.uniform(0.05, 0.2, gt.shape))
    w = LossWeights(pixel_mode=mode, lambda_p=0.3)
    assert ag.gradcheck(lambda t: total_loss(t, gt, t * 0.5, gt * 0.5, w), x) <= 1e-4
