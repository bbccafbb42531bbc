import colorsys
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvinet import (
    DEFAULT_PARAMS,
    EPS,
    HviParams,
    InverseControls,
    clip_domain,
    color_density,
    density_t,
    domain_bound_sq,
    hsv_to_hvi,
    hsv_to_srgb,
    hvi_forward,
    intensity_map,
    inverse_hue,
    perceptual_hue,
    phvit,
    srgb_to_hsv,
)
from hvinet.color import check_srgb, fourier_series


# --- intensity map / HSV -------------------------------------------------------


@pytest.mark.parametrize(
    "pixel, expected",
    [((0.2, 0.5, 0.3), 0.5), ((0, 0, 0), 0.0), ((1, 1, 1), 1.0)],
)
def test_intensity_map_is_channel_max(pixel, expected):
    assert intensity_map(np.array(pixel, float)) == expected


@pytest.mark.parametrize(
    "rgb, hsv",
    [
        ((1, 0, 0), (0, 1, 1)),
        ((0.5, 0.5, 0.5), (0, 0, 0.5)),
        ((0, 1, 0), (1 / 3, 1, 1)),
    ],
)
def test_srgb_to_hsv_examples(rgb, hsv):
    np.testing.assert_allclose(srgb_to_hsv(np.array(rgb, float)), hsv, atol=1e-15)


@pytest.mark.parametrize("hsv, rgb", [((0, 1, 1), (1, 0, 0)), ((1 / 3, 1, 1), (0, 1, 0))])
def test_hsv_to_srgb_examples(hsv, rgb):
    np.testing.assert_allclose(hsv_to_srgb(np.array(hsv, float)), rgb, atol=1e-15)


@given(st.floats(0, 1), st.floats(0, 1))
def test_zero_saturation_is_gray(h, v):
    np.testing.assert_allclose(hsv_to_srgb(np.array([h, 0.0, v])), [v, v, v], atol=1e-15)


def test_hsv_matches_colorsys():
    rng = np.random.default_rng(3)
    rgb = rng.uniform(0, 1, (2000, 3))
    ours = srgb_to_hsv(rgb)
    ref = np.array([colorsys.rgb_to_hsv(*p) for p in rgb])
    np.testing.assert_allclose(ours, ref, atol=1e-12)
    back = np.array([colorsys.hsv_to_rgb(*p) for p in ref])
    np.testing.assert_allclose(hsv_to_srgb(ref), back, atol=1e-12)


def test_check_srgb_rejects_bad_input():
    with pytest.raises(ValueError):
        check_srgb(np.array([0.1, 1.2, 0.3]))
    with pytest.raises(ValueError):
        check_srgb(np.array([0.1, np.nan, 0.3]))
    with pytest.raises(ValueError):
        check_srgb(np.zeros((4, 4)))


# --- components of the transform ---------------------------------------------------


def test_color_density_values():
    assert color_density(1.0, 1.0) == pytest.approx(1.0 + 1e-8, abs=1e-15)
    assert color_density(0.0, 1.0) == pytest.approx(1e-8, abs=1e-20)
    # (sin(pi/6) + eps)^(1/4) = (0.5 + 1e-8)^0.25
    assert color_density(1 / 3, 4.0) == pytest.approx(0.840896, abs=1e-6)


def test_color_density_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        color_density(0.5, 0.0)


def test_perceptual_hue_values():
    assert perceptual_hue(0.0, 0.2, 0.9) == 0.0
    assert perceptual_hue(0.5, 0.25, 0.75) == pytest.approx(0.5, abs=1e-15)
    # defaults are the identity map
    h = np.linspace(0, 1, 101)
    np.testing.assert_allclose(perceptual_hue(h, 1 / 3, 2 / 3), h, atol=1e-15)


@pytest.mark.parametrize("g, b", [(0.5, 0.4), (0.0, 0.5), (0.3, 1.0), (0.4, 0.4)])
def test_perceptual_hue_rejects_bad_gammas(g, b):
    with pytest.raises(ValueError):
        perceptual_hue(0.3, g, b)


@settings(max_examples=200)
@given(st.floats(0.01, 0.98), st.floats(0.002, 0.98), st.floats(0, 1))
def test_inverse_hue_inverts(g, gap, x):
    b = min(g + gap, 0.99)
    if b - g < 1e-3:
        return
    assert inverse_hue(perceptual_hue(x, g, b), g, b) == pytest.approx(x, abs=1e-12)
    assert perceptual_hue(inverse_hue(x, g, b), g, b) == pytest.approx(x, abs=1e-12)


def test_density_t_examples():
    x = np.linspace(0, 1, 7)
    np.testing.assert_array_equal(density_t(x, DEFAULT_PARAMS), np.ones(7))
    t = lambda p: 1 + 0.5 * np.cos(2 * np.pi * p)
    assert density_t(np.array(0.0), t) == pytest.approx(1.5)
    assert density_t(np.array(0.5), t) == pytest.approx(0.5)


def test_fourier_density_is_clamped_and_periodic():
    params = HviParams(t_mode="fourier", t_coeffs=(0.2, 1.0, 0.0))
    x = np.linspace(0, 1, 1001)
    t = params.t(x)
    assert t.min() == 0.0
    assert t[0] == pytest.approx(t[-1], abs=1e-12)
    np.testing.assert_allclose(fourier_series(np.array([0.25]), (1.0, 0.0, 2.0)), [3.0])


def test_params_validation():
    with pytest.raises(ValueError):
        HviParams(k=-1.0)
    with pytest.raises(ValueError):
        HviParams(gamma_g=0.7, gamma_b=0.6)
    with pytest.raises(ValueError):
        HviParams(t_mode="spline")
    with pytest.raises(ValueError):
        HviParams(t_fn=lambda x: np.full_like(x, -1.0))


# --- forward / inverse -----------------------------------------------------------


def test_forward_examples():
    np.testing.assert_allclose(hvi_forward(np.array([1.0, 0, 0])), [1, 0, 1], atol=1e-7)
    assert np.array_equal(hvi_forward(np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(hvi_forward(np.array([0.4, 0.4, 0.4])), [0, 0, 0.4])


def test_red_seam_collapses():
    a = hsv_to_hvi(np.array([0.0, 1.0, 1.0]))
    b = hsv_to_hvi(np.array([1.0, 1.0, 1.0]))
    assert np.abs(a - b).max() <= 1e-12


def test_black_plane_collapses_to_origin():
    rng = np.random.default_rng(0)
    hsv = np.column_stack([rng.uniform(0, 1, 500), rng.uniform(0, 1, 500), np.zeros(500)])
    assert not np.abs(hvi_forward(hsv_to_srgb(hsv))).any()
    assert not phvit(np.zeros(3)).any()


def test_phvit_gray_axis_and_controls():
    np.testing.assert_allclose(phvit(np.array([0, 0, 0.6])), [0.6] * 3, atol=1e-15)
    out = phvit(np.array([0, 0, 0.6]), controls=InverseControls(alpha_i=1.5))
    np.testing.assert_allclose(out, [0.9] * 3, atol=1e-12)


def test_alpha_s_scales_saturation():
    rgb = np.array([0.8, 0.4, 0.3])
    hvi = hvi_forward(rgb)
    s0 = srgb_to_hsv(phvit(hvi))[1]
    s1 = srgb_to_hsv(phvit(hvi, controls=InverseControls(alpha_s=0.5)))[1]
    assert s1 == pytest.approx(0.5 * s0, abs=1e-9)


@pytest.mark.parametrize(
    "params",
    [
        DEFAULT_PARAMS,
        HviParams(k=0.4),
        HviParams(k=3.0, gamma_g=0.2, gamma_b=0.55),
        HviParams(k=1.2, t_mode="fourier", t_coeffs=(1.0, 0.3, -0.2, 0.1, 0.05)),
    ],
)
def test_round_trip_under_various_params(params):
    rng = np.random.default_rng(11)
    rgb = rng.uniform(1 / 255, 1, (20_000, 3))
    assert np.abs(phvit(hvi_forward(rgb, params), params) - rgb).max() <= 1e-4


@settings(max_examples=300)
@given(st.tuples(*[st.floats(1 / 255, 1.0)] * 3))
def test_round_trip_property(rgb):
    rgb = np.array(rgb)
    assert np.abs(phvit(hvi_forward(rgb)) - rgb).max() <= 1e-4


def test_forward_stays_in_domain():
    rng = np.random.default_rng(5)
    for k in (0.3, 1.0, 4.0):
        hvi = hvi_forward(rng.uniform(0, 1, (5000, 3)), HviParams(k=k))
        r2 = hvi[..., 0] ** 2 + hvi[..., 1] ** 2
        # EPS inside C_k lets the radius exceed the bound by a hair near i=0
        assert np.all(r2 <= domain_bound_sq(hvi[..., 2], k) * (1 + 1e-6) + 1e-7)


# --- clip ------------------------------------------------------------------------------------


def test_clip_examples():
    np.testing.assert_array_equal(clip_domain(np.array([0.5, 0.5, 1.0])), [0.5, 0.5, 1.0])
    np.testing.assert_array_equal(clip_domain(np.array([1.0, 0.0, 0.0])), [0, 0, 0])
    out = clip_domain(np.array([0.8, 0.6, 0.5]))
    np.testing.assert_allclose(out, [0.8 * math.sqrt(0.5), 0.6 * math.sqrt(0.5), 0.5], atol=1e-12)
    np.testing.assert_allclose(out, [0.5657, 0.4243, 0.5], atol=1e-4)


def test_clip_clamps_intensity():
    out = clip_domain(np.array([[0.0, 0.0, 1.7], [0.1, 0.0, -0.3]]))
    np.testing.assert_array_equal(out[:, 2], [1.0, 0.0])
    np.testing.assert_array_equal(out[1, :2], [0.0, 0.0])


@settings(max_examples=300)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.5, 1.5), st.sampled_from([0.5, 1.0, 2.5]))
def test_clip_property(h, v, i, k):
    p = clip_domain(np.array([h, v, i]), k)
    assert p[0] ** 2 + p[1] ** 2 <= domain_bound_sq(p[2], k)
    assert np.array_equal(clip_domain(p, k), p)
