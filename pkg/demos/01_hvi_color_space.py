"""A walk through the HVI color space.

Run with ``python3 demos/01_hvi_color_space.py``. Everything printed here is
computed on the spot; nothing is read from disk.
"""
import numpy as np

from hvinet import (
    HviParams,
    clip_domain,
    domain_bound_sq,
    hsv_to_hvi,
    hvi_forward,
    inverse_hue,
    perceptual_hue,
    phvit,
)

np.set_printoptions(precision=4, suppress=True)

# HSV has two awkward spots. Red sits on the hue seam, so H=0 and H=1 are the
# same color but far apart as numbers. And every pixel with V=0 is black, no
# matter what H and S say.
print("HSV red at H=0 and H=1 ->", hsv_to_hvi(np.array([0.0, 1, 1])), hsv_to_hvi(np.array([1.0, 1, 1])))
print("HSV black, three hues  ->", hsv_to_hvi(np.array([[0.1, 1, 0], [0.5, 0.3, 0], [0.9, 0.7, 0]])))

# HVI wraps hue onto a circle and scales the radius by a density that goes to
# zero with intensity, so both problems disappear.

# The forward map and its inverse agree to well below 8-bit precision.
rng = np.random.default_rng(0)
pixels = rng.uniform(1 / 255, 1, (100_000, 3))
back = phvit(hvi_forward(pixels))
print("round trip, 1e5 random pixels: max error", np.abs(back - pixels).max())

# k controls how quickly the chroma plane opens up as intensity grows.
# A larger k gives dark pixels more room.
dark = np.array([0.05, 0.02, 0.01])
for k in (0.2, 1.0, 3.0):
    hvi = hvi_forward(dark, HviParams(k=k))
    print(f"k={k}: dark pixel radius {np.hypot(hvi[0], hvi[1]):.4f}")

# The perceptual hue curve bends hue so that the red, green and blue
# primaries land at gamma_g and gamma_b. It is invertible.
h = np.linspace(0, 1, 7)
x = perceptual_hue(h, 0.25, 0.7)
print("hue ->", h)
print("bent ->", x)
print("unbent ->", inverse_hue(x, 0.25, 0.7))

# A network can emit points that no sRGB pixel maps to. clip_domain pulls
# them back onto the valid cone, and clipping twice changes nothing.
wild = np.array([[1.4, -0.3, 0.2], [0.1, 0.1, 1.3], [0.0, 0.9, 0.5]])
once = clip_domain(wild)
print("clipped:\n", once)
print("inside the bound:", once[:, 0] ** 2 + once[:, 1] ** 2 <= domain_bound_sq(once[:, 2], 1.0))
print("idempotent:", np.array_equal(clip_domain(once), once))
