"""HVI color space and a toy CIDNet-style enhancement network on numpy."""
from .color import (
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

__version__ = "0.1.0"
