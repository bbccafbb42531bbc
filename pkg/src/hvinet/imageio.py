"""PNG exchange (8- and 16-bit) and the 16-bit HVI interchange encoding.

HVI planes are stored as a 3-channel 16-bit PNG: ``hbar`` and ``vbar`` are
remapped from [-1, 1] to [0, 1] via ``(x + 1) / 2``; intensity is stored as is.
"""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

# decoding failures are reported through exceptions, not OpenCV's own log
cv2.utils.logging.setLogLevel(cv2.utils.logging.LOG_LEVEL_SILENT)

from .color import HviParams
from .config import read_kv, write_kv


class ImageReadError(IOError):
    pass


def read_png(path) -> np.ndarray:
    """Read an 8- or 16-bit PNG as an ``(H, W, 3)`` float64 RGB array in [0, 1]."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such image {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageReadError(f"cannot decode image {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageReadError(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        raw = np.repeat(raw[..., None], 3, axis=-1)
    elif raw.shape[2] == 4:
        raw = raw[..., :3]
    rgb = raw[..., ::-1] if raw.shape[2] == 3 else raw
    return rgb.astype(np.float64) / scale


def write_png(path, img, bits=8):
    """Write an ``(H, W, 3)`` array in [0, 1] as an 8- or 16-bit PNG."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3), got {img.shape}")
    top = 255 if bits == 8 else 65535
    q = np.rint(np.clip(img, 0.0, 1.0) * top).astype(np.uint8 if bits == 8 else np.uint16)
    if not cv2.imwrite(str(path), np.ascontiguousarray(q[..., ::-1])):
        raise IOError(f"failed to write {path}")


def encode_hvi(hvi) -> np.ndarray:
    """Remap HVI planes into [0, 1]; values the encoding cannot hold are errors.

    A density T that rises above 1 pushes ``hbar``/``vbar`` past [-1, 1], so
    such parameters cannot be stored losslessly.
    """
    hvi = np.asarray(hvi, dtype=np.float64)
    if np.abs(hvi[..., :2]).max(initial=0.0) > 1.0 + 1e-6:
        raise ValueError("HV planes exceed [-1, 1]; the density T must stay at or below 1 to encode")
    return np.stack([(hvi[..., 0] + 1.0) / 2.0, (hvi[..., 1] + 1.0) / 2.0, hvi[..., 2]], axis=-1)


def decode_hvi(enc) -> np.ndarray:
    enc = np.asarray(enc, dtype=np.float64)
    return np.stack([2.0 * enc[..., 0] - 1.0, 2.0 * enc[..., 1] - 1.0, enc[..., 2]], axis=-1)


def sidecar_path(path) -> Path:
    return Path(str(path) + ".params")


def write_params(path, params: HviParams):
    from .cidnet.model import params_to_dict

    write_kv(path, params_to_dict(params))


def read_params(path) -> HviParams:
    from .cidnet.model import params_from_dict

    d = read_kv(path)
    unknown = set(d) - {"k", "gamma_g", "gamma_b", "t_mode", "t_coeffs"}
    if unknown:
        raise ValueError(f"unknown parameter keys {sorted(unknown)} in {path}")
    return params_from_dict(d)


def write_hvi_png(path, hvi, params: HviParams):
    """Write HVI planes as 16-bit PNG plus the ``.params`` sidecar."""
    write_png(path, encode_hvi(hvi), bits=16)
    write_params(sidecar_path(path), params)


def read_hvi_png(path):
    """Read HVI planes and their sidecar parameters; the sidecar is required."""
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"missing parameter sidecar {side}")
    return decode_hvi(read_png(path)), read_params(side)
