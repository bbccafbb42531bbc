"""The dual-branch enhancement network and its file format."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .. import autograd as ag
from ..color import HviParams, InverseControls, check_srgb
from ..config import format_kv, parse_kv
from .layers import Conv, LightenCrossAttention, Module, conv
from .transform import HviTransform

STEM_VARIANTS = ("half", "separate", "full")


@dataclass(frozen=True)
class CidnetConfig:
    base_channels: int = 8
    heads: tuple = (1, 2, 4)
    stem_variant: str = "half"
    padding: str = "reflect"
    cross_attention: bool = True
    cab_first: bool = True
    zero_init_output: bool = True
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        heads = tuple(int(h) for h in (self.heads if not isinstance(self.heads, int) else (self.heads,) * 3))
        object.__setattr__(self, "heads", heads)
        if len(heads) != 3:
            raise ValueError("heads needs one entry per stage (3)")
        if self.stem_variant not in STEM_VARIANTS:
            raise ValueError(f"stem_variant must be one of {STEM_VARIANTS}")
        if self.base_channels < 1:
            raise ValueError("base_channels must be positive")
        for width, h in zip(self.widths, heads):
            if width % h:
                raise ValueError(f"stage width {width} not divisible by {h} heads")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def widths(self):
        b = self.base_channels
        return (b, 2 * b, 4 * b)

    def to_dict(self):
        d = asdict(self)
        d["heads"] = ",".join(str(h) for h in self.heads)
        return d

    @classmethod
    def from_dict(cls, d):
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, val in d.items():
            if key not in types:
                continue
            if key == "heads":
                kw[key] = tuple(int(v) for v in str(val).split(","))
            elif key in ("base_channels", "seed"):
                kw[key] = int(val)
            elif key in ("cross_attention", "cab_first", "zero_init_output"):
                kw[key] = val if isinstance(val, bool) else str(val).lower() in ("1", "true", "yes")
            else:
                kw[key] = str(val)
        return cls(**kw)


class Stem(Module):
    """3x3 convolutions producing the intensity and HV feature maps."""

    def __init__(self, variant, channels, rng, dtype, padding):
        self.variant = variant
        i_in = 3 if variant == "full" else 1
        hv_in = 2 if variant == "separate" else 3
        self.conv_i = conv(i_in, channels, 3, rng, dtype, padding=padding)
        self.conv_hv = conv(hv_in, channels, 3, rng, dtype, padding=padding)

    def __call__(self, hvi):
        i_plane = hvi[:, 2:3]
        i_src = hvi if self.variant == "full" else i_plane
        hv_src = hvi[:, 0:2] if self.variant == "separate" else hvi
        return self.conv_i(i_src), self.conv_hv(hv_src)


class Resample(Module):
    """Stride-2 convolution (down) or nearest upsampling + 3x3 convolution (up)
    applied to both branches with separate weights."""

    def __init__(self, cin, cout, rng, dtype, padding, up):
        self.up = up
        stride = 1 if up else 2
        self.conv_i = conv(cin, cout, 3, rng, dtype, stride=stride, padding=padding)
        self.conv_hv = conv(cin, cout, 3, rng, dtype, stride=stride, padding=padding)

    def __call__(self, y_i, y_hv):
        if self.up:
            y_i, y_hv = ag.upsample_nearest(y_i), ag.upsample_nearest(y_hv)
        return self.conv_i(y_i), self.conv_hv(y_hv)


class Fuse(Module):
    """Concatenate a skip connection and project back with a 1x1 convolution."""

    def __init__(self, channels, rng, dtype, padding):
        self.conv_i = conv(2 * channels, channels, 1, rng, dtype, padding=padding)
        self.conv_hv = conv(2 * channels, channels, 1, rng, dtype, padding=padding)

    def __call__(self, y_i, y_hv, skip_i, skip_hv):
        return (
            self.conv_i(ag.concat([y_i, skip_i], axis=1)),
            self.conv_hv(ag.concat([y_hv, skip_hv], axis=1)),
        )


class CidNet(Module):
    """HVI stem, three encoder and three decoder LCA stages, residual output."""

    def __init__(self, config: CidnetConfig = CidnetConfig(), params: HviParams = HviParams()):
        self.config = config
        dtype = np.dtype(config.dtype)
        rng = np.random.default_rng(config.seed)
        c1, c2, c3 = config.widths
        h1, h2, h3 = config.heads
        pad = config.padding

        def lca(c, h):
            return LightenCrossAttention(c, h, rng, dtype, pad, config.cross_attention, config.cab_first)

        self.transform = HviTransform(params, dtype=dtype)
        self.stem = Stem(config.stem_variant, c1, rng, dtype, pad)
        self.enc1 = lca(c1, h1)
        self.down1 = Resample(c1, c2, rng, dtype, pad, up=False)
        self.enc2 = lca(c2, h2)
        self.down2 = Resample(c2, c3, rng, dtype, pad, up=False)
        self.enc3 = lca(c3, h3)
        self.down3 = Resample(c3, c3, rng, dtype, pad, up=False)
        self.up3 = Resample(c3, c3, rng, dtype, pad, up=True)
        self.fuse3 = Fuse(c3, rng, dtype, pad)
        self.dec3 = lca(c3, h3)
        self.up2 = Resample(c3, c2, rng, dtype, pad, up=True)
        self.fuse2 = Fuse(c2, rng, dtype, pad)
        self.dec2 = lca(c2, h2)
        self.up1 = Resample(c2, c1, rng, dtype, pad, up=True)
        self.fuse1 = Fuse(c1, rng, dtype, pad)
        self.dec1 = lca(c1, h1)
        self.out_i = conv(c1, 1, 3, rng, dtype, padding=pad)
        self.out_hv = conv(c1, 2, 3, rng, dtype, padding=pad)
        if config.zero_init_output:
            self.zero_output()

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def named_parameters(self, prefix=""):
        yield from self.transform.named_parameters(prefix + "hvi.")
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")

    def zero_output(self):
        """Zero the final projection so the network reduces to its residual path."""
        self.out_i.zero_()
        self.out_hv.zero_()

    def refine(self, hvi):
        """Predicted HVI correction (before the residual) for an HVI tensor."""
        y_i, y_hv = self.stem(hvi)
        e1 = self.enc1(y_i, y_hv)
        e2 = self.enc2(*self.down1(*e1))
        e3 = self.enc3(*self.down2(*e2))
        b = self.down3(*e3)
        d3 = self.dec3(*self.fuse3(*self.up3(*b), *e3))
        d2 = self.dec2(*self.fuse2(*self.up2(*d3), *e2))
        d1 = self.dec1(*self.fuse1(*self.up1(*d2), *e1))
        return ag.concat([self.out_hv(d1[1]), self.out_i(d1[0])], axis=1)

    def forward(self, img, controls: InverseControls = InverseControls()):
        """Run the pipeline on an ``(N, 3, H, W)`` sRGB batch whose sides are
        multiples of 8. Returns ``(hvi_in, hvi_out, rgb)`` tensors; ``hvi_out``
        is the unclipped residual prediction."""
        hvi_in = self.transform.forward(np.asarray(img, dtype=self.dtype))
        hvi_out = self.refine(hvi_in) + hvi_in
        rgb = self.transform.inverse(self.transform.clip(hvi_out), controls)
        return hvi_in, hvi_out, rgb

    def state_dict(self):
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise ValueError(f"weight names mismatch; missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {p.shape}")
            p.data = arr.astype(p.dtype).copy()

    # -- files -------------------------------------------------------------
    def save(self, path):
        """Write ``path`` (binary weights) and ``path + '.cfg'`` (text sidecar)."""
        path = Path(path)
        ag.save_tensors(path, self.state_dict())
        sidecar = dict(self.config.to_dict())
        sidecar.update(params_to_dict(self.transform.params()))
        Path(str(path) + ".cfg").write_text(format_kv(sidecar))

    @classmethod
    def load(cls, path):
        path = Path(path)
        sidecar = Path(str(path) + ".cfg")
        if not sidecar.exists():
            raise FileNotFoundError(f"missing model sidecar {sidecar}")
        d = parse_kv(sidecar.read_text())
        model = cls(CidnetConfig.from_dict(d), params_from_dict(d))
        model.load_state_dict(ag.load_tensors(path))
        return model


def params_to_dict(params: HviParams):
    return {
        "k": repr(params.k),
        "gamma_g": repr(params.gamma_g),
        "gamma_b": repr(params.gamma_b),
        "t_mode": params.t_mode,
        "t_coeffs": ",".join(repr(c) for c in params.t_coeffs),
    }


def params_from_dict(d) -> HviParams:
    coeffs = str(d.get("t_coeffs", "")).strip()
    return HviParams(
        k=float(d.get("k", 1.0)),
        gamma_g=float(d.get("gamma_g", 1.0 / 3.0)),
        gamma_b=float(d.get("gamma_b", 2.0 / 3.0)),
        t_mode=str(d.get("t_mode", "constant")),
        t_coeffs=tuple(float(c) for c in coeffs.split(",")) if coeffs else (),
    )


def _pad_amounts(n):
    total = (-n) % 8
    return total // 2, total - total // 2


def reflect_pad_image(img):
    """Reflect-pad an ``(N, H, W, 3)`` batch on both sides to multiples of 8."""
    top, bottom = _pad_amounts(img.shape[1])
    left, right = _pad_amounts(img.shape[2])
    width = ((0, 0), (top, bottom), (left, right), (0, 0))
    mode = "reflect" if min(img.shape[1:3]) > 1 else "edge"
    return np.pad(img, width, mode=mode), (top, left)


def cidnet_forward(img, model: CidNet, controls: InverseControls = InverseControls()):
    """Enhance an ``(H, W, 3)`` image or ``(N, H, W, 3)`` batch; same shape out."""
    img = check_srgb(img)
    single = img.ndim == 3
    batch = img[None] if single else img
    h, w = batch.shape[1:3]
    padded, (top, left) = reflect_pad_image(batch)
    with ag.no_grad():
        _, _, rgb = model.forward(np.moveaxis(padded, -1, 1), controls)
    out = np.moveaxis(rgb.data, 1, -1)[:, top : top + h, left : left + w]
    out = np.clip(out.astype(np.float64), 0.0, 1.0)
    return out[0] if single else out
