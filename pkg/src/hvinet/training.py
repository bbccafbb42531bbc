"""Desk-scale training loop and the synthetic low/normal-light fixture."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import autograd as ag
from .cidnet import CidNet, CidnetConfig
from .color import HviParams
from .config import parse_kv
from .losses import LossWeights

log = logging.getLogger(__name__)


def _upsample_matrix(n_out, n_in):
    """Linear interpolation matrix mapping ``n_in`` samples to ``n_out``."""
    pos = np.linspace(0.0, n_in - 1.0, n_out)
    lo = np.clip(np.floor(pos).astype(int), 0, n_in - 2)
    frac = pos - lo
    m = np.zeros((n_out, n_in))
    m[np.arange(n_out), lo] = 1.0 - frac
    m[np.arange(n_out), lo + 1] = frac
    return m


def smooth_images(n, size=32, seed=0, grid=5, lo=0.15, hi=0.95):
    """``(n, size, size, 3)`` images bilinearly upsampled from a random coarse grid."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(lo, hi, size=(n, grid, grid, 3))
    m = _upsample_matrix(size, grid)
    return np.einsum("yi,nijc,xj->nyxc", m, coarse, m)


def darken(images, gamma=2.0, noise=0.01, seed=1):
    """Gamma-darken and add Gaussian noise, clipped to [1/255, 1]."""
    rng = np.random.default_rng(seed)
    low = images**gamma + rng.normal(0.0, noise, size=images.shape)
    return np.clip(low, 1.0 / 255.0, 1.0)


def synthetic_pairs(n=8, size=32, seed=0, gamma=2.0, noise=0.01):
    """``(low, normal)`` arrays of shape ``(n, size, size, 3)``."""
    normal = smooth_images(n, size, seed)
    return darken(normal, gamma, noise, seed + 1), normal


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-4
    lr_min: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    loss_mode: str = "both"
    pixel_mode: str = "l1"
    lambda_1: float = 1.0
    lambda_e: float = 1.0
    lambda_p: float = 0.01
    lambda_c: float = 1.0
    train_hvi_params: bool = True
    model: CidnetConfig = field(default_factory=lambda: CidnetConfig(dtype="float32"))
    params: HviParams = field(default_factory=HviParams)
    # fixture used when no manifest is given
    fixture_pairs: int = 8
    fixture_size: int = 32
    fixture_gamma: float = 2.0
    fixture_noise: float = 0.01
    manifest: str = ""
    patch: int = 0

    def loss_weights(self) -> LossWeights:
        return LossWeights.for_mode(
            self.loss_mode,
            lambda_1=self.lambda_1,
            lambda_e=self.lambda_e,
            lambda_p=self.lambda_p,
            lambda_c=self.lambda_c,
            pixel_mode=self.pixel_mode,
        )

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        """Build from flat ``key = value`` text. Unknown keys are errors."""
        from .cidnet.model import params_from_dict

        d = parse_kv(text)
        model_keys = {f.name for f in fields(CidnetConfig)}
        param_keys = {"k", "gamma_g", "gamma_b", "t_mode", "t_coeffs"}
        own = {f.name: f for f in fields(cls)}
        unknown = set(d) - model_keys - param_keys - set(own)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for key, val in d.items():
            if key in own and key not in ("model", "params"):
                default = getattr(cls(), key)
                if isinstance(default, bool):
                    kw[key] = val.lower() in ("1", "true", "yes")
                else:
                    kw[key] = type(default)(val)
        model_d = {k: v for k, v in d.items() if k in model_keys}
        model_d.setdefault("dtype", "float32")
        kw["model"] = CidnetConfig.from_dict(model_d)
        kw["params"] = params_from_dict({k: v for k, v in d.items() if k in param_keys})
        cfg = cls(**kw)
        cfg.loss_weights()
        return cfg


def project_hvi_params(transform, margin=1e-3):
    """Keep trained HVI parameters inside their valid ranges after a step."""
    k = transform.k.data
    k[...] = np.maximum(k, margin)
    gg, gb = transform.gamma_g.data, transform.gamma_b.data
    gg[...] = np.clip(gg, margin, 1.0 - 2 * margin)
    gb[...] = np.clip(gb, gg + margin, 1.0 - margin)


@dataclass
class TrainResult:
    model: CidNet
    log: list  # rows of (step, loss, lr)


def train(config: TrainConfig, low=None, normal=None, callback=None) -> TrainResult:
    """Train a fresh model on ``(N, H, W, 3)`` low/normal arrays.

    Without arrays, the synthetic fixture described by the config is used.
    Deterministic for a fixed config: initialization and batch order both
    derive from the seeds.
    """
    if low is None:
        low, normal = synthetic_pairs(
            config.fixture_pairs, config.fixture_size, config.seed, config.fixture_gamma, config.fixture_noise
        )
    if low.shape != normal.shape:
        raise ValueError("low and normal arrays differ in shape")
    if low.shape[1] % 8 or low.shape[2] % 8:
        raise ValueError("training patches must have sides that are multiples of 8")
    model = CidNet(config.model, config.params)
    dtype = model.dtype
    weights = config.loss_weights()
    params = [p for name, p in model.named_parameters() if config.train_hvi_params or not name.startswith("hvi.")]
    if not config.train_hvi_params:
        for _, p in model.transform.named_parameters():
            p.requires_grad = False
    opt = ag.Adam(params, lr=config.lr, betas=(config.beta1, config.beta2))
    low_nchw = np.moveaxis(low, -1, 1).astype(dtype)
    normal_nchw = np.moveaxis(normal, -1, 1).astype(dtype)
    n = low.shape[0]
    batch = min(config.batch_size, n)
    order_rng = np.random.default_rng(config.seed + 7919)
    rows = []
    from .losses import total_loss

    for step in range(config.steps):
        lr = ag.cosine_anneal_lr(step, config.steps, config.lr, config.lr_min)
        idx = np.arange(n) if batch == n else np.sort(order_rng.choice(n, batch, replace=False))
        gt = normal_nchw[idx]
        _, hvi_out, rgb = model.forward(low_nchw[idx])
        gt_hvi = model.transform.forward(gt)
        loss = total_loss(hvi_out, gt_hvi, rgb, ag.Tensor(gt), weights)
        opt.zero_grad()
        ag.backward(loss)
        opt.step(lr)
        project_hvi_params(model.transform)
        value = float(loss.data)
        if not np.isfinite(value):
            raise FloatingPointError(f"loss diverged at step {step}")
        rows.append((step, value, lr))
        if callback is not None:
            callback(step, value, lr)
    return TrainResult(model, rows)


def moving_average(values, window=100):
    values = np.asarray(values, dtype=np.float64)
    window = min(window, len(values))
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def format_log(rows) -> str:
    lines = ["step\tloss\tlr"]
    lines += [f"{s}\t{l:.9g}\t{lr:.9g}" for s, l, lr in rows]
    return "\n".join(lines) + "\n"


def with_overrides(config: TrainConfig, **kw) -> TrainConfig:
    return replace(config, **kw)
