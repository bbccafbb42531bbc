"""Image-quality metrics and the paired-dataset evaluation harness."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _same_shape(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def psnr(x, y) -> float:
    """Peak signal-to-noise ratio in dB for data in [0, 1]; ``inf`` if identical."""
    x, y = _same_shape(x, y)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size=11, sigma=1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    """Separable 'valid' filtering of a 2-D plane by the 1-D kernel ``g``."""
    rows = sliding_window_view(img, len(g), axis=1) @ g
    return sliding_window_view(rows, len(g), axis=0) @ g


def ssim(x, y, window=11, k1=0.01, k2=0.03, sigma=1.5) -> float:
    """Mean structural similarity with a Gaussian window, averaged over channels.

    Statistics are taken only where the window fits entirely inside the image.
    """
    x, y = _same_shape(x, y)
    if min(x.shape[:2]) < window:
        raise ValueError(f"image {x.shape[:2]} smaller than the {window}x{window} window")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    g = gaussian_window(window, sigma)
    c1, c2 = (k1 * 1.0) ** 2, (k2 * 1.0) ** 2
    scores = []
    for ch in range(x.shape[2]):
        a, b = x[..., ch], y[..., ch]
        mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
        var_a = _filter_valid(a * a, g) - mu_a**2
        var_b = _filter_valid(b * b, g) - mu_b**2
        cov = _filter_valid(a * b, g) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def gt_mean_adjust(pred, gt, per_channel=False) -> np.ndarray:
    """Scale ``pred`` so its mean matches ``gt``'s, then clamp to [0, 1].

    With ``per_channel`` each channel is matched separately.
    """
    pred, gt = _same_shape(pred, gt)
    axes = tuple(range(pred.ndim - 1)) if per_channel else None
    mp = pred.mean(axis=axes, keepdims=per_channel)
    if np.any(np.asarray(mp) <= 0):
        raise ValueError("prediction is all black; cannot match mean brightness")
    return np.clip(pred * (gt.mean(axis=axes, keepdims=per_channel) / mp), 0.0, 1.0)


# ---------------------------------------------------------------------------
# datasets and evaluation


def read_manifest(path):
    """Tab-separated ``low<TAB>gt`` path pairs; relative paths resolve against
    the manifest's directory."""
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two tab-separated paths")
        entries.append(tuple(str(p if Path(p).is_absolute() else base / p) for p in parts))
    return entries


@dataclass
class PairedDataset:
    entries: list
    patch: int = 0
    seed: int = 0

    @classmethod
    def from_manifest(cls, path, patch=0, seed=0):
        return cls(read_manifest(path), patch, seed)

    def __len__(self):
        return len(self.entries)

    def load(self, index):
        """Load one pair; with ``patch`` set, take a seeded random crop."""
        from .imageio import read_png

        low_path, gt_path = self.entries[index]
        low, gt = read_png(low_path), read_png(gt_path)
        if low.shape != gt.shape:
            raise ValueError(f"pair {index} has mismatched sizes {low.shape} vs {gt.shape}")
        if self.patch:
            h, w = low.shape[:2]
            if min(h, w) < self.patch:
                raise ValueError(f"pair {index} smaller than patch size {self.patch}")
            rng = np.random.default_rng((self.seed, index))
            y0 = int(rng.integers(0, h - self.patch + 1))
            x0 = int(rng.integers(0, w - self.patch + 1))
            sl = (slice(y0, y0 + self.patch), slice(x0, x0 + self.patch))
            low, gt = low[sl], gt[sl]
        return low, gt


@dataclass
class EvalRow:
    name: str
    psnr: float = math.nan
    ssim: float = math.nan
    error: Optional[str] = None


@dataclass
class EvalReport:
    protocol: str
    rows: list = field(default_factory=list)

    @property
    def ok_rows(self):
        return [r for r in self.rows if r.error is None]

    @property
    def failures(self):
        return [r for r in self.rows if r.error is not None]

    @property
    def mean_psnr(self):
        vals = [r.psnr for r in self.ok_rows]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def mean_ssim(self):
        vals = [r.ssim for r in self.ok_rows]
        return float(np.mean(vals)) if vals else math.nan

    def to_text(self) -> str:
        out = io.StringIO()
        for r in self.rows:
            if r.error is None:
                out.write(f"image\t{r.name}\tpsnr={r.psnr:.6f}\tssim={r.ssim:.6f}\n")
            else:
                out.write(f"image\t{r.name}\terror={r.error}\n")
        out.write(f"summary\tprotocol={self.protocol}\tcount={len(self.ok_rows)}\tfailed={len(self.failures)}\t")
        out.write(f"mean_psnr={self.mean_psnr:.6f}\tmean_ssim={self.mean_ssim:.6f}\n")
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["name", "psnr", "ssim", "error"])
        for r in self.rows:
            writer.writerow([r.name, r.psnr, r.ssim, r.error or ""])
        return out.getvalue()


def _as_callable(model) -> Callable:
    if callable(model) and not hasattr(model, "forward"):
        return model
    from .cidnet import cidnet_forward

    return lambda img: cidnet_forward(img, model)


def evaluate(model, dataset, protocol="normal", per_channel=False, ssim_window=11) -> EvalReport:
    """PSNR/SSIM of ``model`` over a :class:`PairedDataset` (or a list of
    ``(low, gt)`` array pairs). ``protocol="gt_mean"`` brightness-aligns each
    prediction to its ground truth first. Failing entries are recorded and
    skipped."""
    if protocol not in ("normal", "gt_mean"):
        raise ValueError(f"unknown protocol {protocol!r}")
    run = _as_callable(model)
    report = EvalReport(protocol)
    if isinstance(dataset, PairedDataset):
        items = ((dataset.entries[i][0], lambda i=i: dataset.load(i)) for i in range(len(dataset)))
    else:
        items = ((f"pair{i}", lambda p=p: p) for i, p in enumerate(dataset))
    for name, fetch in items:
        try:
            low, gt = fetch()
            pred = run(low)
            if protocol == "gt_mean":
                pred = gt_mean_adjust(pred, gt, per_channel)
            window = min(ssim_window, *gt.shape[:2])
            report.rows.append(EvalRow(name, psnr(pred, gt), ssim(pred, gt, window=window)))
        except (OSError, ValueError) as exc:
            report.rows.append(EvalRow(name, error=f"{type(exc).__name__}: {exc}"))
    return report
