"""Property suites behind ``hvinet verify``.

Each suite returns a list of :class:`Check` records: the measured value,
the bound it is held to, and whether it passed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .color import (
    DEFAULT_PARAMS,
    HviParams,
    clip_domain,
    domain_bound_sq,
    hsv_to_srgb,
    hvi_forward,
    inverse_hue,
    perceptual_hue,
    phvit,
)

SUITES = ("roundtrip", "gradcheck", "hsv-pathology", "clip", "metrics")


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {self.value:.3e} (bound {self.bound:.1e}){extra}"


def at_most(name, value, bound, detail="") -> Check:
    return Check(name, float(value), float(bound), bool(value <= bound), detail)


# ---------------------------------------------------------------------------
# color-space suites


def quantized_cube(levels=32, lo=1.0 / 255.0):
    axis = np.linspace(lo, 1.0, levels)
    r, g, b = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([r, g, b], axis=-1).reshape(-1, 3)


def roundtrip_error(pixels, params: HviParams = DEFAULT_PARAMS, chunk=250_000) -> float:
    worst = 0.0
    for start in range(0, len(pixels), chunk):
        block = pixels[start : start + chunk]
        worst = max(worst, float(np.abs(phvit(hvi_forward(block, params), params) - block).max()))
    return worst


def roundtrip_suite(n_random=1_000_000, levels=32, seed=0, tol=1e-4):
    rng = np.random.default_rng(seed)
    cube = quantized_cube(levels)
    rand = rng.uniform(1.0 / 255.0, 1.0, size=(n_random, 3))
    return [
        at_most(f"round trip, {levels}^3 quantized cube", roundtrip_error(cube), tol),
        at_most(f"round trip, {n_random} random pixels", roundtrip_error(rand), tol),
    ]


def pathology_suite(seed=0, n=100_000):
    """Hue seam and black plane: both HSV degeneracies collapse in HVI."""
    checks = []
    red_a = hvi_forward(hsv_to_srgb(np.array([0.0, 1.0, 1.0])))
    red_b = hvi_forward(hsv_to_srgb(np.array([1.0, 1.0, 1.0])))
    from .color import hsv_to_hvi

    direct = np.abs(hsv_to_hvi(np.array([0.0, 1.0, 1.0])) - hsv_to_hvi(np.array([1.0, 1.0, 1.0]))).max()
    checks.append(at_most("red as HSV (0,1,1) vs (1,1,1): HVI distance", direct, 1e-12))
    checks.append(at_most("red via sRGB: HVI distance", np.abs(red_a - red_b).max(), 1e-12))

    rng = np.random.default_rng(seed)
    black_hsv = np.column_stack([rng.uniform(0, 1, n), rng.uniform(0, 1, n), np.zeros(n)])
    black_hvi = hvi_forward(hsv_to_srgb(black_hsv))
    checks.append(at_most("HSV black plane (V=0): max |HVI|", np.abs(black_hvi).max(), 0.0, f"{n} samples"))
    back = phvit(np.zeros(3))
    checks.append(at_most("HVI origin inverts to black", np.abs(back).max(), 0.0))

    worst = 0.0
    for delta in (1e-2, 1e-4, 1e-6):
        a = hvi_forward(np.array([1.0, delta, 0.0]))
        b = hvi_forward(np.array([1.0, 0.0, delta]))
        worst = max(worst, np.abs(a - b).max() / delta)
    checks.append(at_most("hue seam: |HVI(1,d,0) - HVI(1,0,d)| / d", worst, 2 * math.pi + 1e-6))
    return checks


def random_gammas(rng, n):
    out = []
    while len(out) < n:
        g, b = np.sort(rng.uniform(0.01, 0.99, 2))
        if b - g > 1e-3:
            out.append((float(g), float(b)))
    return out


def inverse_hue_suite(grid=10_000, pairs=100, seed=0, tol=1e-12):
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, grid)
    fwd = inv = 0.0
    for g, b in random_gammas(rng, pairs):
        fwd = max(fwd, np.abs(inverse_hue(perceptual_hue(x, g, b), g, b) - x).max())
        inv = max(inv, np.abs(perceptual_hue(inverse_hue(x, g, b), g, b) - x).max())
    return [
        at_most("F(P(H)) = H", fwd, tol, f"{grid} points x {pairs} pairs"),
        at_most("P(F(X)) = X", inv, tol, f"{grid} points x {pairs} pairs"),
    ]


def random_out_of_domain(rng, n, k):
    """HVI points strictly outside the valid domain."""
    pts = np.empty((0, 3))
    while len(pts) < n:
        cand = np.column_stack(
            [rng.uniform(-1.5, 1.5, 2 * n), rng.uniform(-1.5, 1.5, 2 * n), rng.uniform(-0.2, 1.2, 2 * n)]
        )
        i = np.clip(cand[:, 2], 0.0, 1.0)
        outside = (cand[:, 0] ** 2 + cand[:, 1] ** 2 > domain_bound_sq(i, k)) | (cand[:, 2] != i)
        pts = np.vstack([pts, cand[outside]])
    return pts[:n]


def clip_suite(n=100_000, seed=0, ks=(1.0, 0.5, 2.5)):
    rng = np.random.default_rng(seed)
    checks = []
    for k in ks:
        pts = random_out_of_domain(rng, n, k)
        once = clip_domain(pts, k)
        twice = clip_domain(once, k)
        excess = once[:, 0] ** 2 + once[:, 1] ** 2 - domain_bound_sq(once[:, 2], k)
        checks.append(at_most(f"clip k={k}: max(h^2+v^2 - bound)", max(float(excess.max()), 0.0), 0.0, f"{n} points"))
        i_range = float(max(-once[:, 2].min(), once[:, 2].max() - 1.0, 0.0))
        checks.append(at_most(f"clip k={k}: intensity outside [0,1]", i_range, 0.0))
        changed = int(np.count_nonzero(once != twice))
        checks.append(at_most(f"clip k={k}: idempotence (changed entries)", changed, 0))
    return checks


# ---------------------------------------------------------------------------
# gradient checks


def _probe(shape, rng, dtype=np.float64):
    return rng.standard_normal(shape).astype(dtype)


def _weighted_sum(t, r):
    return (t * ag.Tensor(r)).sum()


def _sample(size, rng, n):
    return rng.choice(size, size=min(n, size), replace=False)


# Below this magnitude a central difference at h=1e-5 is dominated by rounding
# and truncation error, so the relative error says nothing about the analytic
# gradient.
GRAD_FLOOR = 1e-5


def _informative(f, x, rng, n):
    """Up to ``n`` random coordinates whose gradient clears ``GRAD_FLOOR``."""
    x.requires_grad = True
    x.grad = None
    ag.backward(f(x))
    g = np.abs(x.grad.reshape(-1))
    x.grad = None
    pool = np.flatnonzero(g >= GRAD_FLOOR)
    if pool.size == 0:
        pool = np.array([int(np.argmax(g))])
    return rng.choice(pool, size=min(n, pool.size), replace=False)


def _loss_probe_point(rng, transform, shape, kink_margin=1e-4, edge_margin=5e-3, tries=500):
    """Random ``(pred_hvi, gt_img)`` where every L1 argument clears
    ``kink_margin`` and every Laplacian difference clears ``edge_margin``.

    The L1 terms are kinked at zero and the Charbonnier edge term curves on
    the scale of its epsilon, so a point within a few ``h`` of either makes
    the finite-difference stencil, not the analytic gradient, the error.
    """
    from .losses import _gradients, laplacian

    offset = np.array([0.0, 0.0, 0.5])[None, :, None, None]
    for _ in range(tries):
        pred = rng.uniform(-0.4, 0.4, shape) + offset
        gt = rng.uniform(0.05, 1.0, shape)
        with ag.no_grad():
            pred_rgb = transform.inverse(transform.clip(ag.Tensor(pred))).data
            gt_hvi = transform.forward(gt).data
        gaps, edges = [], []
        for a, b in ((pred, gt_hvi), (pred_rgb, gt)):
            gaps.append(a - b)
            edges.append(laplacian(a).data - laplacian(b).data)
            ta, tb = ag.Tensor(a), ag.Tensor(b)
            for s in range(3):
                if s:
                    ta, tb = ag.avg_pool2(ta), ag.avg_pool2(tb)
                gaps += [ga.data - gb.data for ga, gb in zip(_gradients(ta), _gradients(tb))]
        if min(np.abs(g).min() for g in gaps) >= kink_margin and min(np.abs(e).min() for e in edges) >= edge_margin:
            return pred, gt
    raise RuntimeError("no well-conditioned loss probe point found")


def gradcheck_cases(seed, channels=4, heads=2, size=4):
    """``(name, f, x, coords)`` for every network block at toy size.

    Each ``f`` is a scalar probe ``sum(R * block(...))`` with a fixed random
    ``R`` so no gradient component cancels by symmetry.
    """
    from .cidnet import CidNet, CidnetConfig, HviTransform
    from .cidnet.layers import CrossAttention, GatedLayer, LightenCrossAttention
    from .cidnet.model import Stem
    from .losses import LossWeights, total_loss

    rng = np.random.default_rng(seed)
    dt = np.float64
    shape = (1, channels, size, size)
    y_i = ag.Tensor(_probe(shape, rng))
    y_hv = ag.Tensor(_probe(shape, rng))
    cases = []

    def add(name, f, x, n_coords=None, informative=False):
        if n_coords is None:
            coords = None
        elif informative:
            coords = _informative(f, x, rng, n_coords)
        else:
            coords = _sample(x.size, rng, n_coords)
        cases.append((name, f, x, coords))

    cab = CrossAttention(channels, heads, rng, dt)
    r = _probe(shape, rng)
    add("CAB (I direction) wrt y_i", lambda x: _weighted_sum(cab(x, y_hv), r), y_i)
    add("CAB (I direction) wrt y_hv", lambda x: _weighted_sum(cab(y_i, x), r), y_hv)
    add("CAB (I direction) wrt query weights", lambda x: _weighted_sum(cab(y_i, y_hv), r), cab.query.spatial.weight, 24)
    cab2 = CrossAttention(channels, heads, rng, dt)
    add("CAB (HV direction) wrt y_hv", lambda x: _weighted_sum(cab2(x, y_i), r), y_hv)
    add("CAB (HV direction) wrt key weights", lambda x: _weighted_sum(cab2(y_hv, y_i), r), cab2.key.spatial.weight, 24)

    iel = GatedLayer(channels, rng, dt)
    add("IEL wrt input", lambda x: _weighted_sum(iel(x), r), y_i)
    add("IEL wrt gate weights", lambda x: _weighted_sum(iel(y_i), r), iel.gate_a.weight)
    cdl = GatedLayer(channels, rng, dt)
    add("CDL wrt input", lambda x: _weighted_sum(cdl(x), r), y_hv)
    add("CDL wrt projection weights", lambda x: _weighted_sum(cdl(y_hv), r), cdl.proj_b.weight)

    lca = LightenCrossAttention(channels, heads, rng, dt)
    r2 = _probe(shape, rng)

    def lca_probe(a, b):
        oi, ohv = lca(a, b)
        return _weighted_sum(oi, r) + _weighted_sum(ohv, r2)

    add("LCA wrt y_i", lambda x: lca_probe(x, y_hv), y_i)
    add("LCA wrt y_hv", lambda x: lca_probe(y_i, x), y_hv)
    add("LCA wrt CDL mix weights", lambda x: lca_probe(y_i, y_hv), lca.cdl.mix.weight)

    img = rng.uniform(0.05, 1.0, (1, 3, 8, 8))
    fourier = HviParams(k=1.3, gamma_g=0.3, gamma_b=0.7, t_mode="fourier", t_coeffs=(1.0, 0.1, -0.05))
    transform = HviTransform(fourier)
    stem = Stem("half", channels, rng, dt, "reflect")
    rs1, rs2 = _probe((1, channels, 8, 8), rng), _probe((1, channels, 8, 8), rng)

    def stem_probe(_):
        fi, fhv = stem(transform.forward(img))
        return _weighted_sum(fi, rs1) + _weighted_sum(fhv, rs2)

    add("stem wrt HV conv weights", stem_probe, stem.conv_hv.weight)
    add("stem wrt k", stem_probe, transform.k)
    add("stem wrt gamma_g", stem_probe, transform.gamma_g)
    add("stem wrt T coefficients", stem_probe, transform.t_coeffs)

    model = CidNet(CidnetConfig(base_channels=4, heads=(1, 2, 4), zero_init_output=False, seed=seed), fourier)
    r_out = _probe((1, 3, 8, 8), rng)

    def net_probe(_):
        return _weighted_sum(model.forward(img)[2], r_out)

    for pname in ("enc1.cab_i.query.spatial.weight", "enc3.iel.mix.weight", "dec1.cab_hv.out.point.weight",
                  "fuse2.conv_i.weight", "out_hv.weight"):
        add(f"CIDNet forward wrt {pname}", net_probe, dict(model.named_parameters())[pname], 8, True)
    for pname in ("hvi.k", "hvi.gamma_g", "hvi.gamma_b", "hvi.t_coeffs"):
        add(f"CIDNet forward wrt {pname}", net_probe, dict(model.named_parameters())[pname])

    loss_tf = HviTransform(fourier)
    pred_np, gt_img = _loss_probe_point(rng, loss_tf, (1, 3, 8, 8))
    pred_in = ag.Tensor(pred_np)
    weights = LossWeights(lambda_p=0.5)

    def loss_probe(_, pred=None):
        pred = pred_in if pred is None else pred
        pred_rgb = loss_tf.inverse(loss_tf.clip(pred))
        return total_loss(pred, loss_tf.forward(gt_img), pred_rgb, ag.Tensor(gt_img), weights)

    add("total_loss wrt predicted HVI", lambda x: loss_probe(None, x), pred_in, pred_in.size, True)
    for pname, p in loss_tf.named_parameters():
        add(f"total_loss wrt {pname}", loss_probe, p)
    return cases


def gradcheck_suite(seeds=range(20), tol=1e-4, h=1e-5):
    worst = {}
    for seed in seeds:
        for name, f, x, coords in gradcheck_cases(seed):
            err = ag.gradcheck(f, x, h=h, coords=coords)
            worst[name] = max(worst.get(name, 0.0), err)
    n = len(list(seeds))
    return [at_most(f"gradcheck {name}", err, tol, f"{n} seeds") for name, err in worst.items()]


# ---------------------------------------------------------------------------
# metrics


def ssim_oracle(x, y, window=11, sigma=1.5, k1=0.01, k2=0.03):
    """SSIM from a full 2-D Gaussian kernel, accumulated one kernel tap at a
    time. Shares no filtering code with :func:`hvinet.metrics.ssim`."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    r = np.arange(window) - (window - 1) / 2.0
    kern = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma**2))
    kern /= kern.sum()
    h, w = x.shape[:2]
    ho, wo = h - window + 1, w - window + 1
    c1, c2 = k1**2, k2**2
    vals = []
    for ch in range(x.shape[2]):
        a, b = x[..., ch], y[..., ch]
        stats = np.zeros((5, ho, wo))
        for dy in range(window):
            for dx in range(window):
                pa = a[dy : dy + ho, dx : dx + wo]
                pb = b[dy : dy + ho, dx : dx + wo]
                kw = kern[dy, dx]
                stats += kw * np.stack([pa, pb, pa * pa, pb * pb, pa * pb])
        ma, mb, saa, sbb, sab = stats
        va, vb, cov = saa - ma**2, sbb - mb**2, sab - ma * mb
        vals.append(np.mean(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma**2 + mb**2 + c1) * (va + vb + c2))))
    return float(np.mean(vals))


def psnr_oracle(x, y):
    rmse = math.sqrt(float(np.mean((np.asarray(x, float) - np.asarray(y, float)) ** 2)))
    return math.inf if rmse == 0 else 20.0 * math.log10(1.0 / rmse)


def metrics_suite(n_pairs=50, seed=0, size=(24, 20)):
    from .metrics import gt_mean_adjust, psnr, ssim

    rng = np.random.default_rng(seed)
    dp = ds = dm = 0.0
    for _ in range(n_pairs):
        x = rng.uniform(0, 1, size + (3,))
        y = np.clip(x + rng.normal(0, rng.uniform(0.01, 0.3), x.shape), 0, 1)
        dp = max(dp, abs(psnr(x, y) - psnr_oracle(x, y)))
        ds = max(ds, abs(ssim(x, y) - ssim_oracle(x, y)))
        gt = rng.uniform(0.2, 0.8, x.shape)
        pred = gt * rng.uniform(0.3, 0.9)
        dm = max(dm, abs(gt_mean_adjust(pred, gt).mean() - gt.mean()))
    return [
        at_most("psnr vs oracle", dp, 1e-6, f"{n_pairs} pairs"),
        at_most("ssim vs oracle", ds, 1e-4, f"{n_pairs} pairs"),
        at_most("gt-mean adjusted mean vs gt mean", dm, 1e-6),
    ]


def run_suite(name, quick=False):
    if name == "roundtrip":
        return roundtrip_suite(n_random=100_000 if quick else 1_000_000)
    if name == "hsv-pathology":
        return pathology_suite() + inverse_hue_suite(pairs=10 if quick else 100)
    if name == "clip":
        return clip_suite(n=10_000 if quick else 100_000)
    if name == "gradcheck":
        return gradcheck_suite(seeds=range(2 if quick else 20))
    if name == "metrics":
        return metrics_suite(n_pairs=10 if quick else 50)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
