"""``hvinet`` command line: convert, enhance, train, evaluate, verify.

Data goes to files or stdout; diagnostics go to stderr. Exit status is 0 on
success, 1 when a batch item or a verified property fails, and 2 on usage or
validation errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .color import DEFAULT_PARAMS, InverseControls, check_srgb, hvi_forward, phvit

log = logging.getLogger("hvinet")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _controls(args) -> InverseControls:
    return InverseControls(alpha_s=args.alpha_s, alpha_i=args.alpha_i)


def cmd_convert(args) -> int:
    from .imageio import read_hvi_png, read_params, read_png, write_hvi_png, write_png

    if args.direction == "to-hvi":
        params = read_params(args.params) if args.params else DEFAULT_PARAMS
        img = read_png(args.input)
        check_srgb(img)
        write_hvi_png(args.output, hvi_forward(img, params), params)
    else:
        hvi, params = read_hvi_png(args.input)
        # no domain clip here: with a density T that exceeds 1 valid encodings
        # lie outside it, and the inverse clamps saturation on its own
        rgb = phvit(hvi, params, _controls(args))
        write_png(args.output, rgb, bits=args.bits)
    return EXIT_OK


def _enhance_inputs(path: Path):
    """A single image, or a list file with one image (or a low/gt pair) per line."""
    if path.suffix.lower() == ".png":
        return [path]
    items = []
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            p = Path(line.split("\t")[0])
            items.append(p if p.is_absolute() else path.parent / p)
    return items


def cmd_enhance(args) -> int:
    from .cidnet import CidNet, cidnet_forward
    from .imageio import read_png, write_png

    model = CidNet.load(args.model)
    controls = _controls(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    inputs = _enhance_inputs(Path(args.input))
    for src in inputs:
        try:
            img = read_png(src)
            write_png(out_dir / (src.stem + ".png"), cidnet_forward(img, model, controls), bits=args.bits)
        except (OSError, ValueError) as exc:
            failed += 1
            log.error("%s: %s", src, exc)
    log.info("enhanced %d of %d images", len(inputs) - failed, len(inputs))
    return EXIT_FAILED if failed else EXIT_OK


def cmd_train(args) -> int:
    from .training import TrainConfig, format_log, train

    try:
        config = TrainConfig.from_text(Path(args.config).read_text())
    except ValueError as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    out = Path(args.output)
    log_path = Path(args.log) if args.log else Path(str(out) + ".log.tsv")
    for target in (out, log_path):
        if not target.parent.is_dir():
            raise UsageError(f"output directory {target.parent} does not exist")
    low = normal = None
    if config.manifest:
        low, normal = _load_manifest_arrays(config, Path(args.config).parent)

    def progress(step, loss, lr):
        if step % args.log_every == 0 or step == config.steps - 1:
            log.info("step %d  loss %.6f  lr %.3g", step, loss, lr)

    result = train(config, low, normal, callback=progress)
    result.model.save(out)
    log_path.write_text(format_log(result.log))
    return EXIT_OK


def _load_manifest_arrays(config, base: Path):
    from .metrics import PairedDataset

    manifest = Path(config.manifest)
    if not manifest.is_absolute():
        manifest = base / manifest
    data = PairedDataset.from_manifest(manifest, patch=config.patch, seed=config.seed)
    pairs = [data.load(i) for i in range(len(data))]
    shapes = {p[0].shape for p in pairs}
    if len(shapes) != 1:
        raise UsageError("training pairs differ in size; set patch to crop them")
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])


def cmd_evaluate(args) -> int:
    from .cidnet import CidNet
    from .metrics import PairedDataset, evaluate

    model = CidNet.load(args.model)
    data = PairedDataset.from_manifest(args.manifest, patch=args.patch, seed=args.seed)
    report = evaluate(model, data, args.protocol, per_channel=args.per_channel)
    sys.stdout.write(report.to_text())
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    for row in report.failures:
        log.error("%s: %s", row.name, row.error)
    return EXIT_FAILED if report.failures else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    checks = run_suite(args.suite, quick=args.quick)
    for c in checks:
        print(c.line())
    bad = [c for c in checks if not c.passed]
    if bad:
        log.error("%d of %d checks failed", len(bad), len(checks))
    return EXIT_FAILED if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    p = argparse.ArgumentParser(prog="hvinet", description="HVI color space and CIDNet low-light enhancement.")
    p.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    sub = p.add_subparsers(dest="command", required=True)

    def add_controls(sp):
        sp.add_argument("--alpha-s", type=float, default=1.0, help="saturation gain on inversion (default 1)")
        sp.add_argument("--alpha-i", type=float, default=1.0, help="intensity gain on inversion (default 1)")

    c = sub.add_parser("convert", help="sRGB PNG <-> 16-bit HVI PNG with a .params sidecar")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--direction", choices=("to-hvi", "to-srgb"), required=True)
    c.add_argument("--params", help="key = value file with k, gamma_g, gamma_b, t_mode, t_coeffs (to-hvi only)")
    c.add_argument("--bits", type=int, choices=(8, 16), default=16, help="sRGB output depth for to-srgb")
    add_controls(c)
    c.set_defaults(func=cmd_convert)

    e = sub.add_parser("enhance", help="run a model over one PNG or a list of PNGs")
    e.add_argument("input", help="a .png, or a text file listing one image per line")
    e.add_argument("--model", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--bits", type=int, choices=(8, 16), default=8)
    add_controls(e)
    e.set_defaults(func=cmd_enhance)

    t = sub.add_parser("train", help="train a model from a key = value config file")
    t.add_argument("config")
    t.add_argument("--output", "-o", required=True, help="weight file to write (a .cfg sidecar goes next to it)")
    t.add_argument("--log", help="per-step loss log (default: OUTPUT.log.tsv)")
    t.add_argument("--log-every", type=int, default=100)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("evaluate", help="PSNR/SSIM over a manifest of low/gt pairs")
    v.add_argument("--model", required=True)
    v.add_argument("--manifest", required=True, help="tab-separated low<TAB>gt paths, one pair per line")
    v.add_argument("--protocol", choices=("normal", "gt_mean"), default="normal")
    v.add_argument("--per-channel", action="store_true", help="gt_mean: match each channel's mean separately")
    v.add_argument("--patch", type=int, default=0, help="evaluate seeded random crops of this size")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--csv", help="also write per-image rows as CSV")
    v.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("verify", help="run a property suite and report each check")
    s.add_argument("suite", choices=SUITES)
    s.add_argument("--quick", action="store_true", help="smaller sample sizes")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("hvinet: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.ERROR if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
