"""polydither command line: build-tables, dither, ramp, spectrum, compare.

Exit codes: 0 success, 1 runtime failure, 2 usage or asset error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .imageio import ImageFormatError
from .polyomino import AssetInvalid, NotRectifiable, ProductionRule, canonical_g_hexomino, load_shape, packaged_rule
from .ranktable import TableInvalid, load_table, save_table, sidecar, table_from_build

log = logging.getLogger("polydither")


class UsageError(Exception):
    pass


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from exc


def parse_offset(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"offset must be x,y integers, got {text!r}") from exc
    return x, y


def _assets(args):
    """Shape and rule from flags (or the packaged G-hexomino)."""
    if args.shape:
        shape = load_shape(args.shape)
    else:
        shape = canonical_g_hexomino(verify=False)
    if args.rule:
        if not Path(args.rule).exists():
            raise FileNotFoundError(f"rule asset not found: {args.rule}")
        rule = ProductionRule.load(args.rule, shape)
    elif args.shape:
        from .polyomino import GHEX_SCALE, derive_production_rule

        rule = derive_production_rule(shape, GHEX_SCALE)
    else:
        rule = packaged_rule(shape)
    return shape, rule


def _load(args):
    if not args.table:
        raise UsageError("--table is required")
    shape, rule = _assets(args)
    rule_path = sidecar(args.table, "rule")
    if not args.rule and not args.shape and rule_path.exists():
        rule = ProductionRule.load(rule_path, shape)
    return load_table(args.table, shape, rule), rule


def cmd_build_tables(args) -> int:
    from .optimizer import Model, OptimizerConfig, optimize

    cfg = OptimizerConfig(scale=args.s, d0=args.d0, seed=args.seed, sigma=args.sigma, sweeps=args.sweeps)
    shape, rule = _assets(args)
    t0 = time.time()
    model = Model(rule, cfg.scale, cfg.band)
    result = optimize(model, cfg)
    table = table_from_build(model, cfg, result.ranks)
    out = Path(args.out or f"polyrank_S{cfg.scale}.txt")
    paths = save_table(table, out, rule)
    print(f"classes\t{table.class_count}")
    print(f"segments\t{len(table.segments)}")
    print(f"k0\t{result.k0}")
    for k, v in result.timings.items():
        print(f"time_{k}\t{v:.1f}s")
    print(f"time_total\t{time.time() - t0:.1f}s")
    for p in paths:
        print(f"wrote\t{p}")
    return 0


def _provenance(table, offset) -> dict[str, str]:
    return {
        "polydither-table": table.digest(),
        "polydither-rulehash": table.rule_hash,
        "polydither-offset": f"{offset[0]},{offset[1]}",
    }


def cmd_dither(args) -> int:
    from .halftone import build_threshold_view, dither
    from .imageio import read_image, write_bilevel

    if not args.out:
        raise UsageError("--out is required")
    image = read_image(args.input)
    table, rule = _load(args)
    h, w = image.shape
    view = build_threshold_view(w, h, table, rule, args.offset)
    black = dither(image, view)
    write_bilevel(args.out, black, _provenance(table, args.offset))
    print(f"size\t{w}x{h}")
    print(f"black_fraction\t{black.mean():.6f}")
    print(f"wrote\t{args.out}")
    return 0


def cmd_ramp(args) -> int:
    from .halftone import build_threshold_view, dither_ramp
    from .imageio import write_bilevel
    from .plotting import plot_ramp

    table, rule = _load(args)
    view = build_threshold_view(args.width, args.height, table, rule, args.offset)
    black = dither_ramp(view)
    out = Path(args.out or "ramp.png")
    write_bilevel(out, black, _provenance(table, args.offset))
    fig = out.with_name(out.stem + "_figure.png")
    plot_ramp(black, fig)
    cols = black.sum(axis=0)
    print("column\tblack")
    for x in range(0, args.width, max(1, args.width // 16)):
        print(f"{x}\t{int(cols[x])}")
    print(f"monotone_columns\t{bool((np.diff(cols) <= 0).all())}")
    if args.width % 32 == 0:
        blocks = cols.reshape(-1, 32).sum(axis=1)
        print(f"monotone_blocks32\t{bool((np.diff(blocks) <= 0).all())}")
    print(f"black_fraction\t{black.mean():.6f}")
    print(f"wrote\t{out}\nwrote\t{fig}")
    return 0


def cmd_spectrum(args) -> int:
    from .analysis import tiling_patches
    from .plotting import plot_spectrum, save_power_png
    from .spectral import estimate_spectrum, low_frequency_energy_ratio, peak_statistics

    table, rule = _load(args)
    g = float(args.level)
    patches, offsets = tiling_patches(table, rule, g, args.patches, args.size, args.seed)
    spec = estimate_spectrum(patches, args.blur)
    out = Path(args.out or "spectrum")
    out.mkdir(parents=True, exist_ok=True)
    (out / "radial.txt").write_text(spec.table())
    save_power_png(spec, out / "power.png")
    plot_spectrum(spec, out / "spectrum_figure.png", f"level {g:.4f}")
    print(f"level\t{g:.6f}")
    print(f"offsets\t{' '.join(f'{x},{y}' for x, y in offsets)}")
    if 0 < g < 1 and spec.raw.sum() > 0:
        print(f"low_freq_ratio\t{low_frequency_energy_ratio(spec, g):.4f}")
        print(f"max_peak_contrast\t{peak_statistics(spec).max_contrast:.3f}")
    print(f"total_power\t{spec.raw.sum():.6g}")
    print(f"wrote\t{out / 'radial.txt'}\nwrote\t{out / 'power.png'}\nwrote\t{out / 'spectrum_figure.png'}")
    return 0


def cmd_compare(args) -> int:
    from .analysis import compare_methods
    from .plotting import plot_comparison

    table, rule = _load(args)
    g = float(args.level)
    if not 0 < g < 1:
        raise UsageError("--level must lie strictly between 0 and 1")
    comp = compare_methods(table, rule, g, args.seed, args.patches, args.size, args.vnc_size, args.sigma, args.blur)
    out = Path(args.out or "compare")
    out.mkdir(parents=True, exist_ok=True)
    report = "\n".join(comp.lines()) + "\n"
    (out / "report.tsv").write_text(report)
    for r in (comp.ours, comp.baseline, comp.white):
        (out / f"radial_{r.name}.txt").write_text(r.spectrum.table())
    plot_comparison([comp.ours, comp.baseline], out / "compare_figure.png", g)
    sys.stdout.write(report)
    print(f"wrote\t{out / 'report.tsv'}\nwrote\t{out / 'compare_figure.png'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed for every random stream")
    common.add_argument("--sigma", type=float, default=1.5, help="Gaussian sigma in pixels")
    common.add_argument("--table", help="rank table file")
    common.add_argument("--shape", help="shape asset (default: packaged G-hexomino)")
    common.add_argument("--rule", help="production rule asset (default: packaged 9^2-rep rule)")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="polydither", description="Blue-noise dithering on a polyomino tiling.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-tables", parents=[common], help="optimize and write a rank table")
    b.add_argument("--s", type=int, default=8, help="pixels per tile cell")
    b.add_argument("--d0", type=parse_fraction, default=Fraction(1, 8), help="starting density, fraction of pixels")
    b.add_argument("--sweeps", type=int, default=3, help="border initialization sweeps")
    b.set_defaults(func=cmd_build_tables)

    d = sub.add_parser("dither", parents=[common], help="dither a P5 PGM or PNG")
    d.add_argument("input")
    d.add_argument("--offset", type=parse_offset, default=(0, 0), help="x,y pixel offset into the structure")
    d.set_defaults(func=cmd_dither)

    r = sub.add_parser("ramp", parents=[common], help="dither a 0 to 1 ramp")
    r.add_argument("--width", type=int, default=512)
    r.add_argument("--height", type=int, default=64)
    r.add_argument("--offset", type=parse_offset, default=(0, 0))
    r.set_defaults(func=cmd_ramp)

    for name, func, help_ in (
        ("spectrum", cmd_spectrum, "power spectrum of a constant level"),
        ("compare", cmd_compare, "compare with a void-and-cluster matrix"),
    ):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--level", type=parse_fraction, default=Fraction(6, 256), help="gray level g in [0, 1]")
        s.add_argument("--patches", type=int, default=10)
        s.add_argument("--size", type=int, default=256)
        s.add_argument("--blur", type=float, default=1.5, help="display blur of the 2-D spectrum, in bins")
        if name == "compare":
            s.add_argument("--vnc-size", type=int, default=62)
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, AssetInvalid, NotRectifiable, TableInvalid, ImageFormatError) as exc:
        print(f"polydither: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("failure", exc_info=True)
        print(f"polydither: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
