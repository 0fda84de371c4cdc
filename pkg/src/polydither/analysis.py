"""Sampling dithered patches and comparing our textures with the square-matrix baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .halftone import build_threshold_view, dither
from .polyomino import ProductionRule
from .ranktable import RankTable
from .spectral import (
    PeakStats,
    SpectrumEstimate,
    dither_matrix_patch,
    estimate_spectrum,
    low_frequency_energy_ratio,
    peak_statistics,
    void_and_cluster_matrix,
)

# sub-streams of the CLI seed
OFFSETS, WHITE, VNC_INIT, VNC_OFFSETS = range(11, 15)
MAX_OFFSET = 2048


def sub_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def tiling_patches(table: RankTable, rule: ProductionRule, g: float, count: int = 10, size: int = 256, seed: int = 0):
    """Constant-``g`` patches of our threshold structure at seeded random pixel offsets."""
    rng = sub_rng(seed, OFFSETS)
    offsets = rng.integers(0, MAX_OFFSET, size=(count, 2))
    img = np.full((size, size), g)
    out = []
    for ox, oy in offsets:
        view = build_threshold_view(size, size, table, rule, (int(ox), int(oy)))
        out.append(dither(img, view))
    return out, [tuple(int(v) for v in o) for o in offsets]


def white_noise_patches(g: float, count: int = 10, size: int = 256, seed: int = 0):
    rng = sub_rng(seed, WHITE)
    return [rng.random((size, size)) >= g for _ in range(count)]


def matrix_patches(ranks: np.ndarray, g: float, count: int = 10, size: int = 256, seed: int = 0):
    rng = sub_rng(seed, VNC_OFFSETS)
    n = ranks.shape[0]
    return [dither_matrix_patch(ranks, g, size, tuple(int(v) for v in rng.integers(0, n, 2))) for _ in range(count)]


@dataclass
class MethodReport:
    name: str
    ratio: float
    peaks: PeakStats
    spectrum: SpectrumEstimate
    sample: np.ndarray


@dataclass
class Comparison:
    level: float
    ours: MethodReport
    baseline: MethodReport
    white: MethodReport
    vnc_size: int

    def lines(self) -> list[str]:
        out = [f"# level {self.level:.6f} patches {self.ours.spectrum.count}x{self.ours.spectrum.size}"]
        out.append("method\tlow_freq_ratio\tmax_peak_contrast\tlattice_peak_contrast")
        for r in (self.ours, self.baseline, self.white):
            lat = "-" if r.peaks.lattice_contrast is None else f"{r.peaks.lattice_contrast:.3f}"
            out.append(f"{r.name}\t{r.ratio:.4f}\t{r.peaks.max_contrast:.3f}\t{lat}")
        return out


def compare_methods(
    table: RankTable,
    rule: ProductionRule,
    g: float,
    seed: int = 0,
    count: int = 10,
    size: int = 256,
    vnc_size: int = 62,
    sigma: float = 1.5,
    blur: float = 1.5,
) -> Comparison:
    """Spectral statistics of our method, a void-and-cluster matrix and white noise at level ``g``."""
    reports = []
    ours, _ = tiling_patches(table, rule, g, count, size, seed)
    ranks = void_and_cluster_matrix(vnc_size, 0.1, sigma, int(sub_rng(seed, VNC_INIT).integers(1 << 31)))
    base = matrix_patches(ranks, g, count, size, seed)
    white = white_noise_patches(g, count, size, seed)
    for name, patches, period in (("ours", ours, None), ("void-and-cluster", base, vnc_size), ("white-noise", white, None)):
        spec = estimate_spectrum(patches, blur)
        # the peak statistic also runs on the baseline lattice for every method
        stats = peak_statistics(spec, period or vnc_size)
        reports.append(MethodReport(name, low_frequency_energy_ratio(spec, g), stats, spec, patches[0]))
    return Comparison(g, reports[0], reports[1], reports[2], vnc_size)
