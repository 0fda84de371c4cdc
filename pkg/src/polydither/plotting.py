"""Figures for ramps and spectra (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .imageio import write_png_gray16  # noqa: E402
from .spectral import SpectrumEstimate  # noqa: E402


def log_power_image(spec: SpectrumEstimate) -> np.ndarray:
    """Display scaling: log1p(power / mean) normalised to [0, 1]; DC is zeroed."""
    p = spec.power.copy()
    c = spec.size // 2
    p[c, c] = 0.0
    m = p.mean()
    if m <= 0:
        return np.zeros_like(p)
    v = np.log1p(p / m)
    return v / v.max()


def save_power_png(spec: SpectrumEstimate, path: str | Path) -> None:
    write_png_gray16(path, log_power_image(spec))


def plot_ramp(black: np.ndarray, path: str | Path, title: str = "dither ramp 0 to 1") -> None:
    h, w = black.shape
    fig, ax = plt.subplots(figsize=(max(4, w / 100), max(1.5, h / 100 + 0.6)), dpi=100)
    ax.imshow(~black, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    ax.set_title(title)
    ax.set_xticks([0, w - 1], ["0", "1"])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _spectrum_axes(ax_img, ax_rad, spec: SpectrumEstimate, label: str) -> None:
    ext = [-0.5, 0.5, 0.5, -0.5]
    ax_img.imshow(log_power_image(spec), cmap="gray", extent=ext)
    ax_img.set_title(label)
    ax_img.set_xlabel("cycles/pixel")
    ax_rad.plot(spec.freqs, spec.radial / max(spec.radial.mean(), 1e-300), label=label)
    ax_rad.set_xlabel("radial frequency (cycles/pixel)")
    ax_rad.set_ylabel("power / mean")


def plot_spectrum(spec: SpectrumEstimate, path: str | Path, title: str = "") -> None:
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4.5))
    _spectrum_axes(a, b, spec, title or "power spectrum")
    b.plot(spec.freqs, spec.anisotropy, lw=0.8, color="gray", label="anisotropy")
    b.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_comparison(reports, path: str | Path, level: float) -> None:
    """Sample patch, 2-D spectrum and radial profile for each method report."""
    n = len(reports)
    fig, axes = plt.subplots(3, n, figsize=(4 * n, 11))
    axes = np.asarray(axes).reshape(3, n)
    for j, r in enumerate(reports):
        axes[0, j].imshow(~r.sample[:128, :128], cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        axes[0, j].set_title(f"{r.name}, level {level:.4f}")
        axes[0, j].axis("off")
        _spectrum_axes(axes[1, j], axes[2, j], r.spectrum, r.name)
        axes[2, j].set_title(f"low/high ratio {r.ratio:.3f}, peak {r.peaks.max_contrast:.2f}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
