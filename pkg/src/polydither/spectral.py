"""Power spectra of binary textures and the void-and-cluster baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass
class SpectrumEstimate:
    """Summed periodograms of equal square patches.

    ``power`` is DC-centred (fftshift) and blurred if requested; ``raw`` is the
    unblurred sum, used for every quantitative statistic.  Each periodogram is
    |DFT|^2 / size^2, so a patch contributes variance * size^2 in total.
    """

    size: int
    count: int
    raw: np.ndarray
    power: np.ndarray
    dc: float
    freqs: np.ndarray  # bin centres, cycles/pixel
    radial: np.ndarray  # mean raw power per bin
    bin_count: np.ndarray
    anisotropy: np.ndarray  # per-bin variance / mean^2 of raw power
    blur_sigma: float

    def table(self) -> str:
        """Plain-text export, one ``freq mean_power anisotropy`` line per bin."""
        lines = ["# freq mean_power anisotropy"]
        lines += [f"{f:.6f} {p:.9g} {a:.6g}" for f, p, a in zip(self.freqs, self.radial, self.anisotropy)]
        return "\n".join(lines) + "\n"


def frequency_radius(size: int) -> np.ndarray:
    """Radial frequency (cycles/pixel) of each DC-centred DFT bin."""
    f = np.fft.fftshift(np.fft.fftfreq(size))
    return np.hypot(f[None, :], f[:, None])


def radial_bins(size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bin index per centred DFT bin (-1 for DC), bin centres and edges.

    ``size // 2`` equal-width bins span (0, corner radius], so every non-DC
    frequency falls in exactly one bin.
    """
    nb = size // 2
    r = frequency_radius(size)
    rmax = r.max()
    edges = np.linspace(0.0, rmax, nb + 1)
    idx = np.clip(np.ceil(r / rmax * nb).astype(np.int64) - 1, 0, nb - 1)
    c = size // 2
    idx[c, c] = -1
    return idx, 0.5 * (edges[:-1] + edges[1:]), edges


def periodogram(patch: np.ndarray) -> np.ndarray:
    x = np.asarray(patch, dtype=np.float64)
    x = x - x.mean()
    return np.fft.fftshift(np.abs(np.fft.fft2(x)) ** 2) / x.size


def estimate_spectrum(patches, blur_sigma: float = 0.0) -> SpectrumEstimate:
    patches = [np.asarray(p) for p in patches]
    if not patches:
        raise ValueError("need at least one patch")
    size = patches[0].shape[0]
    for p in patches:
        if p.shape != (size, size):
            raise ValueError(f"patches must all be {size}x{size}, got {p.shape}")
    raw = np.zeros((size, size))
    for p in patches:  # fixed accumulation order
        raw += periodogram(p)
    c = size // 2
    dc = float(raw[c, c])
    power = ndimage.gaussian_filter(raw, blur_sigma, mode="wrap") if blur_sigma > 0 else raw.copy()
    idx, centres, _ = radial_bins(size)
    nb = len(centres)
    sel = idx >= 0
    cnt = np.bincount(idx[sel], minlength=nb)
    s1 = np.bincount(idx[sel], weights=raw[sel], minlength=nb)
    s2 = np.bincount(idx[sel], weights=raw[sel] ** 2, minlength=nb)
    mean = np.divide(s1, cnt, out=np.zeros(nb), where=cnt > 0)
    var = np.divide(s2, cnt, out=np.zeros(nb), where=cnt > 0) - mean**2
    aniso = np.divide(np.maximum(var, 0), mean**2, out=np.zeros(nb), where=mean > 0)
    return SpectrumEstimate(size, len(patches), raw, power, dc, centres, mean, cnt, aniso, blur_sigma)


def low_frequency_energy_ratio(spec: SpectrumEstimate, g: float) -> float:
    """Mean radial power below f_g / 2 over mean radial power in [f_g / 2, 0.5].

    f_g = sqrt(min(g, 1 - g)) is the principal frequency of a blue-noise
    texture at gray level ``g``.
    """
    if not 0 < g < 1:
        raise ValueError("g must lie strictly between 0 and 1")
    fg = np.sqrt(min(g, 1 - g))
    ok = spec.bin_count > 0
    low = ok & (spec.freqs < fg / 2)
    high = ok & (spec.freqs >= fg / 2) & (spec.freqs <= 0.5)
    if not low.any() or not high.any():
        raise ValueError(f"empty frequency band for g={g}")
    hi = spec.radial[high].mean()
    if hi == 0:
        raise ValueError("no power in the high band")
    return float(spec.radial[low].mean() / hi)


def peak_contrast(spec: SpectrumEstimate, sigma: float = 1.5, min_bin_count: int = 16) -> np.ndarray:
    """Blurred 2-D power divided by the mean blurred power of its radial bin.

    Blurring averages out the chi-square scatter of single periodogram bins so
    that only coherent spikes stand out.  Bins with fewer than
    ``min_bin_count`` members (the innermost annuli) and DC are set to 0.
    """
    blurred = ndimage.gaussian_filter(spec.raw, sigma, mode="wrap") if sigma > 0 else spec.raw
    idx, centres, _ = radial_bins(spec.size)
    nb = len(centres)
    sel = idx >= 0
    cnt = np.bincount(idx[sel], minlength=nb)
    mean = np.bincount(idx[sel], weights=blurred[sel], minlength=nb) / np.maximum(cnt, 1)
    ratio = np.zeros_like(blurred)
    good = sel & (cnt[np.maximum(idx, 0)] >= min_bin_count) & (mean[np.maximum(idx, 0)] > 0)
    ratio[good] = blurred[good] / mean[idx[good]]
    return ratio


def lattice_peak_contrast(spec: SpectrumEstimate, period: int, sigma: float = 1.5, reach: int = 1) -> float:
    """Largest peak contrast at non-DC multiples of 1/``period`` (within ``reach`` bins)."""
    ratio = peak_contrast(spec, sigma)
    n = spec.size
    c = n // 2
    best = 0.0
    for a in range(-(period // 2), period // 2 + 1):
        for b in range(-(period // 2), period // 2 + 1):
            if a == 0 and b == 0:
                continue
            fx, fy = a / period, b / period
            if abs(fx) > 0.5 or abs(fy) > 0.5:
                continue
            x, y = c + int(round(fx * n)), c + int(round(fy * n))
            win = ratio[max(0, y - reach) : y + reach + 1, max(0, x - reach) : x + reach + 1]
            if win.size:
                best = max(best, float(win.max()))
    return best


@dataclass
class PeakStats:
    max_contrast: float  # over all bins
    lattice_contrast: float | None  # at multiples of 1/period, when a period is given


def peak_statistics(spec: SpectrumEstimate, period: int | None = None, sigma: float = 1.5) -> PeakStats:
    ratio = peak_contrast(spec, sigma)
    lattice = lattice_peak_contrast(spec, period, sigma) if period else None
    return PeakStats(float(ratio.max()), lattice)


# ---------------------------------------------------------------------------
# void-and-cluster
# ---------------------------------------------------------------------------


def toroidal_gaussian(n: int, sigma: float) -> np.ndarray:
    """Gaussian of the toroidal distance to pixel (0, 0) on an n x n torus."""
    d = np.minimum(np.arange(n), n - np.arange(n)).astype(np.float64)
    g = np.exp(-(d**2) / (2 * sigma * sigma))
    return np.outer(g, g)


class _Energy:
    """Gaussian-filtered pattern on the torus, updated pixel by pixel."""

    def __init__(self, pattern: np.ndarray, sigma: float):
        self.n = pattern.shape[0]
        self.kernel = toroidal_gaussian(self.n, sigma)
        self.field = np.real(np.fft.ifft2(np.fft.fft2(pattern) * np.fft.fft2(self.kernel)))

    def toggle(self, y: int, x: int, sign: float) -> None:
        self.field += sign * np.roll(self.kernel, (y, x), axis=(0, 1))


def _argbest(values: np.ndarray, mask: np.ndarray, largest: bool) -> tuple[int, int]:
    v = np.where(mask, values, -np.inf if largest else np.inf)
    p = int(np.argmax(v) if largest else np.argmin(v))
    return divmod(p, values.shape[1])


def void_and_cluster_matrix(n: int = 62, d0: float = 0.1, sigma: float = 1.5, seed: int = 0) -> np.ndarray:
    """Threshold ranks (n x n permutation of 0..n^2-1) by the three-phase void-and-cluster method."""
    rng = np.random.default_rng(seed)
    N = n * n
    ones = max(1, int(round(d0 * N)))
    pattern = np.zeros((n, n), dtype=bool)
    pattern.flat[rng.choice(N, size=ones, replace=False)] = True
    # initial pattern: move the tightest cluster into the largest void until stable
    energy = _Energy(pattern.astype(float), sigma)
    for _ in range(10 * N):
        cy, cx = _argbest(energy.field, pattern, True)
        pattern[cy, cx] = False
        energy.toggle(cy, cx, -1)
        vy, vx = _argbest(energy.field, ~pattern, False)
        if (vy, vx) == (cy, cx):
            pattern[cy, cx] = True
            energy.toggle(cy, cx, 1)
            break
        pattern[vy, vx] = True
        energy.toggle(vy, vx, 1)
    ranks = np.full((n, n), -1, dtype=np.int64)
    # phase 1: remove tightest clusters
    work = pattern.copy()
    e = _Energy(work.astype(float), sigma)
    for r in range(ones - 1, -1, -1):
        y, x = _argbest(e.field, work, True)
        work[y, x] = False
        e.toggle(y, x, -1)
        ranks[y, x] = r
    # phases 2 and 3: fill largest voids; for the majority half this is the
    # same as placing zeros at the tightest clusters of zeros
    work = pattern.copy()
    e = _Energy(work.astype(float), sigma)
    for r in range(ones, N):
        y, x = _argbest(e.field, ~work, False)
        work[y, x] = True
        e.toggle(y, x, 1)
        ranks[y, x] = r
    assert np.array_equal(np.sort(ranks.reshape(-1)), np.arange(N))
    return ranks


def dither_matrix_patch(ranks: np.ndarray, g: float, size: int, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Black mask of a ``size`` x ``size`` patch of the tiled matrix at constant ``g``."""
    n = ranks.shape[0]
    ox, oy = offset
    ys = (np.arange(size) + oy) % n
    xs = (np.arange(size) + ox) % n
    thr = (ranks[ys[:, None], xs[None, :]] + 0.5) / ranks.size
    return g < thr
