"""Binary dot fields on a torus and Lloyd relaxation snapped to the pixel grid."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree


@dataclass
class DotField:
    """Dots on a ``width`` x ``height`` torus; fixed dots never move."""

    width: int
    height: int
    dots: np.ndarray  # (K, 2) integer (x, y)
    fixed: np.ndarray  # (K,) bool

    def __post_init__(self):
        self.dots = np.asarray(self.dots, dtype=np.int64).reshape(-1, 2)
        self.fixed = np.asarray(self.fixed, dtype=bool).reshape(-1)
        if len(self.fixed) != len(self.dots):
            raise ValueError("status must be given for every dot")
        if len(self.dots) and (
            (self.dots[:, 0] < 0).any()
            or (self.dots[:, 0] >= self.width).any()
            or (self.dots[:, 1] < 0).any()
            or (self.dots[:, 1] >= self.height).any()
        ):
            raise ValueError("dots must lie inside the field")

    def __len__(self) -> int:
        return len(self.dots)

    @classmethod
    def random(cls, width: int, height: int, count: int, rng: np.random.Generator) -> "DotField":
        flat = rng.choice(width * height, size=count, replace=False)
        return cls(width, height, np.stack([flat % width, flat // width], axis=1), np.zeros(count, dtype=bool))

    def raster(self) -> np.ndarray:
        img = np.zeros((self.height, self.width), dtype=bool)
        img[self.dots[:, 1], self.dots[:, 0]] = True
        return img


def toroidal_min_distance(dots: np.ndarray, width: int, height: int) -> float:
    """Smallest pairwise distance between dots on the torus."""
    if len(dots) < 2:
        return float("inf")
    tree = cKDTree(np.asarray(dots, dtype=float), boxsize=(width, height))
    d, _ = tree.query(np.asarray(dots, dtype=float), k=2)
    return float(d[:, 1].min())


def _pad_width(width: int, height: int, count: int, ss: int) -> int:
    # generous bound on the distance from any sample to its nearest site
    spacing = np.sqrt(width * height / max(count, 1))
    return int(min(max(width, height), np.ceil(4 * spacing) + 2) * ss)


def voronoi_samples(sites: np.ndarray, width: int, height: int, ss: int) -> np.ndarray:
    """Owner site of each sample of the ``ss``-times supersampled torus grid.

    Sample (i, j) sits at pixel position ((j + 0.5)/ss - 0.5, (i + 0.5)/ss - 0.5).
    Sites are quantized to their nearest sample; when two sites share a
    sample the later one wins and the other owns nothing this round.
    """
    Hs, Ws = height * ss, width * ss
    q = np.floor((np.mod(sites, (width, height)) + 0.5) * ss).astype(np.int64)
    q[:, 0] %= Ws
    q[:, 1] %= Hs
    grid = np.full((Hs, Ws), -1, dtype=np.int64)
    grid[q[:, 1], q[:, 0]] = np.arange(len(sites))
    pad = _pad_width(width, height, len(sites), ss)
    padded = np.pad(grid, pad, mode="wrap")
    iy, ix = ndimage.distance_transform_edt(padded < 0, return_distances=False, return_indices=True)
    return padded[iy[pad:pad + Hs, pad:pad + Ws], ix[pad:pad + Hs, pad:pad + Ws]]


def lloyd_relax(
    field: DotField,
    iterations: int = 100,
    region: np.ndarray | None = None,
    dot_region: np.ndarray | None = None,
    tolerance: float = 0.01,
    supersample: int = 4,
) -> DotField:
    """Move floating dots to the centroids of their toroidal Voronoi cells.

    Cells are measured on a ``supersample``-times finer grid and sites move
    continuously; they are snapped to free pixels once at the end.  Cells of a
    few whole pixels make every pixel centre a fixed point, so snapping each
    step freezes clumps in place.  With ``region`` (H, W int labels) and
    ``dot_region`` (K,), a floating dot whose centroid leaves its own label is
    projected back onto the nearest pixel with that label.  Centroids use the
    whole cell: clipping cells at region borders pulls dots away from every
    border and stacks them in rows parallel to it.  Stops after
    ``iterations`` or once no site moves by more than ``tolerance`` pixels.
    """
    W, H = field.width, field.height
    if len(field.dots) == 0:
        return replace(field)
    floating = ~field.fixed
    constrained = region is not None
    if region is None:
        region = np.zeros((H, W), dtype=np.int64)
        dot_region = np.zeros(len(field.dots), dtype=np.int64)
    region = np.asarray(region)
    dot_region = np.asarray(dot_region)
    region_flat = region.reshape(-1)
    K = len(field.dots)
    sites = field.dots.astype(float)
    ss = supersample
    if floating.any() and iterations > 0:
        o = (np.arange(ss) + 0.5) / ss - 0.5
        px = np.broadcast_to((np.arange(W)[:, None] + o[None, :]).reshape(-1)[None, :], (H * ss, W * ss)).reshape(-1)
        py = np.broadcast_to((np.arange(H)[:, None] + o[None, :]).reshape(-1)[:, None], (H * ss, W * ss)).reshape(-1)
        for _ in range(iterations):
            owner = voronoi_samples(sites, W, H, ss).reshape(-1)
            ok = floating[owner]
            own = owner[ok]
            dx = _wrap_f(px[ok] - sites[own, 0], W)
            dy = _wrap_f(py[ok] - sites[own, 1], H)
            cnt = np.bincount(own, minlength=K)
            has = cnt > 0
            shift = np.zeros_like(sites)
            shift[has, 0] = np.bincount(own, weights=dx, minlength=K)[has] / cnt[has]
            shift[has, 1] = np.bincount(own, weights=dy, minlength=K)[has] / cnt[has]
            shift[~floating] = 0.0
            new = np.mod(sites + shift, (W, H))
            if constrained:
                new = _project(new, floating, region_flat, dot_region, W, H)
            moved = np.abs(_wrap_f(new - sites, np.array([W, H]))).max()
            sites = new
            if moved <= tolerance:
                break
    dots = _snap(sites, field, region_flat, dot_region)
    return replace(field, dots=dots, fixed=field.fixed.copy())


_OFFSETS = np.array([(i, j) for j in range(-3, 4) for i in range(-3, 4)])


def _project(sites: np.ndarray, floating: np.ndarray, region_flat: np.ndarray, dot_region: np.ndarray, W: int, H: int):
    """Pull floating sites that sit on a foreign-label pixel onto the nearest own-label pixel."""
    pix = np.round(sites).astype(np.int64) % (W, H)
    bad = np.nonzero(floating & (region_flat[pix[:, 1] * W + pix[:, 0]] != dot_region))[0]
    if not len(bad):
        return sites
    s = sites[bad]
    cand = (pix[bad][:, None, :] + _OFFSETS[None, :, :]) % (W, H)
    ex = _wrap_f(cand[..., 0] - s[:, None, 0], W)
    ey = _wrap_f(cand[..., 1] - s[:, None, 1], H)
    d = np.round(ex * ex + ey * ey, 9)
    d = np.where(region_flat[cand[..., 1] * W + cand[..., 0]] == dot_region[bad][:, None], d, np.inf)
    j = np.argmin(d, axis=1)
    found = np.isfinite(d[np.arange(len(bad)), j])
    out = sites.copy()
    # nearest point of the chosen pixel's square (kept strictly inside so it rounds back to it)
    cx = s[:, 0] + ex[np.arange(len(bad)), j]
    cy = s[:, 1] + ey[np.arange(len(bad)), j]
    lim = 0.49
    nx = np.clip(s[:, 0], cx - lim, cx + lim)
    ny = np.clip(s[:, 1], cy - lim, cy + lim)
    out[bad[found], 0] = np.mod(nx[found], W)
    out[bad[found], 1] = np.mod(ny[found], H)
    return out


def _wrap_f(d: np.ndarray, period: int) -> np.ndarray:
    return (d + period / 2) % period - period / 2


def _snap(sites: np.ndarray, field: DotField, region_flat: np.ndarray, dot_region: np.ndarray) -> np.ndarray:
    """Round floating sites onto distinct admissible pixels.

    Sites closest to a pixel go first.  Each takes the nearest admissible
    pixel that does not touch an already placed dot (8-neighbourhood), else
    the nearest free one.
    """
    W, H = field.width, field.height
    dots = field.dots.copy()
    floating = np.nonzero(~field.fixed)[0]
    if len(floating) == 0:
        return dots
    taken = np.zeros((H, W), dtype=bool)
    near = np.zeros((H, W), dtype=bool)

    def occupy(x: int, y: int) -> None:
        taken[y, x] = True
        near[(y + np.arange(-1, 2))[:, None] % H, (x + np.arange(-1, 2))[None, :] % W] = True

    for x, y in dots[field.fixed]:
        occupy(x, y)
    r = 3
    offs = np.array([(i, j) for j in range(-r, r + 1) for i in range(-r, r + 1)])
    fl = sites[floating]
    cand = (np.round(fl).astype(np.int64)[:, None, :] + offs[None, :, :]) % (W, H)
    ex = _wrap_f(cand[..., 0] - fl[:, None, 0], W)
    ey = _wrap_f(cand[..., 1] - fl[:, None, 1], H)
    dist = np.round(ex * ex + ey * ey, 9)
    admissible = region_flat[cand[..., 1] * W + cand[..., 0]] == dot_region[floating][:, None]
    dist = np.where(admissible, dist, np.inf)
    ranked = np.argsort(dist, axis=1, kind="stable")
    order = np.lexsort((floating, dist.min(axis=1)))
    for i in order:
        choice = None
        for blocked in (near, taken):
            for j in ranked[i]:
                if not np.isfinite(dist[i, j]):
                    break
                x, y = cand[i, j]
                if not blocked[y, x]:
                    choice = (x, y)
                    break
            if choice is not None:
                break
        if choice is None:
            # nearest free admissible pixel anywhere
            free = np.nonzero(~taken.reshape(-1) & (region_flat == dot_region[floating[i]]))[0]
            fy, fx = np.divmod(free, W)
            d = np.round(_wrap_f(fx - fl[i, 0], W) ** 2 + _wrap_f(fy - fl[i, 1], H) ** 2, 9)
            p = free[np.lexsort((free, d))[0]]
            choice = (p % W, p // W)
        occupy(*choice)
        dots[floating[i]] = choice
    return dots


def best_candidate_fill(
    width: int,
    height: int,
    occupied: np.ndarray,
    counts: dict,
    region: np.ndarray,
    rng: np.random.Generator,
    candidates: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Place ``counts[label]`` new dots inside each ``region`` label, one at a time.

    Each new dot is the best of ``candidates`` random free pixels of its label:
    the one farthest (toroidally) from all dots so far.  Labels are visited
    round-robin so no label fills up first.  Returns (dots, labels).
    """
    W, H = width, height
    ys, xs = np.divmod(np.arange(W * H), W)
    region_flat = np.asarray(region).reshape(-1)
    dist = np.full(W * H, np.inf)
    free = np.ones(W * H, dtype=bool)

    def add(p: int) -> None:
        dx = np.abs(xs - xs[p])
        dy = np.abs(ys - ys[p])
        np.minimum(dist, np.minimum(dx, W - dx) ** 2 + np.minimum(dy, H - dy) ** 2, out=dist)
        free[p] = False

    for x, y in np.asarray(occupied, dtype=np.int64).reshape(-1, 2):
        add(y * W + x)
    pools = {lab: np.nonzero(region_flat == lab)[0] for lab in sorted(counts)}
    left = {lab: int(c) for lab, c in counts.items() if c > 0}
    out, labels = [], []
    while left:
        for lab in sorted(left):
            pool = pools[lab][free[pools[lab]]]
            if not len(pool):
                raise ValueError(f"region {lab} has no room for more dots")
            cand = rng.choice(pool, size=min(candidates, len(pool)), replace=False)
            p = int(cand[np.argmax(dist[cand])])
            add(p)
            out.append((xs[p], ys[p]))
            labels.append(lab)
            left[lab] -= 1
            if left[lab] == 0:
                del left[lab]
    return np.array(out, dtype=np.int64).reshape(-1, 2), np.array(labels, dtype=np.int64)

