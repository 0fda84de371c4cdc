"""Offline construction of the per-class rank tables.

Three stages, all driven from one seed:

1. border patterns: every border segment gets a dot pattern at density d0,
   relaxed with Lloyd against the segments already processed around it;
2. interior patterns: every class gets interior dots so that the tile holds
   exactly k0 dots, relaxed with all border dots held fixed;
3. ranking: from k0 down to 0 and from k0 up to 6 S^2, one dot per class and
   level, chosen by Gaussian-blurred dot density in the class's context.

Each class is evaluated inside a context: one subdivision of the
neighbourhood patch of a parent class, centred on the child of that class.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .dots import DotField, best_candidate_fill, lloyd_relax
from .polyomino import CellSet, ProductionRule, Tiling
from .structure import (
    ClassGeometry,
    Registry,
    build_index_production,
    classify_tiles,
    closed_registry,
    patch_from_signature,
    refine_patch,
)

log = logging.getLogger(__name__)

# named random streams, see ``stream``
BORDER_ORDER, BORDER_FILL, INTERIOR_FILL, DOWN_ORDER, UP_ORDER = range(1, 6)


class NonConvergence(UserWarning):
    """Border patterns were still changing when the sweep limit was reached."""


class RankingFailure(RuntimeError):
    """A class had no admissible pixel left at some density level."""


class InfeasibleDensity(ValueError):
    """d0 leaves a class with more border dots than k0 or too little interior room."""


@dataclass
class OptimizerConfig:
    scale: int = 8
    d0: Fraction = Fraction(1, 8)
    seed: int = 0
    sigma: float = 1.5
    sweeps: int = 3
    lloyd_iterations: int = 100
    margin: int = 12  # minimum pixels of context around the relaxed region (plus up to S-1 jitter)
    band: int = 2
    down_criterion: str = "max"  # withdraw the dot of maximum ("max") or minimum ("min") blur
    min_distance_factor: float = 0.7  # blue-noise proxy: min distance > factor / sqrt(d0)

    def __post_init__(self):
        self.d0 = Fraction(self.d0).limit_denominator(1 << 16)
        if self.scale < 2 * self.band:
            raise ValueError(f"S must be at least {2 * self.band}")
        if not 0 <= self.d0 <= 1:
            raise ValueError("d0 must lie in [0, 1]")
        if self.down_criterion not in ("max", "min"):
            raise ValueError("down_criterion must be 'max' or 'min'")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def radius(self) -> int:
        return int(math.ceil(3 * self.sigma))


def round_half_up(x) -> int:
    return int(math.floor(Fraction(x) + Fraction(1, 2)))


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a named sub-stream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=keys))


# ---------------------------------------------------------------------------
# class contexts
# ---------------------------------------------------------------------------


@dataclass
class Context:
    """A classified neighbourhood around one instance of a class."""

    cid: int
    tiling: Tiling
    classes: np.ndarray  # class id per tile, -1 if its ring is not covered
    centre: int

    def centre_box(self, scale: int) -> tuple[int, int, int, int]:
        """Pixel bounding box (x, y, w, h) of the centre tile."""
        o = self.tiling.orient[self.centre]
        bw, bh = self.tiling.shape.orientations.bbox[o]
        x, y = self.tiling.origin[self.centre]
        return int(x * scale), int(y * scale), int(bw * scale), int(bh * scale)


class Model:
    """Registry, pixel geometry and contexts shared by all optimization stages."""

    def __init__(self, rule: ProductionRule, scale: int, band: int = 2, registry: Registry | None = None):
        t0 = time.time()
        self.rule = rule
        self.shape: CellSet = rule.shape
        self.scale = scale
        if registry is None:
            registry, _ = closed_registry(rule)
        if registry.production is None:
            build_index_production(rule, registry)
        self.registry = registry
        self.geometry = ClassGeometry(registry, scale, band)
        self.P = self.geometry.geo.count
        M = len(registry)
        self.M = M
        # tile-local pixel index lookup stacked over orientations
        idx = self.geometry.geo.index
        hmax = max(g.shape[0] for g in idx)
        wmax = max(g.shape[1] for g in idx)
        self.local_index = np.full((8, hmax, wmax), -1, dtype=np.int64)
        for o, g in enumerate(idx):
            self.local_index[o, : g.shape[0], : g.shape[1]] = g

        # segment bookkeeping: global segment-pixel slots shared by all owners
        keys = self.geometry.segment_keys
        self.n_segments = len(keys)
        lengths = np.zeros(self.n_segments, dtype=np.int64)
        for k in keys:
            lengths[self.geometry.segment_index[k]] = len(self.geometry.segment_local(k))
        self.seg_offset = np.concatenate([[0], np.cumsum(lengths)])
        self.seg_slot = np.full((M, self.P), -1, dtype=np.int64)  # global slot per class pixel
        self.seg_of = np.full((M, self.P), -1, dtype=np.int64)
        owners: list[list[int]] = [[] for _ in range(self.n_segments)]
        self.class_segments: list[np.ndarray] = []
        for c in range(M):
            segs = []
            for cs in self.geometry.segments[c]:
                s = self.geometry.segment_index[cs.key]
                if c in owners[s]:
                    raise ValueError(f"class {c} owns segment {cs.key} twice")
                owners[s].append(c)
                segs.append(s)
                self.seg_of[c, cs.pixels] = s
                self.seg_slot[c, cs.pixels] = self.seg_offset[s] + np.arange(len(cs.pixels))
            self.class_segments.append(np.array(segs, dtype=np.int64))
        self.owners = [np.array(o, dtype=np.int64) for o in owners]
        # owner pixels of each segment, (n_owners, length), aligned by slot
        self.owner_pixels = []
        for s in range(self.n_segments):
            rows = []
            for c in self.owners[s]:
                sel = np.nonzero(self.seg_of[c] == s)[0]
                rows.append(sel[np.argsort(self.seg_slot[c, sel])])
            self.owner_pixels.append(np.array(rows, dtype=np.int64))
        self.interior_mask = self.seg_of < 0
        self.contexts = [self._context(c) for c in range(M)]
        log.info("model: %d classes, %d segments, %.1fs", M, self.n_segments, time.time() - t0)

    @property
    def n_slots(self) -> int:
        return int(self.seg_offset[-1])

    def _context(self, cid: int) -> Context:
        prod = self.registry.production
        hits = np.argwhere(prod == cid)
        p, j = (int(v) for v in hits[np.lexsort((hits[:, 1], hits[:, 0]))][0])
        tiling, _ = refine_patch(self.rule, patch_from_signature(self.shape, self.registry.signatures[p]))
        classes, _ = classify_tiles(tiling, self.registry)
        if classes[j] != cid:
            raise RuntimeError(f"context of class {cid} is inconsistent")
        return Context(cid, tiling, classes, j)

    def pixel_state(self, ctx: Context, box: tuple[int, int, int, int]) -> tuple[np.ndarray, np.ndarray]:
        """Tile index and flat state index (class * P + local) per pixel of ``box``; -1 if unknown."""
        S = self.scale
        x0, y0, w, h = box
        til = ctx.tiling
        wx, wy, ww, wh = til.window
        px = np.arange(x0, x0 + w)[None, :]
        py = np.arange(y0, y0 + h)[:, None]
        cx, cy = px // S - wx, py // S - wy
        inside = (cx >= 0) & (cx < ww) & (cy >= 0) & (cy < wh)
        tile = np.full((h, w), -1, dtype=np.int64)
        cxb, cyb = np.broadcast_to(cx, (h, w)), np.broadcast_to(cy, (h, w))
        tile[inside] = til.owner[cyb[inside], cxb[inside]]
        tile[tile < 0] = -1
        state = np.full((h, w), -1, dtype=np.int64)
        ok = tile >= 0
        t = tile[ok]
        lx = np.broadcast_to(px, (h, w))[ok] - til.origin[t, 0] * S
        ly = np.broadcast_to(py, (h, w))[ok] - til.origin[t, 1] * S
        local = self.local_index[til.orient[t], ly, lx]
        cls = ctx.classes[t]
        state[ok] = np.where(cls >= 0, cls * self.P + local, -1)
        tile[ok & (state < 0)] = -1
        return tile, state


# ---------------------------------------------------------------------------
# stage 1: border patterns
# ---------------------------------------------------------------------------


def k_zero(cfg: OptimizerConfig, P: int) -> int:
    return round_half_up(cfg.d0 * P)


def init_borders(model: Model, cfg: OptimizerConfig) -> np.ndarray:
    """Dot pattern for every segment slot (bool, length ``model.n_slots``)."""
    pattern = np.zeros(model.n_slots, dtype=bool)
    if cfg.d0 == 0 or model.n_segments == 0:
        return pattern
    processed = np.zeros(model.n_segments, dtype=bool)
    slot_seg = np.repeat(np.arange(model.n_segments), np.diff(model.seg_offset))
    flat_slot = model.seg_slot.reshape(-1)
    changed = True
    for sweep in range(cfg.sweeps):
        order = stream(cfg.seed, BORDER_ORDER, sweep).permutation(model.n_segments)
        changed = False
        t0 = time.time()
        for n, s in enumerate(order):
            new = _relax_segment(model, cfg, int(s), pattern, processed, slot_seg, flat_slot, sweep)
            lo, hi = model.seg_offset[s], model.seg_offset[s + 1]
            if processed[s] and not np.array_equal(new, pattern[lo:hi]):
                changed = True
            if not processed[s]:
                changed = True
            pattern[lo:hi] = new
            processed[s] = True
        log.info("border sweep %d: %.1fs, changed=%s", sweep, time.time() - t0, changed)
        if not changed:
            break
    if changed and cfg.sweeps > 1:
        warnings.warn(f"border patterns still changing after {cfg.sweeps} sweeps", NonConvergence, stacklevel=2)
    return pattern


def _relax_segment(model, cfg, s, pattern, processed, slot_seg, flat_slot, sweep) -> np.ndarray:
    S = model.scale
    c = int(model.owners[s][0])
    ctx = model.contexts[c]
    til = ctx.tiling
    pix = model.owner_pixels[s][0]
    o = til.orient[ctx.centre]
    gx, gy = til.origin[ctx.centre] * S
    xy = model.geometry.geo.pixels[o][pix] + (gx, gy)
    rng = stream(cfg.seed, BORDER_FILL, sweep, s)
    # jittered margins keep the window period from locking to the cell grid
    m = cfg.margin + rng.integers(0, model.scale, size=4)
    x0, y0 = xy.min(axis=0) - m[:2]
    x1, y1 = xy.max(axis=0) + m[2:] + 1
    box = (int(x0), int(y0), int(x1 - x0), int(y1 - y0))
    tile, state = model.pixel_state(ctx, box)
    h, w = state.shape
    slot = np.where(state >= 0, flat_slot[np.maximum(state, 0)], -1)
    seg = np.where(slot >= 0, slot_seg[np.maximum(slot, 0)], -1)
    centre = np.zeros((h, w), dtype=bool)
    centre[xy[:, 1] - y0, xy[:, 0] - x0] = True
    fixed_px = (seg >= 0) & processed[np.maximum(seg, 0)] & ~centre
    fixed_dots = fixed_px & pattern[np.maximum(slot, 0)]
    fy, fx = np.nonzero(fixed_dots)
    # the band gets its own quota so every segment carries round(d0 * length) dots
    target = round_half_up(cfg.d0 * h * w)
    n_band = round_half_up(cfg.d0 * len(xy))
    rest = ~fixed_px & ~centre
    n_rest = max(0, min(target - len(fx) - n_band, int(rest.sum())))
    region = np.where(fixed_px, -1, np.where(centre, 1, 0))
    fixed_xy = np.stack([fx, fy], axis=1)
    new_xy, labels = best_candidate_fill(w, h, fixed_xy, {0: n_rest, 1: n_band}, region, rng)
    dots = np.concatenate([fixed_xy, new_xy])
    is_fixed = np.arange(len(dots)) < len(fixed_xy)
    labels = np.concatenate([np.full(len(fixed_xy), -1), labels])
    field = lloyd_relax(DotField(w, h, dots, is_fixed), cfg.lloyd_iterations, region, labels)
    img = field.raster()
    return img[xy[:, 1] - y0, xy[:, 0] - x0]


# ---------------------------------------------------------------------------
# stage 2: interior patterns
# ---------------------------------------------------------------------------


def border_dot_counts(model: Model, pattern: np.ndarray) -> np.ndarray:
    counts = np.zeros(model.M, dtype=np.int64)
    for c in range(model.M):
        sl = model.seg_slot[c]
        counts[c] = pattern[sl[sl >= 0]].sum()
    return counts


def init_interiors(model: Model, cfg: OptimizerConfig, pattern: np.ndarray) -> np.ndarray:
    """Initial dot state (M, P) with exactly k0 dots per class."""
    P = model.P
    k0 = k_zero(cfg, P)
    bcount = border_dot_counts(model, pattern)
    n_int = model.interior_mask.sum(axis=1)
    need = k0 - bcount
    bad = np.nonzero((need < 0) | (need > n_int))[0]
    if len(bad):
        raise InfeasibleDensity(f"d0={cfg.d0}: {len(bad)} classes cannot hold exactly {k0} dots")
    state = np.zeros((model.M, P), dtype=bool)
    for c in range(model.M):
        sl = model.seg_slot[c]
        state[c, sl >= 0] = pattern[sl[sl >= 0]]
    if k0 == 0:
        return state
    flat_slot = model.seg_slot.reshape(-1)
    t0 = time.time()
    for c in range(model.M):
        interior = _relax_interior(model, cfg, c, pattern, flat_slot, need, n_int)
        state[c, interior] = True
    log.info("interiors: %.1fs", time.time() - t0)
    assert (state.sum(axis=1) == k0).all()
    return state


def _relax_interior(model, cfg, c, pattern, flat_slot, need, n_int) -> np.ndarray:
    ctx = model.contexts[c]
    rng = stream(cfg.seed, INTERIOR_FILL, c)
    m = cfg.margin + rng.integers(0, model.scale, size=4)
    bx, by, bw, bh = ctx.centre_box(model.scale)
    box = (int(bx - m[0]), int(by - m[1]), int(bw + m[0] + m[2]), int(bh + m[1] + m[3]))
    tile, state = model.pixel_state(ctx, box)
    h, w = state.shape
    known = state >= 0
    slot = np.where(known, flat_slot[np.maximum(state, 0)], -1)
    border = slot >= 0
    fy, fx = np.nonzero(border & pattern[np.maximum(slot, 0)])
    region = np.where(known & ~border, tile, -1)
    counts = {}
    for t in np.unique(tile[known]):
        cls = int(ctx.classes[t])
        visible = int((region == t).sum())
        counts[int(t)] = round_half_up(Fraction(int(need[cls]) * visible, int(n_int[cls])))
    fixed_xy = np.stack([fx, fy], axis=1)
    new_xy, labels = best_candidate_fill(w, h, fixed_xy, counts, region, rng)
    dots = np.concatenate([fixed_xy, new_xy])
    is_fixed = np.arange(len(dots)) < len(fixed_xy)
    dot_region = np.concatenate([np.full(len(fixed_xy), -1), labels])
    field = lloyd_relax(DotField(w, h, dots, is_fixed), cfg.lloyd_iterations, region, dot_region)
    sel = dot_region == ctx.centre
    xs, ys = field.dots[sel, 0], field.dots[sel, 1]
    local = state[ys, xs] - c * model.P
    return np.sort(local)


# ---------------------------------------------------------------------------
# stage 3: consecutive ranking
# ---------------------------------------------------------------------------


def pick_candidate(response: np.ndarray, candidates: np.ndarray, largest: bool) -> int:
    """Index of the best candidate; equal responses go to the smallest index.

    Responses are rounded to 1e-9 so that mirror-symmetric sums tie exactly.
    """
    cand = np.nonzero(candidates)[0]
    if not len(cand):
        return -1
    r = np.round(response[cand], 9)
    best = r.max() if largest else r.min()
    return int(cand[np.nonzero(r == best)[0][0]])


@dataclass
class RankState:
    """Dot state during ranking; ``dots`` is (M, P) and ``rank`` holds assigned ranks or -1."""

    dots: np.ndarray
    rank: np.ndarray
    level: int

    def copy(self) -> "RankState":
        return RankState(self.dots.copy(), self.rank.copy(), self.level)


class Ranker:
    """Gaussian response of a class's pixels inside its context."""

    def __init__(self, model: Model, cfg: OptimizerConfig):
        self.model = model
        self.cfg = cfg
        R = cfg.radius
        self.truncate = R / cfg.sigma
        self.windows = []
        self.centre_pos = []
        P = model.P
        for c, ctx in enumerate(model.contexts):
            bx, by, bw, bh = ctx.centre_box(model.scale)
            box = (bx - R, by - R, bw + 2 * R, bh + 2 * R)
            tile, state = model.pixel_state(ctx, box)
            if (state[tile >= 0] < 0).any():
                raise RuntimeError(f"class {c}: unclassified tile within the kernel radius")
            inner = state[R : R + bh, R : R + bw]
            mine = (inner >= c * P) & (inner < (c + 1) * P) & (tile[R : R + bh, R : R + bw] == ctx.centre)
            pos = np.full(P, -1, dtype=np.int64)
            ys, xs = np.nonzero(mine)
            pos[inner[ys, xs] - c * P] = (ys + R) * state.shape[1] + xs + R
            assert (pos >= 0).all()
            # unknown pixels (outside the seed) read the always-empty slot M*P
            self.windows.append(np.where(state >= 0, state, model.M * P))
            self.centre_pos.append(pos)

    def response(self, flat: np.ndarray, c: int) -> np.ndarray:
        win = flat[self.windows[c]].astype(np.float64)
        blurred = ndimage.gaussian_filter(win, self.cfg.sigma, truncate=self.truncate, mode="constant")
        return blurred.reshape(-1)[self.centre_pos[c]]


def rank_step(model: Model, ranker: Ranker, st: RankState, up: bool, order: np.ndarray, largest: bool) -> None:
    """Move every class from ``st.level`` dots to one more (``up``) or one fewer."""
    M, P = model.M, model.P
    flat = np.zeros(M * P + 1, dtype=bool)
    flat[: M * P] = st.dots.reshape(-1)
    dots = flat[: M * P].reshape(M, P)  # view shared with ``flat``
    new_rank = st.level if up else st.level - 1
    done = np.zeros(M, dtype=bool)
    blocked = np.zeros(model.n_segments + 1, dtype=bool)  # last entry: interior, never blocked
    seg_of = np.where(model.seg_of < 0, model.n_segments, model.seg_of)
    # classes that can only move on segment pixels go first
    avail = ~dots if up else dots
    urgent = ~(avail & model.interior_mask).any(axis=1)
    order = np.concatenate([order[urgent[order]], order[~urgent[order]]])
    for c in order:
        if done[c]:
            continue
        cand = (~dots[c] if up else dots[c]) & ~blocked[seg_of[c]]
        resp = ranker.response(flat, c)
        p = pick_candidate(resp, cand, largest)
        if p < 0:
            raise RankingFailure(f"class {c} has no admissible pixel at level {st.level}")
        s = model.seg_of[c, p]
        if s < 0:
            targets = [(c, p)]
        else:
            slot = model.seg_slot[c, p] - model.seg_offset[s]
            targets = [(int(d), int(px[slot])) for d, px in zip(model.owners[s], model.owner_pixels[s])]
        for d, q in targets:
            dots[d, q] = up
            st.rank[d, q] = new_rank
            done[d] = True
            blocked[model.class_segments[d]] = True
    st.dots = dots.copy()
    st.level = st.level + 1 if up else st.level - 1


def rank_down(model: Model, ranker: Ranker, st: RankState, cfg: OptimizerConfig) -> None:
    order = stream(cfg.seed, DOWN_ORDER, st.level).permutation(model.M)
    rank_step(model, ranker, st, False, order, cfg.down_criterion == "max")


def rank_up(model: Model, ranker: Ranker, st: RankState, cfg: OptimizerConfig) -> None:
    order = stream(cfg.seed, UP_ORDER, st.level).permutation(model.M)
    rank_step(model, ranker, st, True, order, False)


@dataclass
class BuildResult:
    ranks: np.ndarray  # (M, P)
    border_pattern: np.ndarray
    initial: np.ndarray  # (M, P) dot state at k0
    k0: int
    timings: dict = field(default_factory=dict)


def optimize(model: Model, cfg: OptimizerConfig) -> BuildResult:
    """Run the three stages and return per-class ranks."""
    timings = {}
    t = time.time()
    pattern = init_borders(model, cfg)
    timings["borders"] = time.time() - t
    t = time.time()
    initial = init_interiors(model, cfg, pattern)
    timings["interiors"] = time.time() - t
    k0 = int(initial[0].sum())
    ranker = Ranker(model, cfg)
    t = time.time()
    rank = np.full((model.M, model.P), -1, dtype=np.int64)
    st = RankState(initial.copy(), rank, k0)
    while st.level > 0:
        rank_down(model, ranker, st, cfg)
    st = RankState(initial.copy(), rank, k0)
    while st.level < model.P:
        rank_up(model, ranker, st, cfg)
    timings["ranking"] = time.time() - t
    log.info("ranking: %.1fs", timings["ranking"])
    return BuildResult(rank, pattern, initial, k0, timings)
