"""Structural indices: vertex labels, border segments, neighbourhood classes.

A tile's class is keyed by its orientation plus, for every cell of its
Chebyshev-1 ring, the orientation and relative origin of the tile owning that
cell (or an OUTSIDE mark beyond the seed polyomino).  The ring contains every
tile touching the tile, so the key is equivalent to listing the neighbours,
and it fixes every vertex label and border segment on the tile's outline.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .polyomino import CellSet, ProductionRule, Tiling, raster_key, subdivide_window

log = logging.getLogger(__name__)

OUTSIDE = 8  # orientation code of the pseudo-neighbour beyond the seed polyomino
UNKNOWN = -2  # owner value for cells whose tile was not generated

# quadrants around a lattice point, and the corner of the quadrant cell it touches
# corners: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right
_QUADRANTS = ((-1, -1, 3), (0, -1, 2), (-1, 0, 1), (0, 0, 0))


class NonDeterministicProduction(RuntimeError):
    """Two tiles of one class subdivide into different child classes."""


class SegmentConflict(RuntimeError):
    """One segment label was seen with two different pixel footprints."""


def ring_offsets(shape: CellSet) -> list[np.ndarray]:
    """Cells within Chebyshev distance 1 of each oriented shape, excluding the shape."""
    out = []
    for cells in shape.orientations.cells:
        cs = set(cells)
        ring = {(x + dx, y + dy) for x, y in cs for dx in (-1, 0, 1) for dy in (-1, 0, 1)} - cs
        out.append(np.array(sorted(ring, key=raster_key), dtype=np.int64))
    return out


def tile_signatures(tiling: Tiling, tiles: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Signature rows (N, 1 + 3R) for ``tiles`` and a mask of those whose ring is fully known."""
    shape = tiling.shape
    rings = ring_offsets(shape)
    width = 1 + 3 * max(len(r) for r in rings)
    if tiles is None:
        tiles = np.arange(len(tiling))
    tiles = np.asarray(tiles, dtype=np.int64)
    rows = np.zeros((len(tiles), width), dtype=np.int8)
    valid = np.zeros(len(tiles), dtype=bool)
    wx, wy, ww, wh = tiling.window
    for o in shape.orientations.distinct:
        sel = np.nonzero(tiling.orient[tiles] == o)[0]
        if not len(sel):
            continue
        idx = tiles[sel]
        ring = rings[o]
        xs = tiling.origin[idx, 0][:, None] + ring[None, :, 0] - wx
        ys = tiling.origin[idx, 1][:, None] + ring[None, :, 1] - wy
        inside = ((xs >= 0) & (xs < ww) & (ys >= 0) & (ys < wh)).all(axis=1)
        own = np.full(xs.shape, UNKNOWN, dtype=np.int64)
        own[inside] = tiling.owner[ys[inside], xs[inside]]
        known = inside & (own != UNKNOWN).all(axis=1)
        out = own < 0
        safe = np.where(out, 0, own)
        oo = np.where(out, OUTSIDE, tiling.orient[safe])
        dv = tiling.origin[safe] - tiling.origin[idx][:, None, :]
        dv[out] = 0
        block = np.concatenate([oo[..., None], dv], axis=-1).reshape(len(idx), -1)
        rows[sel, 0] = o
        rows[sel, 1 : 1 + block.shape[1]] = block
        valid[sel] = known
    return rows, valid


def signature_hex(row: np.ndarray) -> str:
    return np.asarray(row, dtype=np.int8).tobytes().hex()


def _hex_to_row(sig: str) -> np.ndarray:
    return np.frombuffer(bytes.fromhex(sig), dtype=np.int8).astype(np.int64)


class Registry:
    """Sorted set of class signatures; a class id is its position in sorted order."""

    def __init__(self, shape: CellSet, signatures):
        self.shape = shape
        self.signatures: list[str] = sorted(set(signatures))
        self.index = {s: i for i, s in enumerate(self.signatures)}
        self.production: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.signatures)

    def __contains__(self, sig: str) -> bool:
        return sig in self.index

    def orientation(self, cid: int) -> int:
        return int(_hex_to_row(self.signatures[cid])[0])

    def is_boundary(self, cid: int) -> bool:
        row = _hex_to_row(self.signatures[cid])
        return bool((row[1::3] == OUTSIDE).any())

    def interior(self) -> "Registry":
        return Registry(self.shape, [s for i, s in enumerate(self.signatures) if not self.is_boundary(i)])

    def lookup(self, rows: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
        """Class ids for signature rows; -1 where unknown or not valid."""
        ids = np.full(len(rows), -1, dtype=np.int64)
        # hashing whole rows through bytes is much faster than np.unique(axis=0)
        keys = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
        uniq, inverse = np.unique(keys, return_inverse=True)
        uid = np.array([self.index.get(u.tobytes().hex(), -1) for u in uniq], dtype=np.int64)
        ids[:] = uid[inverse]
        if valid is not None:
            ids[~valid] = -1
        return ids

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.signatures).encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = [f"polyreg v1 shape={self.shape.name} classes={len(self)}"]
        lines += [f"id {i} signature {s}" for i, s in enumerate(self.signatures)]
        if self.production is not None:
            lines += [f"{i}: " + " ".join(str(int(c)) for c in row) for i, row in enumerate(self.production)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, shape: CellSet) -> "Registry":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("polyreg v1"):
            raise ValueError("not a polyreg v1 file")
        sigs, prod = [], []
        for ln in lines[1:]:
            if ln.startswith("id "):
                _, i, _, s = ln.split()
                if int(i) != len(sigs):
                    raise ValueError(f"registry ids out of order at {ln!r}")
                sigs.append(s)
            elif ":" in ln:
                prod.append([int(v) for v in ln.split(":", 1)[1].split()])
        reg = cls(shape, sigs)
        if reg.signatures != sigs:
            raise ValueError("registry signatures are not in canonical order")
        if prod:
            reg.production = np.array(prod, dtype=np.int64)
        return reg

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def classify_tiles(tiling: Tiling, registry: Registry | None = None, tiles=None) -> tuple[np.ndarray, Registry]:
    """Class id per tile (-1 where the ring is incomplete or the class is unregistered).

    Without a ``registry`` a fresh one is built from every classifiable tile.
    """
    rows, valid = tile_signatures(tiling, tiles)
    if registry is None:
        keys = rows[valid]
        uniq = np.unique(keys.view(np.dtype((np.void, keys.shape[1]))).ravel()) if len(keys) else []
        registry = Registry(tiling.shape, [u.tobytes().hex() for u in uniq])
    return registry.lookup(rows, valid), registry


# ---------------------------------------------------------------------------
# local patches and the index production table
# ---------------------------------------------------------------------------


@dataclass
class Patch:
    """A tile (index 0) with its ring neighbours, rebuilt from a signature."""

    orient: np.ndarray
    origin: np.ndarray
    outside: np.ndarray  # (K, 2) ring cells beyond the seed polyomino


def patch_from_signature(shape: CellSet, sig: str) -> Patch:
    row = _hex_to_row(sig)
    o = int(row[0])
    ring = ring_offsets(shape)[o]
    entries = row[1 : 1 + 3 * len(ring)].reshape(-1, 3)
    outside = ring[entries[:, 0] == OUTSIDE]
    nbrs = sorted({(int(e[0]), int(e[1]), int(e[2])) for e in entries if e[0] != OUTSIDE}, key=lambda e: (e[2], e[1], e[0]))
    orient = np.array([o] + [e[0] for e in nbrs], dtype=np.int64)
    origin = np.array([(0, 0)] + [(e[1], e[2]) for e in nbrs], dtype=np.int64)
    return Patch(orient, origin, outside)


def patch_tiling(shape: CellSet, patch: Patch, pad: int = 1) -> Tiling:
    """Owner grid for a patch; cells not covered by any patch tile are UNKNOWN."""
    shapes = shape.orientations
    lo = np.minimum(patch.origin.min(axis=0), patch.outside.min(axis=0) if len(patch.outside) else 0) - pad
    hi_t = (patch.origin + shapes.bbox[patch.orient]).max(axis=0)
    hi = np.maximum(hi_t, patch.outside.max(axis=0) + 1 if len(patch.outside) else hi_t) + pad
    window = (int(lo[0]), int(lo[1]), int(hi[0] - lo[0]), int(hi[1] - lo[1]))
    owner = np.full((window[3], window[2]), UNKNOWN, dtype=np.int64)
    for i, (o, v) in enumerate(zip(patch.orient, patch.origin)):
        c = shapes.cell_array[o] + v - lo
        owner[c[:, 1], c[:, 0]] = i
    if len(patch.outside):
        c = patch.outside - lo
        owner[c[:, 1], c[:, 0]] = -1
    return Tiling(shape, patch.orient.copy(), patch.origin.copy(), window, window, owner)


def refine_patch(rule: ProductionRule, patch: Patch) -> tuple[Tiling, np.ndarray]:
    """Subdivide every tile of a patch once; returns the child tiling and the centre's child indices."""
    from .polyomino import _children

    shape = rule.shape
    L = rule.linear_scale
    orient, origin = _children(patch.orient, patch.origin, rule)
    # the outside marks become L x L blocks
    outside = np.array(
        [(x * L + i, y * L + j) for x, y in patch.outside for i in range(L) for j in range(L)], dtype=np.int64
    ).reshape(-1, 2)
    child_patch = Patch(orient, origin, outside)
    tiling = patch_tiling(shape, child_patch, pad=1)
    centre = np.arange(rule.area_scale)
    return tiling, centre


def child_classes(rule: ProductionRule, sig: str) -> list[str]:
    """Signatures of the L^2 children of a class, in the rule's child order."""
    patch = patch_from_signature(rule.shape, sig)
    tiling, centre = refine_patch(rule, patch)
    rows, valid = tile_signatures(tiling, centre)
    if not valid.all():
        raise NonDeterministicProduction("child ring escapes the parent neighbourhood")
    return [signature_hex(r) for r in rows]


def build_index_production(rule: ProductionRule, registry: Registry) -> np.ndarray:
    """(M, L^2) child class ids; raises if a child class is outside the registry."""
    table = np.zeros((len(registry), rule.area_scale), dtype=np.int64)
    for cid, sig in enumerate(registry.signatures):
        kids = child_classes(rule, sig)
        for j, k in enumerate(kids):
            if k not in registry:
                raise NonDeterministicProduction(f"class {cid} produces unregistered child {k[:16]}...")
            table[cid, j] = registry.index[k]
    registry.production = table
    return table


def check_production_uniqueness(rule: ProductionRule, tiling: Tiling, registry: Registry, max_reps: int = 3) -> int:
    """Subdivide real instances of each class and compare child classes with the table.

    Returns the number of (class, representative) pairs checked.
    """
    ids, _ = classify_tiles(tiling, registry)
    checked = 0
    for cid in np.unique(ids[ids >= 0]):
        reps = np.nonzero(ids == cid)[0][:max_reps]
        for t in reps:
            o = int(tiling.orient[t])
            L = rule.linear_scale
            x, y = (int(v) for v in tiling.origin[t])
            bw, bh = rule.shape.orientations.bbox[o]
            # rebuild the neighbourhood at full resolution, one level finer
            window = ((x - 4) * L, (y - 4) * L, int((bw + 8) * L), int((bh + 8) * L))
            fine = _refine_window(rule, tiling, window)
            kids = np.nonzero(fine.parent == t)[0]
            kid_ids, _ = classify_tiles(fine, registry, kids)
            if registry.production is not None and not np.array_equal(kid_ids, registry.production[cid]):
                raise NonDeterministicProduction(f"class {cid}: representative {t} disagrees with table")
            checked += 1
    return checked


def _refine_window(rule: ProductionRule, tiling: Tiling, window) -> Tiling:
    from .polyomino import _children

    L = rule.linear_scale
    shapes = rule.shape.orientations
    wx, wy, ww, wh = window
    plo = tiling.origin * L
    phi = (tiling.origin + shapes.bbox[tiling.orient]) * L
    near = (phi[:, 0] > wx) & (plo[:, 0] < wx + ww) & (phi[:, 1] > wy) & (plo[:, 1] < wy + wh)
    parents = np.nonzero(near)[0]
    orient, origin = _children(tiling.orient[parents], tiling.origin[parents], rule)
    parent_of = np.repeat(parents, rule.area_scale)
    lo = origin
    hi = origin + shapes.bbox[orient]
    keep = (hi[:, 0] > wx) & (lo[:, 0] < wx + ww) & (hi[:, 1] > wy) & (lo[:, 1] < wy + wh)
    orient, origin = orient[keep], origin[keep]
    owner = np.full((wh, ww), UNKNOWN, dtype=np.int64)
    # parent cells that are outside the seed stay outside
    px0, py0, pw, ph = tiling.window
    ys, xs = np.mgrid[wy : wy + wh, wx : wx + ww]
    pxs, pys = xs // L - px0, ys // L - py0
    ok = (pxs >= 0) & (pxs < pw) & (pys >= 0) & (pys < ph)
    par = np.full(owner.shape, UNKNOWN)
    par[ok] = tiling.owner[pys[ok], pxs[ok]]
    owner[par == -1] = -1
    for o in shapes.distinct:
        idx = np.nonzero(orient == o)[0]
        c = shapes.cell_array[o]
        X = origin[idx, 0][:, None] + c[None, :, 0] - wx
        Y = origin[idx, 1][:, None] + c[None, :, 1] - wy
        inside = (X >= 0) & (X < ww) & (Y >= 0) & (Y < wh)
        owner[Y[inside], X[inside]] = np.broadcast_to(idx[:, None], X.shape)[inside]
    fine = Tiling(rule.shape, orient, origin, window, window, owner)
    fine.parent = parent_of[keep]
    return fine


def refine_region(rule: ProductionRule, tiling: Tiling, window) -> Tiling:
    """One level finer tiling restricted to ``window`` (finer cell units).

    The result carries ``parent``: the index in ``tiling`` of each child's parent.
    """
    return _refine_window(rule, tiling, window)


def class_sets_by_depth(rule: ProductionRule, max_depth: int, seed_orientation: int = 0) -> list[set[str]]:
    """Set of all class signatures present after d subdivisions of one seed, d = 0..max_depth."""
    shape = rule.shape
    seed = subdivide_window(rule, 0, seed_orientation, (0, 0))
    # give the seed a one-cell outside frame so its ring is known
    x0, y0, w, h = seed.window
    owner = np.full((h + 2, w + 2), -1, dtype=np.int64)
    owner[1:-1, 1:-1] = seed.owner
    framed = Tiling(shape, seed.orient, seed.origin, (x0 - 1, y0 - 1, w + 2, h + 2), seed.rect, owner)
    rows, valid = tile_signatures(framed)
    sets = [{signature_hex(rows[0])}]
    cache: dict[str, list[str]] = {}
    for _ in range(max_depth):
        nxt: set[str] = set()
        for sig in sets[-1]:
            if sig not in cache:
                cache[sig] = child_classes(rule, sig)
            nxt.update(cache[sig])
        sets.append(nxt)
    return sets


@dataclass
class Finiteness:
    """Per-depth counts of classes and segment labels seen while closing the registry."""

    classes: list[int]
    interior: list[int]
    segments: list[int]
    fixed_depth: int | None


def closed_registry(rule: ProductionRule, max_depth: int = 8, seed_orientation: int = 0) -> tuple[Registry, Finiteness]:
    """Registry of every interior class reachable from one seed, with finiteness statistics.

    Depths are expanded through the production of signatures until the
    interior class set is the same at two consecutive depths.
    """
    shape = rule.shape
    sets = class_sets_by_depth(rule, 1, seed_orientation)
    cache: dict[str, list[str]] = {}
    seg_cache: dict[str, set] = {}

    def interior(sigs):
        return {s for s in sigs if not (_hex_to_row(s)[1::3] == OUTSIDE).any()}

    def segment_keys(sigs):
        keys = set()
        for sig in sigs:
            if sig not in seg_cache:
                tiling = patch_tiling(shape, patch_from_signature(shape, sig), pad=1)
                seg_cache[sig] = {s.key for s in extract_segments(tiling, tiles=[0])}
            keys |= seg_cache[sig]
        return keys

    fixed = None
    while len(sets) <= max_depth:
        nxt: set[str] = set()
        for sig in sets[-1]:
            if sig not in cache:
                cache[sig] = child_classes(rule, sig)
            nxt.update(cache[sig])
        sets.append(nxt)
        if interior(nxt) == interior(sets[-2]) and len(nxt) == len(sets[-2]):
            fixed = len(sets) - 2
            break
    stats = Finiteness(
        classes=[len(s) for s in sets],
        interior=[len(interior(s)) for s in sets],
        segments=[len(segment_keys(s)) for s in sets],
        fixed_depth=fixed,
    )
    registry = Registry(shape, interior(sets[-1]))
    return registry, stats


# ---------------------------------------------------------------------------
# vertex labels and border segments
# ---------------------------------------------------------------------------

Mark = tuple[int, int, int]
VertexLabel = tuple[Mark, ...]


def _cell_index_grid(tiling: Tiling) -> np.ndarray:
    """Index of each window cell within its owner's oriented cell list (-1 if unowned)."""
    shapes = tiling.shape.orientations
    wx, wy, _, _ = tiling.window
    grid = np.full(tiling.owner.shape, -1, dtype=np.int64)
    for o in shapes.distinct:
        idx = np.nonzero(tiling.orient == o)[0]
        c = shapes.cell_array[o]
        X = tiling.origin[idx, 0][:, None] + c[None, :, 0] - wx
        Y = tiling.origin[idx, 1][:, None] + c[None, :, 1] - wy
        inside = (X >= 0) & (X < grid.shape[1]) & (Y >= 0) & (Y < grid.shape[0])
        grid[Y[inside], X[inside]] = np.broadcast_to(np.arange(len(c))[None, :], X.shape)[inside]
    return grid


def vertex_label_codes(tiling: Tiling) -> tuple[np.ndarray, np.ndarray]:
    """Encoded labels for all interior lattice points of the window.

    Returns ``(codes, touched)`` with codes of shape (H-1, W-1, 4, 3); a mark is
    (orientation, cell index, corner) or (-1, -1, corner) for an unowned cell.
    ``touched`` flags points with at least one owned cell and no unknown cell.
    """
    own = tiling.owner
    cidx = _cell_index_grid(tiling)
    h, w = own.shape
    codes = np.zeros((h - 1, w - 1, 4, 3), dtype=np.int64)
    touched = np.zeros((h - 1, w - 1), dtype=bool)
    unknown = np.zeros((h - 1, w - 1), dtype=bool)
    for q, (dx, dy, corner) in enumerate(_QUADRANTS):
        o = own[1 + dy : h + dy, 1 + dx : w + dx]
        ci = cidx[1 + dy : h + dy, 1 + dx : w + dx]
        owned = o >= 0
        codes[..., q, 0] = np.where(owned, tiling.orient[np.where(owned, o, 0)], -1)
        codes[..., q, 1] = np.where(owned, ci, -1)
        codes[..., q, 2] = corner
        touched |= owned
        unknown |= o == UNKNOWN
    return codes, touched & ~unknown


def label_vertices(tiling: Tiling) -> dict[tuple[int, int], VertexLabel]:
    """Canonical label of every lattice point touched by a tile (absolute coordinates)."""
    codes, ok = vertex_label_codes(tiling)
    wx, wy, _, _ = tiling.window
    out = {}
    for j, i in zip(*np.nonzero(ok)):
        marks = tuple(tuple(int(v) for v in m) for m in codes[j, i] if m[0] >= 0)
        out[(int(wx + i + 1), int(wy + j + 1))] = marks
    return out


@dataclass(frozen=True)
class Segment:
    """A maximal straight boundary run owned by the tile left of / above it."""

    axis: str  # "v" or "h"
    start: tuple[int, int]  # lattice point, top or left end
    length: int  # in cell edges
    owner: int  # tile index on the left / upper side
    other: int  # tile index on the right / lower side (-1 outside)
    label: tuple

    @cached_property
    def key(self) -> str:
        return hashlib.sha1(repr(self.label).encode()).hexdigest()[:16]


def _label_at(tiling: Tiling, cidx: np.ndarray, point: tuple[int, int]) -> VertexLabel:
    wx, wy, _, _ = tiling.window
    X, Y = point
    marks = []
    for dx, dy, corner in _QUADRANTS:
        o = int(tiling.owner[Y + dy - wy, X + dx - wx])
        if o >= 0:
            marks.append((int(tiling.orient[o]), int(cidx[Y + dy - wy, X + dx - wx]), corner))
        elif o == UNKNOWN:
            raise ValueError(f"vertex {point} touches an unknown cell")
    return tuple(marks)


def extract_segments(tiling: Tiling, tiles=None) -> list[Segment]:
    """Maximal boundary runs owned by ``tiles`` (default: all tiles whose ring is known)."""
    own = tiling.owner
    cidx = _cell_index_grid(tiling)
    wx, wy, ww, wh = tiling.window
    if tiles is None:
        _, valid = tile_signatures(tiling)
        tiles = np.nonzero(valid)[0]
    shapes = tiling.shape.orientations
    segs = []
    for t in tiles:
        t = int(t)
        cells = shapes.cell_array[tiling.orient[t]] + tiling.origin[t]
        cellset = {(int(x), int(y)) for x, y in cells}
        # vertical edges: tile on the left of line X; horizontal: tile above line Y
        vedges = sorted(((x + 1, y) for x, y in cellset if (x + 1, y) not in cellset), key=lambda e: (e[0], e[1]))
        hedges = sorted(((x, y + 1) for x, y in cellset if (x, y + 1) not in cellset), key=lambda e: (e[1], e[0]))
        for axis, edges in (("v", vedges), ("h", hedges)):
            runs = []
            for X, Y in edges:
                other = int(own[Y - wy, X - wx])
                if runs:
                    (sx, sy), n, ot = runs[-1]
                    if axis == "v" and X == sx and Y == sy + n and ot == other:
                        runs[-1] = ((sx, sy), n + 1, ot)
                        continue
                    if axis == "h" and Y == sy and X == sx + n and ot == other:
                        runs[-1] = ((sx, sy), n + 1, ot)
                        continue
                runs.append(((X, Y), 1, other))
            for (sx, sy), n, other in runs:
                if axis == "v":
                    start, end = (sx, sy), (sx, sy + n)
                else:
                    start, end = (sx, sy), (sx + n, sy)
                label = (axis, _label_at(tiling, cidx, start), _label_at(tiling, cidx, end))
                segs.append(Segment(axis, start, n, t, other, label))
    return segs


def segment_band(seg: Segment, scale: int, band: int = 2) -> set[tuple[int, int]]:
    """Absolute pixels in the band left of / above a segment, before corner resolution."""
    X, Y = seg.start
    if seg.axis == "v":
        return {(X * scale - 1 - k, y) for k in range(band) for y in range(Y * scale, (Y + seg.length) * scale)}
    return {(x, Y * scale - 1 - k) for k in range(band) for x in range(X * scale, (X + seg.length) * scale)}


def segment_pixels(segs: list[Segment], scale: int, band: int = 2) -> dict[int, list[tuple[int, int]]]:
    """Band pixels per segment (index into ``segs``); corner overlaps go to the vertical run."""
    vertical: set[tuple[int, int]] = set()
    out: dict[int, list] = {}
    for i, s in enumerate(segs):
        if s.axis == "v":
            px = segment_band(s, scale, band)
            vertical |= px
            out[i] = sorted(px, key=raster_key)
    for i, s in enumerate(segs):
        if s.axis == "h":
            out[i] = sorted(segment_band(s, scale, band) - vertical, key=raster_key)
    return out


# ---------------------------------------------------------------------------
# pixel geometry of oriented tiles
# ---------------------------------------------------------------------------


class PixelGeometry:
    """Tile-local pixel layout at S pixels per cell.

    Pixels of an oriented tile are indexed in raster (y, x) order over the
    tile's bounding box; ``index[o]`` maps (py, px) to that index or -1.
    """

    def __init__(self, shape: CellSet, scale: int):
        self.shape = shape
        self.scale = scale
        shapes = shape.orientations
        self.count = len(shape) * scale * scale
        self.pixels: list[np.ndarray] = []
        self.index: list[np.ndarray] = []
        for o in range(8):
            bw, bh = shapes.bbox[o]
            grid = np.full((bh * scale, bw * scale), -1, dtype=np.int64)
            mask = np.zeros_like(grid, dtype=bool)
            for x, y in shapes[o]:
                mask[y * scale : (y + 1) * scale, x * scale : (x + 1) * scale] = True
            ys, xs = np.nonzero(mask)
            grid[ys, xs] = np.arange(len(ys))
            self.pixels.append(np.stack([xs, ys], axis=1))
            self.index.append(grid)


@dataclass
class BorderMask:
    orientation: int
    scale: int
    border: np.ndarray  # sorted tile-local pixel indices in the band
    interior: np.ndarray


def border_mask(orientation: int, shape: CellSet, scale: int, band: int = 2) -> BorderMask:
    """Pixels within ``band`` of the tile's right- or bottom-facing outline edges."""
    if scale < 2 * band:
        raise ValueError(f"scale {scale} too small for a {band}-pixel band")
    geo = PixelGeometry(shape, scale)
    cells = set(shape.orientations[orientation])
    mask = np.zeros(geo.index[orientation].shape, dtype=bool)
    for x, y in cells:
        if (x + 1, y) not in cells:
            mask[y * scale : (y + 1) * scale, (x + 1) * scale - band : (x + 1) * scale] = True
        if (x, y + 1) not in cells:
            mask[(y + 1) * scale - band : (y + 1) * scale, x * scale : (x + 1) * scale] = True
    idx = geo.index[orientation]
    border = np.sort(idx[mask & (idx >= 0)])
    interior = np.setdiff1d(np.arange(geo.count), border)
    return BorderMask(orientation, scale, border, interior)


@dataclass
class ClassSegment:
    key: str
    label: tuple
    pixels: np.ndarray  # tile-local pixel indices, in segment-local raster order
    local: np.ndarray  # (n, 2) pixel coords relative to the segment start point


class ClassGeometry:
    """Owned border segments and interior pixels for every class of a registry."""

    def __init__(self, registry: Registry, scale: int, band: int = 2):
        self.registry = registry
        self.scale = scale
        self.geo = PixelGeometry(registry.shape, scale)
        self.segments: list[list[ClassSegment]] = []
        self.interior: list[np.ndarray] = []
        self.segment_keys: list[str] = []
        self._footprint: dict[str, tuple] = {}
        for cid, sig in enumerate(registry.signatures):
            self._add_class(cid, sig, band)
        self.segment_keys = sorted(self._footprint)
        self.segment_index = {k: i for i, k in enumerate(self.segment_keys)}

    def _add_class(self, cid: int, sig: str, band: int) -> None:
        shape = self.registry.shape
        patch = patch_from_signature(shape, sig)
        tiling = patch_tiling(shape, patch, pad=1)
        segs = extract_segments(tiling, tiles=[0])
        pix = segment_pixels(segs, self.scale, band)
        o = int(patch.orient[0])
        grid = self.geo.index[o]
        entries = []
        used = []
        for i, s in enumerate(segs):
            p = np.array(pix[i], dtype=np.int64).reshape(-1, 2)
            local_idx = grid[p[:, 1], p[:, 0]]  # tile origin is (0, 0) in the patch
            rel = p - np.array(s.start) * self.scale
            foot = (o, tuple(map(tuple, rel.tolist())), tuple(local_idx.tolist()), s.start)
            prev = self._footprint.setdefault(s.key, foot)
            if prev[:3] != foot[:3]:
                raise SegmentConflict(f"segment {s.key} has two footprints")
            entries.append(ClassSegment(s.key, s.label, local_idx, rel))
            used.append(local_idx)
        self.segments.append(entries)
        border = np.concatenate(used) if used else np.zeros(0, dtype=np.int64)
        if len(np.unique(border)) != len(border):
            raise SegmentConflict(f"class {cid}: overlapping segment bands")
        self.interior.append(np.setdiff1d(np.arange(self.geo.count), border))

    def border(self, cid: int) -> np.ndarray:
        segs = self.segments[cid]
        return np.sort(np.concatenate([s.pixels for s in segs])) if segs else np.zeros(0, dtype=np.int64)

    def segment_local(self, key: str) -> np.ndarray:
        return np.array(self._footprint[key][1], dtype=np.int64)
