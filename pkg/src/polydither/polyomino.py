"""Polyomino shapes, dihedral transforms, exact-cover rectification and L^2-rep subdivision.

Cells are integer pairs ``(x, y)`` naming the unit square ``[x, x+1] x [y, y+1]``;
``y`` grows downward like image rows.  An orientation is one of the eight
elements of the dihedral group, indexed ``4 * mirrored + rotation``.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Cell = tuple[int, int]


class AssetInvalid(ValueError):
    """A shape or rule asset failed verification."""


class NotRectifiable(ValueError):
    """No L^2-rep decomposition exists for the requested shape and scale."""


class RuleMismatch(ValueError):
    """A production rule was applied to a tile of a different shape."""


def _orientation_matrix(index: int) -> np.ndarray:
    rotation, mirrored = index % 4, index // 4
    m = np.array([[-1, 0], [0, 1]]) if mirrored else np.eye(2, dtype=int)
    r = np.array([[0, -1], [1, 0]])
    return np.linalg.matrix_power(r, rotation) @ m


ORIENTATION_MATRICES = [_orientation_matrix(i) for i in range(8)]


def _build_compose() -> np.ndarray:
    table = np.zeros((8, 8), dtype=np.int64)
    for a in range(8):
        for b in range(8):
            prod = ORIENTATION_MATRICES[a] @ ORIENTATION_MATRICES[b]
            table[a, b] = next(i for i in range(8) if np.array_equal(ORIENTATION_MATRICES[i], prod))
    return table


# COMPOSE[a, b] is the orientation of "apply b, then a".
COMPOSE = _build_compose()


def transform_cells(cells: Iterable[Cell], orientation: int) -> list[Cell]:
    """Apply an orientation to unit squares (about the origin, no normalization)."""
    m = ORIENTATION_MATRICES[orientation]
    out = []
    for x, y in cells:
        # work on doubled cell centres so squares map to squares exactly
        cx, cy = m @ (2 * x + 1, 2 * y + 1)
        out.append(((int(cx) - 1) // 2, (int(cy) - 1) // 2))
    return out


def normalize(cells: Iterable[Cell]) -> frozenset[Cell]:
    cells = list(cells)
    mx = min(x for x, _ in cells)
    my = min(y for _, y in cells)
    return frozenset((x - mx, y - my) for x, y in cells)


def _is_connected(cells: frozenset[Cell]) -> bool:
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(cells)


def raster_key(cell: Cell) -> tuple[int, int]:
    return cell[1], cell[0]


@dataclass(frozen=True)
class CellSet:
    """A normalized, edge-connected set of unit cells."""

    cells: frozenset[Cell]
    name: str = field(default="shape", compare=False)

    def __post_init__(self):
        if not self.cells:
            raise ValueError("CellSet must be non-empty")
        if min(x for x, _ in self.cells) != 0 or min(y for _, y in self.cells) != 0:
            raise ValueError("CellSet must be normalized (min x = min y = 0)")
        if not _is_connected(self.cells):
            raise ValueError("CellSet must be edge-connected")

    @classmethod
    def from_cells(cls, cells: Iterable[Cell], name: str = "shape") -> "CellSet":
        return cls(normalize((int(x), int(y)) for x, y in cells), name=name)

    @classmethod
    def rectangle(cls, width: int, height: int, name: str = "rect") -> "CellSet":
        return cls(frozenset((x, y) for x in range(width) for y in range(height)), name=name)

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self):
        return iter(sorted(self.cells, key=raster_key))

    @property
    def size(self) -> tuple[int, int]:
        return (max(x for x, _ in self.cells) + 1, max(y for _, y in self.cells) + 1)

    def scaled(self, factor: int) -> "CellSet":
        return CellSet(
            frozenset(
                (x * factor + i, y * factor + j)
                for x, y in self.cells
                for i in range(factor)
                for j in range(factor)
            ),
            name=f"{self.name}x{factor}",
        )

    def oriented(self, orientation: int) -> "CellSet":
        return CellSet(normalize(transform_cells(self.cells, orientation)), name=self.name)

    @cached_property
    def orientations(self) -> "OrientedShapes":
        return OrientedShapes(self)

    def digest(self) -> str:
        text = ";".join(f"{x},{y}" for x, y in self)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


class OrientedShapes:
    """The eight oriented copies of a shape, with per-orientation lookup arrays."""

    def __init__(self, shape: CellSet):
        self.shape = shape
        self.cells = [sorted(normalize(transform_cells(shape.cells, o)), key=raster_key) for o in range(8)]
        # first orientation index yielding each distinct cell set
        self.canonical = np.zeros(8, dtype=np.int64)
        for o in range(8):
            self.canonical[o] = next(p for p in range(8) if self.cells[p] == self.cells[o])
        self.distinct = sorted(set(int(c) for c in self.canonical))
        self.cell_array = [np.array(c, dtype=np.int64) for c in self.cells]
        self.bbox = np.array([[c[:, 0].max() + 1, c[:, 1].max() + 1] for c in self.cell_array])

    def __getitem__(self, orientation: int) -> list[Cell]:
        return self.cells[orientation]

    def cell_index(self, orientation: int) -> dict[Cell, int]:
        return {c: i for i, c in enumerate(self.cells[orientation])}


@dataclass(frozen=True)
class Transform:
    """Quarter-turn rotation (counter-clockwise in x-right/y-up terms), optional mirror, then translation."""

    rotation: int = 0
    mirrored: bool = False
    translation: Cell = (0, 0)

    def __post_init__(self):
        if self.rotation not in (0, 1, 2, 3):
            raise ValueError(f"rotation must be in 0..3, got {self.rotation}")

    @property
    def orientation(self) -> int:
        return 4 * int(self.mirrored) + self.rotation

    @classmethod
    def from_orientation(cls, orientation: int, translation: Cell = (0, 0)) -> "Transform":
        return cls(orientation % 4, bool(orientation // 4), (int(translation[0]), int(translation[1])))

    def compose(self, inner: "Transform") -> "Transform":
        """Orientation of ``self`` after ``inner``; translation is taken from ``self``."""
        return Transform.from_orientation(int(COMPOSE[self.orientation, inner.orientation]), self.translation)


def apply_transform(shape: CellSet | Iterable[Cell], t: Transform) -> frozenset[Cell]:
    """Orient ``shape``, renormalize it and shift by ``t.translation``."""
    cells = shape.cells if isinstance(shape, CellSet) else list(shape)
    tx, ty = t.translation
    return frozenset((x + tx, y + ty) for x, y in normalize(transform_cells(cells, t.orientation)))


# ---------------------------------------------------------------------------
# exact cover
# ---------------------------------------------------------------------------


def _default_cell_priority(cell: Cell) -> tuple[int, int]:
    # ties in the fewest-candidates rule go to the bottom-right-most cell;
    # measured ~10x fewer nodes than top-left on the 9-scaled G-hexomino
    return -cell[1], -cell[0]


def solve_exact_cover(
    region: CellSet | Iterable[Cell],
    shape: CellSet,
    limit: int | None = 1,
    cell_priority=_default_cell_priority,
) -> list[list[Transform]]:
    """Enumerate ways to tile ``region`` with oriented translated copies of ``shape``.

    Algorithm X over a dict-of-sets column index.  The uncovered cell with the
    fewest live candidate placements is branched on next; candidates are tried
    in (orientation, translation) order.  ``limit=None`` enumerates all.
    """
    region_cells = set(region.cells if isinstance(region, CellSet) else region)
    n = len(shape)
    if not region_cells or len(region_cells) % n:
        return []
    shapes = shape.orientations
    rows: dict[tuple, tuple[Cell, ...]] = {}
    for o in shapes.distinct:
        cells = shapes[o]
        anchor = cells[0]
        for rx, ry in region_cells:
            tx, ty = rx - anchor[0], ry - anchor[1]
            placed = tuple(sorted(((x + tx, y + ty) for x, y in cells), key=raster_key))
            if all(c in region_cells for c in placed):
                rows[(o, ty, tx)] = placed
    columns: dict[Cell, set] = {c: set() for c in region_cells}
    for key, cells in rows.items():
        for c in cells:
            columns[c].add(key)
    priority = {c: cell_priority(c) for c in region_cells}

    def select(r):
        removed = []
        for j in rows[r]:
            for i in columns[j]:
                for k in rows[i]:
                    if k != j:
                        columns[k].discard(i)
            removed.append(columns.pop(j))
        return removed

    def deselect(r, removed):
        for j in reversed(rows[r]):
            columns[j] = removed.pop()
            for i in columns[j]:
                for k in rows[i]:
                    if k != j:
                        columns[k].add(i)

    solutions: list[list[Transform]] = []
    partial: list[tuple] = []

    def search() -> bool:
        if not columns:
            solutions.append([Transform.from_orientation(o, (tx, ty)) for o, ty, tx in partial])
            return limit is not None and len(solutions) >= limit
        col = min(columns, key=lambda c: (len(columns[c]), priority[c]))
        for r in sorted(columns[col]):
            removed = select(r)
            partial.append(r)
            if search():
                return True
            partial.pop()
            deselect(r, removed)
        return False

    search()
    return solutions


# ---------------------------------------------------------------------------
# production rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductionRule:
    """An L^2-rep decomposition of ``shape`` scaled by ``linear_scale``.

    ``children`` are placements in the coordinates of the scaled parent in
    orientation 0.
    """

    shape: CellSet
    linear_scale: int
    children: tuple[Transform, ...]

    @property
    def area_scale(self) -> int:
        return self.linear_scale**2

    def coverage_errors(self) -> int:
        """Number of scaled-parent cells not covered exactly once (0 for a valid rule)."""
        target = self.shape.scaled(self.linear_scale).cells
        counts: dict[Cell, int] = {}
        for t in self.children:
            for c in apply_transform(self.shape, t):
                counts[c] = counts.get(c, 0) + 1
        bad = sum(1 for c in target if counts.get(c, 0) != 1)
        bad += sum(1 for c in counts if c not in target)
        return bad

    def validate(self) -> None:
        if len(self.children) != self.area_scale:
            raise AssetInvalid(f"rule has {len(self.children)} children, expected {self.area_scale}")
        if self.coverage_errors():
            raise AssetInvalid("rule children do not exactly tile the scaled shape")

    @cached_property
    def child_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """Per parent orientation: child orientations (8, A) and child origins (8, A, 2)."""
        shapes = self.shape.orientations
        L = self.linear_scale
        scaled = self.shape.scaled(L)
        child_o = np.zeros((8, len(self.children)), dtype=np.int64)
        child_v = np.zeros((8, len(self.children), 2), dtype=np.int64)
        for o in range(8):
            moved = transform_cells(scaled.cells, o)
            mx = min(x for x, _ in moved)
            my = min(y for _, y in moved)
            for i, t in enumerate(self.children):
                cells = transform_cells(apply_transform(self.shape, t), o)
                cells = [(x - mx, y - my) for x, y in cells]
                co = int(shapes.canonical[COMPOSE[o, t.orientation]])
                vx = min(x for x, _ in cells)
                vy = min(y for _, y in cells)
                if sorted((x - vx, y - vy) for x, y in cells) != sorted(shapes[co]):
                    raise AssetInvalid("child orientation composition is inconsistent")
                child_o[o, i] = co
                child_v[o, i] = (vx, vy)
        return child_o, child_v

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = [f"polyrule v1 L={self.linear_scale} shape={self.shape.name}"]
        for t in self.children:
            lines.append(f"{t.rotation} {int(t.mirrored)} {t.translation[0]} {t.translation[1]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, shape: CellSet) -> "ProductionRule":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header = lines[0].split()
        if header[:2] != ["polyrule", "v1"]:
            raise AssetInvalid(f"not a polyrule v1 file: {lines[0]!r}")
        fields = dict(item.split("=", 1) for item in header[2:])
        L = int(fields["L"])
        if fields.get("shape", shape.name) != shape.name:
            raise AssetInvalid(f"rule is for shape {fields['shape']!r}, not {shape.name!r}")
        children = []
        for ln in lines[1:]:
            rot, mir, tx, ty = (int(v) for v in ln.split())
            children.append(Transform(rot, bool(mir), (tx, ty)))
        rule = cls(shape, L, tuple(children))
        rule.validate()
        return rule

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path, shape: CellSet) -> "ProductionRule":
        return cls.from_text(Path(path).read_text(), shape)


def derive_production_rule(shape: CellSet, linear_scale: int) -> ProductionRule:
    """First exact cover of ``shape`` scaled by ``linear_scale`` under the fixed search order."""
    if linear_scale < 2:
        raise ValueError("linear scale must be >= 2")
    solutions = solve_exact_cover(shape.scaled(linear_scale), shape, limit=1)
    if not solutions:
        raise NotRectifiable(f"{shape.name} has no {linear_scale}^2-rep decomposition")
    # a stable child order independent of search order: raster order of child origins
    children = sorted(solutions[0], key=lambda t: (t.translation[1], t.translation[0], t.orientation))
    return ProductionRule(shape, linear_scale, tuple(children))


# ---------------------------------------------------------------------------
# assets
# ---------------------------------------------------------------------------


def parse_shape(text: str, name: str = "shape") -> CellSet:
    cells = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            x, y = line.split()
            cells.append((int(x), int(y)))
        except ValueError as exc:
            raise AssetInvalid(f"bad shape line {line!r}: expected 'x y'") from exc
    if not cells:
        raise AssetInvalid("shape asset has no cells")
    try:
        return CellSet.from_cells(cells, name=name)
    except ValueError as exc:
        raise AssetInvalid(str(exc)) from exc


def load_shape(path: str | Path, name: str | None = None) -> CellSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"shape asset not found: {path}")
    return parse_shape(path.read_text(), name=name or path.stem)


def _asset_text(filename: str) -> str:
    return resources.files("polydither").joinpath(f"data/{filename}").read_text()


GHEX_NAME = "ghexomino"
GHEX_RECTANGLE = (12, 9)
GHEX_SCALE = 9


@lru_cache(maxsize=None)
def canonical_g_hexomino(verify: bool = True) -> CellSet:
    """The packaged G-hexomino, verified to rectify a 12x9 box and to admit a 9^2-rep."""
    shape = parse_shape(_asset_text("ghexomino.txt"), name=GHEX_NAME)
    if verify:
        if len(shape) != 6:
            raise AssetInvalid(f"G-hexomino must have 6 cells, got {len(shape)}")
        w, h = GHEX_RECTANGLE
        if not solve_exact_cover(CellSet.rectangle(w, h), shape, limit=1):
            raise AssetInvalid("shape does not tile a 12x9 rectangle")
        try:
            derived_rule(shape, GHEX_SCALE)
        except NotRectifiable as exc:
            raise AssetInvalid(str(exc)) from exc
    return shape


@lru_cache(maxsize=None)
def derived_rule(shape: CellSet, linear_scale: int) -> ProductionRule:
    return derive_production_rule(shape, linear_scale)


def packaged_rule(shape: CellSet | None = None) -> ProductionRule:
    """The frozen 9^2-rep rule shipped with the package (validated cell by cell)."""
    shape = shape or canonical_g_hexomino(verify=False)
    return ProductionRule.from_text(_asset_text("ghexomino_L9.rule"), shape)


# ---------------------------------------------------------------------------
# tiles and tilings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tile:
    shape: CellSet
    transform: Transform
    structural_index: int | None = None

    @property
    def cells(self) -> frozenset[Cell]:
        return apply_transform(self.shape, self.transform)


def subdivide(tile: Tile, rule: ProductionRule) -> list[Tile]:
    """Children of ``tile`` at L-times finer resolution, in the rule's child order."""
    if tile.shape.cells != rule.shape.cells:
        raise RuleMismatch("tile shape does not match the production rule")
    child_o, child_v = rule.child_tables
    o = int(rule.shape.orientations.canonical[tile.transform.orientation])
    tx, ty = tile.transform.translation
    L = rule.linear_scale
    return [
        Tile(rule.shape, Transform.from_orientation(int(co), (tx * L + int(v[0]), ty * L + int(v[1]))))
        for co, v in zip(child_o[o], child_v[o])
    ]


@dataclass
class Tiling:
    """Tiles of one shape covering ``rect`` without gaps.

    ``owner`` maps every cell of ``window`` (``rect`` grown by a context margin)
    to a tile index, or -1 outside the seed polyomino.  Tiles meeting the window
    are kept whole; only ``rect`` is the addressable region.
    """

    shape: CellSet
    orient: np.ndarray  # (N,) canonical orientation per tile
    origin: np.ndarray  # (N, 2) tile origin (x, y) in cell units
    window: tuple[int, int, int, int]  # x0, y0, width, height
    rect: tuple[int, int, int, int]
    owner: np.ndarray  # (height, width) over window
    depth: int = 0
    parent: np.ndarray | None = None  # index of each tile's parent, when refined from another tiling

    def __len__(self) -> int:
        return len(self.orient)

    @property
    def tiles(self) -> list[Tile]:
        return [
            Tile(self.shape, Transform.from_orientation(int(o), (int(v[0]), int(v[1]))))
            for o, v in zip(self.orient, self.origin)
        ]

    def owner_at(self, x: int, y: int) -> int:
        x0, y0, w, h = self.window
        if not (x0 <= x < x0 + w and y0 <= y < y0 + h):
            raise IndexError((x, y))
        return int(self.owner[y - y0, x - x0])

    def rect_owner(self) -> np.ndarray:
        x0, y0, _, _ = self.window
        rx, ry, rw, rh = self.rect
        return self.owner[ry - y0 : ry - y0 + rh, rx - x0 : rx - x0 + rw]

    def rect_tiles(self) -> np.ndarray:
        """Indices of tiles owning at least one cell of ``rect``."""
        return np.unique(self.rect_owner()[self.rect_owner() >= 0])

    def tile_cells(self, index: int) -> np.ndarray:
        return self.shape.orientations.cell_array[self.orient[index]] + self.origin[index]


def _children(orient: np.ndarray, origin: np.ndarray, rule: ProductionRule) -> tuple[np.ndarray, np.ndarray]:
    child_o, child_v = rule.child_tables
    co = child_o[orient].reshape(-1)
    cv = (origin[:, None, :] * rule.linear_scale + child_v[orient]).reshape(-1, 2)
    return co, cv


def subdivide_window(
    rule: ProductionRule,
    depth: int,
    seed_orientation: int,
    seed_origin: Cell,
    window: tuple[int, int, int, int] | None = None,
) -> Tiling:
    """Subdivide one seed tile ``depth`` times, keeping tiles that meet ``window``.

    ``seed_origin`` is the seed's top-left corner in finest cell units.
    """
    shapes = rule.shape.orientations
    L = rule.linear_scale
    scale = L**depth
    sx, sy = seed_origin
    o0 = int(shapes.canonical[seed_orientation])
    orient = np.array([o0], dtype=np.int64)
    origin = np.zeros((1, 2), dtype=np.int64)
    if window is None:
        bw, bh = shapes.bbox[o0] * scale
        window = (sx, sy, int(bw), int(bh))
    wx, wy, ww, wh = window
    lx, ly = wx - sx, wy - sy  # window in seed-local coordinates
    for level in range(depth - 1, -1, -1):
        orient, origin = _children(orient, origin, rule)
        s = L**level
        lo = origin * s
        hi = (origin + shapes.bbox[orient]) * s
        keep = (hi[:, 0] > lx) & (lo[:, 0] < lx + ww) & (hi[:, 1] > ly) & (lo[:, 1] < ly + wh)
        orient, origin = orient[keep], origin[keep]
    origin = origin + np.array([sx, sy], dtype=np.int64)
    owner = np.full((wh, ww), -1, dtype=np.int64)
    for o in shapes.distinct:
        idx = np.nonzero(orient == o)[0]
        if not len(idx):
            continue
        cells = shapes.cell_array[o]
        xs = origin[idx, 0][:, None] + cells[None, :, 0] - wx
        ys = origin[idx, 1][:, None] + cells[None, :, 1] - wy
        inside = (xs >= 0) & (xs < ww) & (ys >= 0) & (ys < wh)
        tid = np.broadcast_to(idx[:, None], xs.shape)
        owner[ys[inside], xs[inside]] = tid[inside]
    return Tiling(rule.shape, orient, origin, window, window, owner, depth)


def inscribed_block_rectangle(shape: CellSet) -> tuple[int, int, int, int]:
    """Largest-area axis-aligned rectangle of whole cells inside ``shape`` (x, y, w, h); ties to raster order."""
    best = None
    w_max, h_max = shape.size
    for y0 in range(h_max):
        for x0 in range(w_max):
            for h in range(1, h_max - y0 + 1):
                for w in range(1, w_max - x0 + 1):
                    if all((x, y) in shape.cells for x in range(x0, x0 + w) for y in range(y0, y0 + h)):
                        key = (w * h, min(w, h))
                        if best is None or key > best[0]:
                            best = (key, (x0, y0, w, h))
    return best[1]


def cover_rectangle(
    width_cells: int,
    height_cells: int,
    rule: ProductionRule,
    seed: Transform = Transform(),
    margin: int = 6,
    min_depth: int = 3,
) -> Tiling:
    """Tile the rectangle ``[0, width) x [0, height)`` by subdividing one big polyomino.

    The rectangle's corner is anchored a quarter of the way into the largest
    block-aligned rectangle of the seed polyomino and shifted by
    ``seed.translation``, so equal translations address the same structure
    whatever the rectangle size.  The depth is the smallest one, at least
    ``min_depth``, that holds the rectangle plus ``margin`` cells of
    classification context; only rectangles too big for ``min_depth`` see a
    different structure.
    """
    if width_cells < 1 or height_cells < 1:
        raise ValueError("rectangle must be at least 1x1 cells")
    shapes = rule.shape.orientations
    o = int(shapes.canonical[seed.orientation])
    bx, by, bw, bh = inscribed_block_rectangle(CellSet(frozenset(shapes[o])))
    dx, dy = seed.translation

    def anchor(depth):
        s = rule.linear_scale**depth
        return bx * s + (bw * s) // 4 + dx, by * s + (bh * s) // 4 + dy, s

    def fits(depth):
        rx, ry, s = anchor(depth)
        return (
            rx - margin >= bx * s
            and ry - margin >= by * s
            and rx + width_cells + margin <= (bx + bw) * s
            and ry + height_cells + margin <= (by + bh) * s
        )

    depth = max(min_depth, 1)
    while not fits(depth):
        depth += 1
    rx, ry, _ = anchor(depth)
    window = (-margin, -margin, width_cells + 2 * margin, height_cells + 2 * margin)
    tiling = subdivide_window(rule, depth, o, (-rx, -ry), window)
    tiling.rect = (0, 0, width_cells, height_cells)
    return tiling
