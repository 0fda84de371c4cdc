"""Rank tables: per-class pixel ranks plus shared border-segment ranks, and their files.

File layout (plain text)::

    polyrank v1 S=8 d0=1/8 seed=0 shape=ghexomino rulehash=<hex>
    registry <digest> classes=<M> segments=<N>
    class 0
    x y rank            (6 S^2 lines, tile-local pixels)
    ...
    segment <key>
    x y rank            (segment-local pixels)

The structural registry and the production rule are written next to the
table (``<table>.registry`` and ``<table>.rule``).
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .polyomino import CellSet, ProductionRule
from .structure import ClassGeometry, Registry, closed_registry

log = logging.getLogger(__name__)

MAGIC = "polyrank"
VERSION = "v1"


class TableInvalid(ValueError):
    """A rank table file is malformed or breaks an invariant."""


@dataclass
class RankTable:
    scale: int
    d0: Fraction
    seed: int
    shape_name: str
    rule_hash: str
    registry_digest: str
    pixels: list[np.ndarray]  # per class, (P, 2) tile-local (x, y) in raster order
    ranks: np.ndarray  # (M, P)
    segments: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)  # key -> (xy, ranks)
    registry: Registry | None = None

    @property
    def pixel_count(self) -> int:
        return int(self.ranks.shape[1])

    @property
    def class_count(self) -> int:
        return int(self.ranks.shape[0])

    def header(self) -> str:
        return (
            f"{MAGIC} {VERSION} S={self.scale} d0={self.d0.numerator}/{self.d0.denominator} "
            f"seed={self.seed} shape={self.shape_name} rulehash={self.rule_hash}"
        )

    def validate(self) -> None:
        """Per-class permutation check."""
        P = self.pixel_count
        expect = np.arange(P)
        for c in range(self.class_count):
            if not np.array_equal(np.sort(self.ranks[c]), expect):
                raise TableInvalid(f"class {c}: ranks are not a permutation of 0..{P - 1}")

    def check_segments(self, geometry: ClassGeometry) -> int:
        """Compare class ranks with the segment ranks on every owned segment; returns pairs checked."""
        checked = 0
        for c, segs in enumerate(geometry.segments):
            for cs in segs:
                xy, r = self.segments[cs.key]
                if not np.array_equal(self.ranks[c, cs.pixels], r):
                    raise TableInvalid(f"class {c}: ranks on segment {cs.key} disagree with the segment table")
                checked += 1
        return checked

    def to_text(self) -> str:
        out = [self.header(), f"registry {self.registry_digest} classes={self.class_count} segments={len(self.segments)}"]
        for c in range(self.class_count):
            out.append(f"class {c}")
            xy = self.pixels[c]
            out.extend(f"{x} {y} {r}" for (x, y), r in zip(xy.tolist(), self.ranks[c].tolist()))
        for key in sorted(self.segments):
            xy, r = self.segments[key]
            out.append(f"segment {key}")
            out.extend(f"{x} {y} {v}" for (x, y), v in zip(xy.tolist(), r.tolist()))
        return "\n".join(out) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str) -> "RankTable":
        lines = text.splitlines()
        if not lines:
            raise TableInvalid("empty table file")
        head = lines[0].split()
        if head[:2] != [MAGIC, VERSION]:
            raise TableInvalid(f"not a {MAGIC} {VERSION} file")
        try:
            fields = dict(item.split("=", 1) for item in head[2:])
            scale = int(fields["S"])
            d0 = Fraction(fields["d0"])
            seed = int(fields["seed"])
            shape_name = fields["shape"]
            rule_hash = fields["rulehash"]
            reg = lines[1].split()
            if reg[0] != "registry":
                raise TableInvalid("missing registry line")
            digest = reg[1]
        except (KeyError, IndexError, ValueError) as exc:
            raise TableInvalid(f"bad header: {exc}") from exc
        classes: list[list[tuple[int, int, int]]] = []
        segments: dict[str, list] = {}
        current = None
        for n, ln in enumerate(lines[2:], start=3):
            parts = ln.split()
            if not parts:
                continue
            if parts[0] == "class":
                if int(parts[1]) != len(classes):
                    raise TableInvalid(f"line {n}: classes out of order")
                current = []
                classes.append(current)
            elif parts[0] == "segment":
                current = []
                segments[parts[1]] = current
            else:
                if current is None or len(parts) != 3:
                    raise TableInvalid(f"line {n}: unexpected {ln!r}")
                current.append(tuple(int(v) for v in parts))
        if not classes:
            raise TableInvalid("table has no classes")
        P = len(classes[0])
        if P != 6 * scale * scale or any(len(c) != P for c in classes):
            raise TableInvalid(f"every class needs {6 * scale * scale} pixels")
        arr = np.array(classes, dtype=np.int64)
        pixels = [a[:, :2].copy() for a in arr]
        ranks = arr[:, :, 2].copy()
        segs = {}
        for k, v in segments.items():
            a = np.array(v, dtype=np.int64).reshape(-1, 3)
            segs[k] = (a[:, :2].copy(), a[:, 2].copy())
        table = cls(scale, d0, seed, shape_name, rule_hash, digest, pixels, ranks, segs)
        table.validate()
        return table


def table_from_build(model, cfg, ranks: np.ndarray) -> RankTable:
    """Wrap optimizer output (``model``: optimizer.Model) as a RankTable."""
    geo = model.geometry.geo
    reg = model.registry
    pixels = [geo.pixels[reg.orientation(c)] for c in range(model.M)]
    segments = {}
    for s, key in enumerate(model.geometry.segment_keys):
        c = int(model.owners[s][0])
        segments[key] = (model.geometry.segment_local(key), ranks[c, model.owner_pixels[s][0]].copy())
    table = RankTable(
        scale=cfg.scale,
        d0=cfg.d0,
        seed=cfg.seed,
        shape_name=model.shape.name,
        rule_hash=model.rule.digest(),
        registry_digest=reg.digest(),
        pixels=pixels,
        ranks=ranks.copy(),
        segments=segments,
        registry=reg,
    )
    table.validate()
    table.check_segments(model.geometry)
    return table


def sidecar(path: str | Path, kind: str) -> Path:
    path = Path(path)
    return path.with_name(path.name + "." + kind)


def save_table(table: RankTable, path: str | Path, rule: ProductionRule | None = None) -> list[Path]:
    """Write the table plus its registry (and rule, if given); returns the paths written."""
    path = Path(path)
    path.write_text(table.to_text())
    written = [path]
    if table.registry is not None:
        reg_path = sidecar(path, "registry")
        table.registry.save(reg_path)
        written.append(reg_path)
    if rule is not None:
        rule_path = sidecar(path, "rule")
        rule.save(rule_path)
        written.append(rule_path)
    return written


def load_table(path: str | Path, shape: CellSet, rule: ProductionRule) -> RankTable:
    """Read and validate a table; attach its registry from the sidecar file or by recomputing it."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"table not found: {path}")
    table = RankTable.from_text(path.read_text())
    if table.shape_name != shape.name:
        raise TableInvalid(f"table is for shape {table.shape_name!r}, not {shape.name!r}")
    if table.rule_hash != rule.digest():
        raise TableInvalid("table was built with a different production rule")
    reg_path = sidecar(path, "registry")
    if reg_path.exists():
        registry = Registry.from_text(reg_path.read_text(), shape)
    else:
        log.info("no registry next to %s; recomputing", path)
        registry, _ = closed_registry(rule)
    if registry.digest() != table.registry_digest:
        raise TableInvalid("registry does not match the table")
    if len(registry) != table.class_count:
        raise TableInvalid("registry and table disagree on the number of classes")
    table.registry = registry
    return table
