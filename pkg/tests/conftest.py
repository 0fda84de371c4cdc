"""Shared fixtures.

The full rank table takes minutes to build, so it is built once per session
through the CLI.  Set POLYDITHER_TEST_TABLE to an existing table file (with
its ``.registry`` and ``.rule`` sidecars) to reuse a previous build while
iterating on tests; the build-time check is then skipped.
"""
from __future__ import annotations

import os
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from polydither.polyomino import canonical_g_hexomino, packaged_rule
from polydither.ranktable import RankTable, load_table
from polydither.structure import PixelGeometry, closed_registry


@pytest.fixture(scope="session")
def shape():
    return canonical_g_hexomino(verify=False)


@pytest.fixture(scope="session")
def rule(shape):
    return packaged_rule(shape)


@pytest.fixture(scope="session")
def closed(rule):
    """(registry, finiteness stats); the registry carries its production table."""
    from polydither.structure import build_index_production

    registry, stats = closed_registry(rule)
    build_index_production(rule, registry)
    return registry, stats


@pytest.fixture(scope="session")
def registry(closed):
    return closed[0]


@pytest.fixture(scope="session")
def model(rule, registry):
    from polydither.optimizer import Model

    return Model(rule, 8, registry=registry)


@pytest.fixture(scope="session")
def random_table(shape, rule, registry):
    """Independent random permutation per class: valid for the runtime, not optimized."""
    geo = PixelGeometry(shape, 8)
    rng = np.random.default_rng(1234)
    M = len(registry)
    ranks = np.stack([rng.permutation(geo.count) for _ in range(M)])
    pixels = [geo.pixels[registry.orientation(c)] for c in range(M)]
    return RankTable(8, Fraction(1, 8), 0, shape.name, rule.digest(), registry.digest(), pixels, ranks, {}, registry)


class BuiltTable:
    def __init__(self, path: Path, table: RankTable, seconds: float | None, stdout: str):
        self.path = path
        self.table = table
        self.seconds = seconds  # None when reused from POLYDITHER_TEST_TABLE
        self.stdout = stdout


@pytest.fixture(scope="session")
def built(tmp_path_factory, shape, rule) -> BuiltTable:
    """The default S=8, d0=1/8, seed=0 table, built end to end by the CLI."""
    import contextlib
    import io

    from polydither.cli import main

    reuse = os.environ.get("POLYDITHER_TEST_TABLE")
    if reuse:
        path = Path(reuse)
        return BuiltTable(path, load_table(path, shape, rule), None, "")
    out = tmp_path_factory.mktemp("build") / "table.txt"
    buf = io.StringIO()
    t0 = time.time()
    with contextlib.redirect_stdout(buf):
        code = main(["build-tables", "--s", "8", "--d0", "1/8", "--seed", "0", "--out", str(out)])
    seconds = time.time() - t0
    assert code == 0, buf.getvalue()
    return BuiltTable(out, load_table(out, shape, rule), seconds, buf.getvalue())
