from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polydither.halftone import (
    UnknownClass,
    black_count,
    build_threshold_view,
    dither,
    dither_ramp,
    ramp_image,
)
from polydither.ranktable import RankTable
from polydither.structure import Registry

LEVELS = [Fraction(1, 256), Fraction(6, 256), Fraction(32, 256), Fraction(128, 256), Fraction(250, 256)]


@pytest.fixture(scope="module")
def view(random_table, rule):
    return build_threshold_view(96, 80, random_table, rule, (0, 0))


def _brute_black(g, P=384):
    n = 0
    for r in range(P):
        if (r + 0.5) / P > g:
            n += 1
    return n


def test_black_count_formula():
    assert [black_count(float(g), 384) for g in LEVELS] == [_brute_black(float(g)) for g in LEVELS]
    assert black_count(6 / 256, 384) == 375  # 9 white dots remain


def test_small_view_has_few_owners(random_table, rule):
    v = build_threshold_view(8, 8, random_table, rule, (0, 0))
    assert v.ranks.shape == (8, 8)
    assert len(np.unique(v.tile)) <= 3


def test_views_are_deterministic(random_table, rule):
    a = build_threshold_view(40, 30, random_table, rule, (17, 5))
    b = build_threshold_view(40, 30, random_table, rule, (17, 5))
    assert np.array_equal(a.ranks, b.ranks)
    assert np.array_equal(a.tile, b.tile)


def test_empty_view_rejected(random_table, rule):
    with pytest.raises(ValueError):
        build_threshold_view(0, 8, random_table, rule)


@pytest.mark.parametrize("off", [(8, 0), (0, 16), (3, 5), (13, 2)])
def test_offset_is_a_shift(random_table, rule, off):
    base = build_threshold_view(64, 64, random_table, rule, (0, 0))
    moved = build_threshold_view(40, 40, random_table, rule, off)
    dx, dy = off
    assert np.array_equal(moved.ranks, base.ranks[dy : dy + 40, dx : dx + 40])


def test_threshold_at(view):
    assert view.threshold_at(3, 4) == (view.ranks[4, 3] + 0.5) / 384
    with pytest.raises(IndexError):
        view.threshold_at(96, 0)
    with pytest.raises(IndexError):
        view.threshold_at(0, -1)


def test_complete_tiles_hold_every_threshold(view):
    tiles = view.complete_tiles()
    assert len(tiles) > 10
    for t in tiles:
        thr = view.thresholds[view.tile == t]
        assert len(np.unique(thr)) == 384
        assert thr.min() == 0.5 / 384
        assert thr.max() == 383.5 / 384


def test_constant_black_and_white(view):
    assert dither(np.zeros((80, 96)), view).all()
    assert not dither(np.ones((80, 96)), view).any()


@pytest.mark.parametrize("g", LEVELS)
def test_tone_per_complete_tile(view, g):
    black = dither(np.full((80, 96), float(g)), view)
    counts = {int((black & (view.tile == t)).sum()) for t in view.complete_tiles()}
    assert counts == {_brute_black(float(g))}


def test_level_6_of_256(view):
    black = dither(np.full((80, 96), 6 / 256), view)
    for t in view.complete_tiles():
        inside = view.tile == t
        assert int((black & inside).sum()) == 375
        assert int((~black & inside).sum()) == 9


def test_dither_validates_input(view):
    with pytest.raises(ValueError):
        dither(np.zeros((80, 95)), view)
    with pytest.raises(ValueError):
        dither(np.full((80, 96), 1.5), view)


def test_purity(view):
    rng = np.random.default_rng(0)
    a = rng.random((80, 96))
    b = rng.random((80, 96))
    b[10:50, 20:70] = a[10:50, 20:70]
    da, db = dither(a, view), dither(b, view)
    assert np.array_equal(da, dither(a, view))
    assert np.array_equal(da[10:50, 20:70], db[10:50, 20:70])


def test_ramp(random_table, rule):
    v = build_threshold_view(512, 64, random_table, rule, (0, 0))
    black = dither_ramp(v)
    cols = black.sum(axis=0)
    assert black[:, 0].all()
    assert not black[:, -1].any()
    # single columns see different thresholds, so only the trend is monotone;
    # blocks of 32 columns expect ~128 fewer black pixels each
    blocks = cols.reshape(16, 32).sum(axis=1)
    assert (np.diff(blocks) < 0).all()
    assert abs(black.mean() - 0.5) <= 0.01


def test_ramp_needs_two_columns():
    with pytest.raises(ValueError):
        ramp_image(1, 4)


@settings(max_examples=40, deadline=None)
@given(g1=st.floats(0, 1), g2=st.floats(0, 1))
def test_stacking(view, g1, g2):
    g1, g2 = min(g1, g2), max(g1, g2)
    b1 = dither(np.full((view.height, view.width), g1), view)
    b2 = dither(np.full((view.height, view.width), g2), view)
    assert not (b2 & ~b1).any()


def test_unknown_class(random_table, rule, shape):
    small = Registry(shape, random_table.registry.signatures[:100])
    t = RankTable(
        8, Fraction(1, 8), 0, shape.name, rule.digest(), small.digest(),
        random_table.pixels[:100], random_table.ranks[:100], {}, small,
    )
    with pytest.raises(UnknownClass):
        build_threshold_view(64, 64, t, rule)
