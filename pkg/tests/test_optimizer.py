from fractions import Fraction

import numpy as np
import pytest

from polydither.optimizer import (
    InfeasibleDensity,
    OptimizerConfig,
    Ranker,
    RankState,
    border_dot_counts,
    init_borders,
    init_interiors,
    k_zero,
    pick_candidate,
    rank_step,
    round_half_up,
    stream,
)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(scale=3)
    with pytest.raises(ValueError):
        OptimizerConfig(d0=Fraction(3, 2))
    with pytest.raises(ValueError):
        OptimizerConfig(down_criterion="median")
    with pytest.raises(ValueError):
        OptimizerConfig(sigma=0)
    assert OptimizerConfig(d0=0.125).d0 == Fraction(1, 8)
    assert OptimizerConfig().radius == 5


def test_k_zero():
    assert k_zero(OptimizerConfig(), 384) == 48
    assert k_zero(OptimizerConfig(d0=Fraction(1, 1000)), 384) == 0
    assert k_zero(OptimizerConfig(d0=Fraction(1, 768)), 384) == 1  # exact half rounds up
    assert [round_half_up(x) for x in (Fraction(1, 2), Fraction(3, 2), Fraction(-1, 2), 2.49)] == [1, 2, 0, 2]


def test_streams_are_independent_and_reproducible():
    a = stream(0, 1, 2).integers(0, 1 << 30, 8)
    assert np.array_equal(a, stream(0, 1, 2).integers(0, 1 << 30, 8))
    assert not np.array_equal(a, stream(0, 2, 1).integers(0, 1 << 30, 8))
    assert not np.array_equal(a, stream(1, 1, 2).integers(0, 1 << 30, 8))


def test_pick_candidate_ties_go_to_smallest_index():
    # two dots mirrored about the centre column of a 1x9 strip: the Gaussian
    # response is symmetric, so the two emptiest pixels tie exactly
    x = np.arange(9)
    resp = np.exp(-((x - 2.0) ** 2) / 4.5) + np.exp(-((x - 6.0) ** 2) / 4.5)
    empty = np.ones(9, bool)
    empty[[2, 6]] = False
    assert pick_candidate(resp, empty, largest=False) == 0  # 0 and 8 tie
    assert pick_candidate(resp, empty, largest=True) == 3  # 3 and 5, beside the dots, tie
    assert pick_candidate(resp, ~empty, largest=True) == 2  # the dots themselves tie
    assert pick_candidate(resp, np.zeros(9, bool), largest=True) == -1


def test_zero_density_is_empty(model):
    cfg = OptimizerConfig(d0=0)
    pattern = init_borders(model, cfg)
    assert pattern.shape == (model.n_slots,) and not pattern.any()
    state = init_interiors(model, cfg, pattern)
    assert state.shape == (model.M, model.P) and not state.any()


def test_infeasible_density(model):
    cfg = OptimizerConfig(d0=Fraction(1, 384))
    pattern = np.ones(model.n_slots, bool)  # far more border dots than k0 = 1
    with pytest.raises(InfeasibleDensity):
        init_interiors(model, cfg, pattern)
    assert (border_dot_counts(model, pattern) == (model.seg_of >= 0).sum(axis=1)).all()


@pytest.fixture(scope="module")
def ranker(model):
    return Ranker(model, OptimizerConfig())


def _consistent_state(model, rng, p_border=0.1, p_inner=0.1):
    pattern = rng.random(model.n_slots) < p_border
    dots = rng.random((model.M, model.P)) < p_inner
    on_seg = model.seg_slot >= 0
    dots[on_seg] = pattern[model.seg_slot[on_seg]]
    return dots


def test_response_matches_direct_sum(model, ranker):
    # independent oracle: explicit truncated, normalized Gaussian over the class's neighbourhood
    cfg = OptimizerConfig()
    R, s = cfg.radius, cfg.sigma
    k = np.exp(-np.arange(-R, R + 1) ** 2 / (2 * s * s))
    k /= k.sum()
    w2 = np.outer(k, k)
    rng = np.random.default_rng(7)
    dots = _consistent_state(model, rng, 0.3, 0.3)
    flat = np.concatenate([dots.reshape(-1), [False]])
    geo = model.geometry.geo
    for c in rng.choice(model.M, 4, replace=False):
        ctx = model.contexts[c]
        bx, by, _, _ = ctx.centre_box(model.scale)
        xy = geo.pixels[model.registry.orientation(int(c))]
        got = ranker.response(flat, int(c))
        for p in rng.choice(model.P, 25, replace=False):
            ax, ay = bx + xy[p, 0], by + xy[p, 1]
            tile, state = model.pixel_state(ctx, (ax - R, ay - R, 2 * R + 1, 2 * R + 1))
            assert state[R, R] == c * model.P + p
            on = np.where(state >= 0, flat[np.maximum(state, 0)], False)
            assert got[p] == pytest.approx((w2 * on).sum(), abs=1e-9)


@pytest.mark.parametrize("up", [True, False])
def test_rank_step_adds_one_dot_per_class_and_keeps_segments(model, ranker, up):
    rng = np.random.default_rng(3 if up else 4)
    dots = _consistent_state(model, rng)
    rank = np.full((model.M, model.P), -1, dtype=np.int64)
    st = RankState(dots.copy(), rank, 50)
    rank_step(model, ranker, st, up, rng.permutation(model.M), largest=not up)
    diff = st.dots.astype(int) - dots.astype(int)
    assert (diff.sum(axis=1) == (1 if up else -1)).all()
    assert ((st.rank >= 0).sum(axis=1) == 1).all()
    assert set(np.unique(st.rank)) == {-1, 50 if up else 49}
    assert st.level == (51 if up else 49)
    for s in range(model.n_segments):
        rows = st.dots[model.owners[s][:, None], model.owner_pixels[s]]
        assert (rows == rows[0]).all()


# properties of the full S=8, d0=1/8 table (built once per session)


@pytest.mark.slow
def test_built_table_ranks(built, model):
    t = built.table
    assert t.class_count == model.M and t.pixel_count == 384
    t.validate()
    assert t.check_segments(model.geometry) == sum(len(s) for s in model.geometry.segments)
    assert set(t.segments) == set(model.geometry.segment_keys)
    assert "k0\t48" in built.stdout or built.seconds is None


@pytest.mark.slow
def test_border_dot_counts_follow_density(built):
    d0 = built.table.d0
    off = {key: abs(int((r < 48).sum()) - float(d0) * len(r)) for key, (_, r) in built.table.segments.items()}
    worst = max(off.values())
    assert worst <= 1, f"{sum(v > 1 for v in off.values())} segments off by more than one dot (worst {worst})"


@pytest.mark.slow
def test_blue_noise_proxy_at_d0(built, rule):
    # minimum distance between the k0-level dots of a rendered 512x512 area
    from scipy.spatial import cKDTree

    from polydither.halftone import build_threshold_view

    view = build_threshold_view(512, 512, built.table, rule, (0, 0))
    ys, xs = np.nonzero(view.ranks < 48)
    d, _ = cKDTree(np.c_[xs, ys]).query(np.c_[xs, ys], k=2)
    bound = OptimizerConfig().min_distance_factor / np.sqrt(float(built.table.d0))
    close = float((d[:, 1] <= bound).mean())
    assert d[:, 1].min() > bound, f"min distance {d[:, 1].min():.2f} <= {bound:.2f}; {close:.2%} of dots too close"
