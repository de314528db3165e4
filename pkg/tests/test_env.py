from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgf.config import CanvasConfig
from sgf.env import (FloorplanEnv, IllegalAction, difference_map, heat_map,
                     add_bbox_density, reward_wl)
from sgf.netlist import build_netlist, net_count_matrix, random_netlist


# ------------------------------------------------------------------ oracles

def brute_legal(env, s):
    m = s.next_module
    w, h = env.widths[m], env.heights[m]
    cfg = env.cfg
    out = set()
    for z in range(cfg.Z):
        for y in range(cfg.H):
            for x in range(cfg.W):
                if x + w <= cfg.W and y + h <= cfg.H and (s.occupancy[z, y:y + h, x:x + w] == -1).all():
                    out.add((x, y, z))
    return out


def brute_wirelength(netlist, positions):
    """Pairwise 3D Manhattan wirelength with exact rational centers."""
    M = net_count_matrix(netlist)
    mods = netlist.modules
    total = Fraction(0)
    for a in range(len(mods)):
        for b in range(a + 1, len(mods)):
            pa, pb = positions[a], positions[b]
            if pa is None or pb is None:
                continue
            ca = (pa[0] + Fraction(mods[a].width, 2), pa[1] + Fraction(mods[a].height, 2), pa[2])
            cb = (pb[0] + Fraction(mods[b].width, 2), pb[1] + Fraction(mods[b].height, 2), pb[2])
            total += M[a, b] * (abs(ca[0] - cb[0]) + abs(ca[1] - cb[1]) + 10 * abs(ca[2] - cb[2]))
    return total


def brute_heat(occupied):
    Z, H, W = occupied.shape
    out = np.zeros(occupied.shape)
    kernel = {(0, 0, 0): 1.0, (1, 0, 0): 0.5, (-1, 0, 0): 0.5, (0, 1, 0): 0.5, (0, -1, 0): 0.5,
              (0, 0, 1): 1.0, (0, 0, -1): 1.0}
    for z in range(Z):
        for y in range(H):
            for x in range(W):
                for (dx, dy, dz), k in kernel.items():
                    zz, yy, xx = z - dz, y - dy, x - dx
                    if 0 <= zz < Z and 0 <= yy < H and 0 <= xx < W:
                        out[z, y, x] += k * occupied[zz, yy, xx]
    return out


def random_walk(env, rng):
    s = env.reset()
    states, rewards = [s], []
    while not s.done:
        legal = env.legal_actions(s)
        if not legal:
            break
        s, r, _ = env.step(s, legal[rng.integers(len(legal))])
        states.append(s)
        rewards.append(r)
    return states, rewards


# -------------------------------------------------------------------- reset

def test_reset_order(toy_env, toy3):
    s = toy_env.reset()
    assert [toy3.modules[i].name for i in s.order] == ["A", "B", "C"]
    assert s.t == 0 and (s.occupancy == -1).all()


def test_reset_equal_area_tie():
    n = build_netlist("t", [("p", 1, 2), ("q", 2, 1), ("r", 2, 2)], [])
    assert FloorplanEnv(n, CanvasConfig(6, 6, 1)).order == (2, 0, 1)


def test_reset_too_large(small_cfg):
    with pytest.raises(ValueError, match="exceeds"):
        FloorplanEnv(build_netlist("big", [("X", 7, 1)], []), small_cfg)


# -------------------------------------------------------------------- legal

def test_legal_empty_canvas(toy_env):
    s = toy_env.reset()
    legal = toy_env.legal_actions(s)
    assert len(legal) == 50 and set(legal) == brute_legal(toy_env, s)


def test_legal_full_layer(small_cfg):
    n = build_netlist("f", [("big", 6, 6), ("one", 1, 1)], [])
    env = FloorplanEnv(n, small_cfg)
    s, _, _ = env.step(env.reset(), (0, 0, 0))
    legal = env.legal_actions(s)
    assert len(legal) == 36 and all(a.z == 1 for a in legal)


def test_legal_no_room():
    n = build_netlist("f", [("a", 4, 4), ("b", 4, 4)], [])
    env = FloorplanEnv(n, CanvasConfig(4, 4, 1))
    s, _, _ = env.step(env.reset(), (0, 0, 0))
    assert env.legal_actions(s) == [] and env.is_dead_end(s)


@given(st.integers(0, 10_000))
def test_legal_matches_brute_force(seed):
    n = random_netlist(8, 10, seed, max_dim=4)
    env = FloorplanEnv(n, CanvasConfig(8, 7, 2))
    states, _ = random_walk(env, np.random.default_rng(seed))
    for s in states:
        if not s.done:
            assert set(env.legal_actions(s)) == brute_legal(env, s)


# --------------------------------------------------------------------- step

def test_step_toy3_rewards(toy_env):
    s0 = toy_env.reset()
    s1, r1, done1 = toy_env.step(s0, (0, 0, 0))
    assert r1.w == 1.0 and r1.c == 0.0 and not done1
    # 2x2 module on empty canvas: each cell has itself plus two lateral neighbours
    assert r1.h == brute_heat(s1.occupancy != -1).max() == 2.0
    s2, r2, _ = toy_env.step(s1, (3, 0, 0))
    assert toy_env.delta_wl2(s1, (3, 0, 0)) == 14
    assert r2.w == pytest.approx(20 / 27, abs=1e-15)
    s3, _, done3 = toy_env.step(s2, (0, 3, 1))
    assert done3 and s3.t == 3


def test_step_overlap_and_bounds(toy_env):
    s1, _, _ = toy_env.step(toy_env.reset(), (0, 0, 0))
    with pytest.raises(IllegalAction, match="overlap"):
        toy_env.step(s1, (1, 1, 0))
    with pytest.raises(IllegalAction, match="out of bounds"):
        toy_env.step(s1, (5, 0, 0))


def test_step_is_pure(toy_env):
    s0 = toy_env.reset()
    snap = s0.occupancy.copy()
    a, ra, _ = toy_env.step(s0, (1, 2, 1))
    b, rb, _ = toy_env.step(s0, (1, 2, 1))
    assert (s0.occupancy == snap).all() and s0.t == 0
    assert ra == rb and (a.occupancy == b.occupancy).all() and a.positions == b.positions


# --------------------------------------------------------------- wirelength

def place_toy3(env):
    s = env.reset()
    for a in [(0, 0, 0), (3, 0, 0), (0, 3, 1)]:
        s, _, _ = env.step(s, a)
    return s


def test_total_wirelength_toy3(toy_env, toy3):
    s = place_toy3(toy_env)
    assert toy_env.total_wirelength2(s) == 47
    assert toy_env.total_wirelength(s) == 23.5
    assert brute_wirelength(toy3, s.positions) == Fraction(47, 2)


def test_wirelength_single_and_unconnected(small_cfg):
    n = build_netlist("u", [("a", 1, 1), ("b", 1, 1)], [])
    env = FloorplanEnv(n, small_cfg)
    s, _, _ = env.step(env.reset(), (0, 0, 0))
    assert env.total_wirelength2(s) == 0
    s, r, _ = env.step(s, (5, 5, 1))
    assert env.total_wirelength2(s) == 0 and r.w == 1.0


@given(st.integers(0, 10_000))
def test_incremental_consistency(seed):
    n = random_netlist(7, 9, seed, max_dim=3)
    env = FloorplanEnv(n, CanvasConfig(9, 8, 2))
    rng = np.random.default_rng(seed)
    s = env.reset()
    acc = 0
    while not s.done:
        legal = env.legal_actions(s)
        a = legal[rng.integers(len(legal))]
        acc += env.delta_wl2(s, a)
        s, _, _ = env.step(s, a)
    assert acc == env.total_wirelength2(s)
    assert Fraction(acc, 2) == brute_wirelength(n, s.positions)


def test_wl_increase_map(toy_env):
    s0 = toy_env.reset()
    m0 = toy_env.wl_increase_map(s0)
    legal = toy_env.legal_mask(s0)
    assert (m0[legal] == 0).all() and np.isinf(m0[~legal]).all()
    s1, _, _ = toy_env.step(s0, (0, 0, 0))
    m1 = toy_env.wl_increase_map(s1)
    assert m1[0, 0, 3] == 7.0
    # occupied region of layer 0 carries the illegal marker
    assert np.isinf(m1[0, 0:2, 0:2]).all()
    for a in toy_env.legal_actions(s1):
        s2, _, _ = toy_env.step(s1, a)
        assert m1[a.z, a.y, a.x] == toy_env.total_wirelength(s2) - toy_env.total_wirelength(s1)


# ------------------------------------------------------------------- reward

def test_reward_wl_values(small_cfg):
    assert reward_wl(0, small_cfg) == 1.0
    assert reward_wl(small_cfg.diameter, small_cfg) == 0.5
    assert reward_wl(7, small_cfg) == pytest.approx(20 / 27)
    assert small_cfg.diameter == 20


@given(st.integers(0, 10**7), st.integers(0, 10**7))
def test_reward_wl_decreasing(a2, b2):
    # wirelength increases come in half-cell steps
    cfg = CanvasConfig()
    a, b = a2 / 2, b2 / 2
    if a < b:
        assert reward_wl(a, cfg) > reward_wl(b, cfg)
    assert 0 < reward_wl(a, cfg) <= 1


# --------------------------------------------------------------- congestion

def test_congestion_first_module(toy_env):
    _, r, _ = toy_env.step(toy_env.reset(), (2, 2, 0))
    assert r.c == 0.0


def test_congestion_degenerate_bbox():
    cmap = np.zeros((2, 6, 6))
    add_bbox_density(cmap, [(3, 2, 1), (3, 2, 1)])
    assert cmap.max() == 1.0 and cmap.sum() == 1.0


def test_congestion_toy3(toy_env):
    s1, _, _ = toy_env.step(toy_env.reset(), (0, 0, 0))
    _, r, _ = toy_env.step(s1, (3, 0, 0))
    # A center cell (1,1), B center cell (4,0): bbox 4 x 2 x 1 = 8 cells, two nets
    oracle = np.zeros((2, 6, 6))
    for _ in range(2):
        for x in range(1, 5):
            for y in range(0, 2):
                oracle[0, y, x] += 1 / 8
    assert r.c == pytest.approx(oracle.max()) == pytest.approx(2 / 8)


def test_congestion_map_stacked_unit_modules():
    n = build_netlist("s", [("a", 1, 1), ("b", 1, 1)], [["a", "b"]])
    env = FloorplanEnv(n, CanvasConfig(4, 4, 2))
    s1, _, _ = env.step(env.reset(), (1, 1, 0))
    _, r, _ = env.step(s1, (1, 1, 1))
    assert r.c == 0.5


# ------------------------------------------------------------------ thermal

def test_thermal_isolated_cell():
    n = build_netlist("s", [("a", 1, 1), ("b", 1, 1), ("c", 1, 1)], [])
    env = FloorplanEnv(n, CanvasConfig(6, 6, 2))
    s1, r1, _ = env.step(env.reset(), (2, 2, 0))
    assert r1.h == 1.0
    s2, r2, _ = env.step(s1, (2, 2, 1))
    assert r2.h == 1.0 and env.heat_map(s2).max() == 2.0
    _, r3, _ = env.step(s2, (5, 5, 0))
    assert r3.h == 0.0


@given(st.integers(0, 10_000))
def test_heat_matches_kernel_oracle(seed):
    rng = np.random.default_rng(seed)
    occ = rng.random((3, 5, 6)) < 0.4
    assert np.allclose(heat_map(occ), brute_heat(occ))


# ----------------------------------------------------------------- diff map

def test_difference_map(toy_env):
    s0 = toy_env.reset()
    s1, _, _ = toy_env.step(s0, (1, 3, 1))
    d = difference_map(s0, s1)
    assert d.sum() == 4 and not d[0].any() and (d[1, 3:5, 1:3] == 1).all()


@given(st.integers(0, 10_000))
def test_difference_map_area(seed):
    n = random_netlist(6, 5, seed, max_dim=3)
    env = FloorplanEnv(n, CanvasConfig(7, 7, 2))
    states, _ = random_walk(env, np.random.default_rng(seed))
    for before, after in zip(states, states[1:]):
        m = before.next_module
        d = difference_map(before, after)
        a = after.positions[m]
        assert d.sum() == env.areas[m]
        assert not np.delete(d, a.z, axis=0).any()


@given(st.integers(0, 10_000))
def test_reward_ranges(seed):
    n = random_netlist(8, 12, seed, max_dim=3)
    env = FloorplanEnv(n, CanvasConfig(8, 8, 2))
    _, rewards = random_walk(env, np.random.default_rng(seed))
    for r in rewards:
        assert 0 < r.w <= 1 and r.c >= 0 and r.h >= 0
        assert all(np.isfinite(r))
