"""Deterministic layered-grid floorplanning environment.

States are immutable snapshots; :meth:`FloorplanEnv.step` returns a new state.
Grids are indexed ``[z, y, x]``; anchors are ``(x, y, z)`` minimum corners.
Wirelength is tracked in doubled units (module centers ``(2x+w, 2y+h, 2z)``)
so that it stays an exact integer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import CanvasConfig
from .netlist import Netlist, degrees, net_count_matrix, validate

EMPTY = -1
Z_WEIGHT = 10


class Anchor(NamedTuple):
    x: int
    y: int
    z: int


class RewardVector(NamedTuple):
    w: float
    c: float
    h: float


class IllegalAction(ValueError):
    """Raised when a step targets an out-of-bounds or overlapping anchor."""


@dataclass(frozen=True, eq=False)
class CanvasState:
    occupancy: np.ndarray           # (Z, H, W) module id or EMPTY
    positions: tuple                # per module id: Anchor | None
    t: int
    order: tuple[int, ...]

    @property
    def done(self) -> bool:
        return self.t >= len(self.order)

    @property
    def next_module(self) -> int | None:
        return None if self.done else self.order[self.t]

    def placed(self) -> list[int]:
        return list(self.order[:self.t])


def reward_wl(dwl: float, cfg: CanvasConfig) -> float:
    """Wirelength score in (0, 1]; ``dwl`` in cell units."""
    if dwl < 0:
        raise ValueError("wirelength increase must be nonnegative")
    d = cfg.diameter
    return d / (d + dwl)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class FloorplanEnv:
    def __init__(self, netlist: Netlist, cfg: CanvasConfig = CanvasConfig()):
        problems = validate(netlist, cfg)
        if problems:
            raise ValueError("; ".join(problems))
        self.netlist = netlist
        self.cfg = cfg
        self.M = net_count_matrix(netlist)
        self.degree = degrees(self.M)
        self.widths = np.array([m.width for m in netlist.modules], dtype=np.int64)
        self.heights = np.array([m.height for m in netlist.modules], dtype=np.int64)
        self.areas = self.widths * self.heights
        # decreasing area, ties by ascending id
        self.order = tuple(sorted(range(netlist.n_modules), key=lambda i: (-self.areas[i], i)))
        self.net_pins = [np.array(net.pins) for net in netlist.nets]

    @property
    def n_modules(self) -> int:
        return self.netlist.n_modules

    def reset(self) -> CanvasState:
        cfg = self.cfg
        occ = np.full((cfg.Z, cfg.H, cfg.W), EMPTY, dtype=np.int32)
        return CanvasState(_frozen(occ), (None,) * self.n_modules, 0, self.order)

    # ------------------------------------------------------------ legality

    def legal_mask(self, s: CanvasState) -> np.ndarray:
        """Boolean (Z, H, W) grid, True where the next module's anchor is legal."""
        cfg = self.cfg
        mask = np.zeros((cfg.Z, cfg.H, cfg.W), dtype=bool)
        m = s.next_module
        if m is None:
            return mask
        w, h = int(self.widths[m]), int(self.heights[m])
        filled = (s.occupancy != EMPTY).astype(np.int64)
        sat = np.zeros((cfg.Z, cfg.H + 1, cfg.W + 1), dtype=np.int64)
        sat[:, 1:, 1:] = filled.cumsum(axis=1).cumsum(axis=2)
        win = sat[:, h:, w:] - sat[:, :-h, w:] - sat[:, h:, :-w] + sat[:, :-h, :-w]
        mask[:, :cfg.H - h + 1, :cfg.W - w + 1] = win == 0
        return mask

    def legal_array(self, s: CanvasState) -> np.ndarray:
        """Legal anchors as an (n, 3) int array of (x, y, z), lexicographically sorted."""
        z, y, x = np.nonzero(self.legal_mask(s))
        pts = np.stack([x, y, z], axis=1)
        return pts[np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))]

    def legal_actions(self, s: CanvasState) -> list[Anchor]:
        return [Anchor(*map(int, p)) for p in self.legal_array(s)]

    def is_dead_end(self, s: CanvasState) -> bool:
        return not s.done and not self.legal_mask(s).any()

    def check(self, s: CanvasState, a) -> str | None:
        """Reason the anchor is illegal for the next module, or None."""
        if s.done:
            return "episode finished"
        m = s.next_module
        x, y, z = a
        w, h = int(self.widths[m]), int(self.heights[m])
        cfg = self.cfg
        if not (0 <= x <= cfg.W - w and 0 <= y <= cfg.H - h and 0 <= z < cfg.Z):
            return "out of bounds"
        if (s.occupancy[z, y:y + h, x:x + w] != EMPTY).any():
            return "overlap"
        return None

    # ------------------------------------------------------------ transition

    def step(self, s: CanvasState, a) -> tuple[CanvasState, RewardVector, bool]:
        reason = self.check(s, a)
        if reason is not None:
            raise IllegalAction(f"anchor {tuple(a)}: {reason}")
        a = Anchor(*map(int, a))
        m = s.next_module
        dwl2 = self.delta_wl2(s, a)
        occ = s.occupancy.copy()
        occ[a.z, a.y:a.y + self.heights[m], a.x:a.x + self.widths[m]] = m
        pos = list(s.positions)
        pos[m] = a
        s2 = CanvasState(_frozen(occ), tuple(pos), s.t + 1, s.order)
        c = max(0.0, float(self.congestion_map(s2).max()) - float(self.congestion_map(s).max()))
        h = max(0.0, float(self.heat_map(s2).max()) - float(self.heat_map(s).max()))
        r = RewardVector(reward_wl(dwl2 / 2, self.cfg), c, h)
        return s2, r, s2.done

    # ------------------------------------------------------------ wirelength

    def center2(self, m: int, a) -> tuple[int, int, int]:
        return 2 * a[0] + int(self.widths[m]), 2 * a[1] + int(self.heights[m]), 2 * a[2]

    def delta_wl2(self, s: CanvasState, a) -> int:
        """Doubled-unit wirelength added by placing the next module at ``a``."""
        m = s.next_module
        cx, cy, cz = self.center2(m, a)
        total = 0
        for j in s.placed():
            mij = int(self.M[m, j])
            if mij:
                jx, jy, jz = self.center2(j, s.positions[j])
                total += mij * (abs(cx - jx) + abs(cy - jy) + Z_WEIGHT * abs(cz - jz))
        return total

    def total_wirelength2(self, s: CanvasState) -> int:
        """Exact doubled-unit wirelength over all placed pairs, from scratch."""
        placed = [i for i, p in enumerate(s.positions) if p is not None]
        total = 0
        for i, a in enumerate(placed):
            ca = self.center2(a, s.positions[a])
            for b in placed[i + 1:]:
                mab = int(self.M[a, b])
                if mab:
                    cb = self.center2(b, s.positions[b])
                    total += mab * (abs(ca[0] - cb[0]) + abs(ca[1] - cb[1])
                                    + Z_WEIGHT * abs(ca[2] - cb[2]))
        return total

    def total_wirelength(self, s: CanvasState) -> float:
        return self.total_wirelength2(s) / 2

    def wl_increase_map(self, s: CanvasState) -> np.ndarray:
        """Per-anchor wirelength increase (cell units); ``inf`` on illegal anchors."""
        cfg = self.cfg
        m = s.next_module
        out = np.full((cfg.Z, cfg.H, cfg.W), np.inf)
        if m is None:
            return out
        mask = self.legal_mask(s)
        zz, yy, xx = np.meshgrid(np.arange(cfg.Z), np.arange(cfg.H), np.arange(cfg.W),
                                 indexing="ij")
        cx = 2 * xx + self.widths[m]
        cy = 2 * yy + self.heights[m]
        cz = 2 * zz
        acc = np.zeros((cfg.Z, cfg.H, cfg.W), dtype=np.int64)
        for j in s.placed():
            mij = int(self.M[m, j])
            if mij:
                jx, jy, jz = self.center2(j, s.positions[j])
                acc += mij * (np.abs(cx - jx) + np.abs(cy - jy) + Z_WEIGHT * np.abs(cz - jz))
        out[mask] = acc[mask] / 2
        return out

    # ------------------------------------------------------------ proxies

    def congestion_map(self, s: CanvasState) -> np.ndarray:
        """Bounding-box density of every net with at least two placed pins."""
        cfg = self.cfg
        cmap = np.zeros((cfg.Z, cfg.H, cfg.W))
        for pins in self.net_pins:
            cells = [self._center_cell(p, s.positions[p]) for p in pins
                     if s.positions[p] is not None]
            if len(cells) >= 2:
                add_bbox_density(cmap, cells)
        return cmap

    def _center_cell(self, m: int, a) -> tuple[int, int, int]:
        cx, cy, _ = self.center2(m, a)
        return cx // 2, cy // 2, a[2]

    def heat_map(self, s: CanvasState) -> np.ndarray:
        return heat_map(s.occupancy != EMPTY)

    def metrics(self, s: CanvasState) -> dict:
        return {
            "wirelength": self.total_wirelength(s),
            "max_congestion": float(self.congestion_map(s).max()),
            "max_heat": float(self.heat_map(s).max()),
        }


def add_bbox_density(cmap: np.ndarray, cells) -> None:
    """Add ``1/|bbox|`` over the inclusive bounding box of ``(x, y, z)`` cells."""
    xs, ys, zs = zip(*cells)
    x0, x1, y0, y1, z0, z1 = min(xs), max(xs), min(ys), max(ys), min(zs), max(zs)
    vol = (x1 - x0 + 1) * (y1 - y0 + 1) * (z1 - z0 + 1)
    cmap[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1] += 1.0 / vol


LATERAL_HEAT = 0.5
VERTICAL_HEAT = 1.0


def heat_map(occupied: np.ndarray) -> np.ndarray:
    """Occupancy convolved with the 7-point heat kernel (center 1, lateral 0.5, vertical 1)."""
    occ = occupied.astype(float)
    heat = occ.copy()
    heat[:, :, 1:] += LATERAL_HEAT * occ[:, :, :-1]
    heat[:, :, :-1] += LATERAL_HEAT * occ[:, :, 1:]
    heat[:, 1:, :] += LATERAL_HEAT * occ[:, :-1, :]
    heat[:, :-1, :] += LATERAL_HEAT * occ[:, 1:, :]
    heat[1:] += VERTICAL_HEAT * occ[:-1]
    heat[:-1] += VERTICAL_HEAT * occ[1:]
    return heat


def difference_map(before: CanvasState, after: CanvasState) -> np.ndarray:
    """1 on cells occupied in ``after`` but empty in ``before``."""
    return ((after.occupancy != EMPTY) & (before.occupancy == EMPTY)).astype(np.int8)


def placement_json(env: FloorplanEnv, s: CanvasState) -> dict:
    return {m.name: {"x": p.x, "y": p.y, "z": p.z}
            for m, p in zip(env.netlist.modules, s.positions) if p is not None}
