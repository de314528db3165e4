"""Compact actor/critic function approximators.

A fixed-length feature vector summarizes the trajectory-so-far; a two-hidden-
layer tanh network maps it to three outputs. The actor squashes its logits
into (0, 1) and the critic clamps them at zero. Gradients are analytic and
the optimizer is Adam with decoupled weight decay.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import CanvasConfig
from .env import CanvasState, FloorplanEnv, difference_map
from .sldas import normalize

POOL = 6
ROLES = ("actor", "critic")
# normalized RTG features are clipped to keep inference-time decrements finite
RTG_CLIP = 50.0


# ----------------------------------------------------------------- features

@dataclass(frozen=True)
class RtgStats:
    mu: tuple[float, float, float]
    sigma: tuple[float, float, float]

    def normalize(self, g) -> np.ndarray:
        return (np.asarray(g, dtype=float) - np.asarray(self.mu)) / np.asarray(self.sigma)

    @property
    def critic_scale(self) -> np.ndarray:
        """Per-component divisor for critic targets; keeps them nonnegative."""
        return np.maximum(np.asarray(self.mu) + np.asarray(self.sigma), 1e-6)

    def to_dict(self) -> dict:
        return {"mu": list(self.mu), "sigma": list(self.sigma)}

    @classmethod
    def from_dict(cls, d: dict) -> "RtgStats":
        return cls(tuple(map(float, d["mu"])), tuple(map(float, d["sigma"])))


@dataclass(frozen=True)
class FeatureMaps:
    wl_increase: np.ndarray   # (Z, H, W), inf on illegal anchors
    diff: np.ndarray          # (Z, H, W) in {0, 1}


def feature_dim(cfg: CanvasConfig) -> int:
    return 3 * POOL * POOL * cfg.Z + 13


def pool_grid(grid: np.ndarray) -> np.ndarray:
    """Average-pool each (H, W) layer into a 6x6 grid of near-equal tiles.

    Tiles follow ``np.array_split``; on axes shorter than 6 the surplus tiles
    are empty and pool to 0.
    """
    Z, H, W = grid.shape
    ye = np.concatenate([[0], np.cumsum([len(c) for c in np.array_split(np.arange(H), POOL)])])
    xe = np.concatenate([[0], np.cumsum([len(c) for c in np.array_split(np.arange(W), POOL)])])
    sat = np.zeros((Z, H + 1, W + 1))
    sat[:, 1:, 1:] = grid.cumsum(axis=1).cumsum(axis=2)
    y0, y1 = ye[:-1][:, None], ye[1:][:, None]
    x0, x1 = xe[:-1][None, :], xe[1:][None, :]
    sums = sat[:, y1, x1] - sat[:, y0, x1] - sat[:, y1, x0] + sat[:, y0, x0]
    counts = (y1 - y0) * (x1 - x0)
    return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)


def feature_maps(env: FloorplanEnv, s: CanvasState, prev: CanvasState | None) -> FeatureMaps:
    diff = difference_map(prev, s) if prev is not None else np.zeros(s.occupancy.shape, np.int8)
    return FeatureMaps(env.wl_increase_map(s), diff)


def features(env: FloorplanEnv, s: CanvasState, maps: FeatureMaps, rtg, stats: RtgStats,
             prev_action=None, include_rtg: bool = True) -> np.ndarray:
    """Feature vector of length ``108*Z + 13`` for the module about to be placed."""
    cfg = env.cfg
    m = s.next_module
    if m is None:
        raise ValueError("no module left to place")
    d = cfg.diameter
    occ = (s.occupancy != -1).astype(float)
    finite = np.isfinite(maps.wl_increase)
    wl = np.zeros(maps.wl_increase.shape)
    wl[finite] = d / (d + maps.wl_increase[finite])
    n = env.n_modules
    max_deg = int(env.degree.max()) if n else 0
    unplaced = list(s.order[s.t:])
    module_feats = [
        env.widths[m] / cfg.W,
        env.heights[m] / cfg.H,
        env.areas[m] / (cfg.W * cfg.H),
        env.degree[m] / max_deg if max_deg else 0.0,
        len(unplaced) / n,
        env.areas[unplaced].sum() / env.areas.sum(),
    ]
    if include_rtg:
        g = np.clip(stats.normalize(rtg), -RTG_CLIP, RTG_CLIP)
    else:
        g = np.zeros(3)
    prev = normalize(prev_action, cfg) if prev_action is not None else np.zeros(3)
    return np.concatenate([
        pool_grid(occ).ravel(),
        pool_grid(wl).ravel(),
        pool_grid(maps.diff.astype(float)).ravel(),
        np.asarray(module_feats, dtype=float),
        g,
        [s.t / n],
        prev,
    ])


# ------------------------------------------------------------------ network

@dataclass
class NetParams:
    role: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if not self.m:
            self.m = [np.zeros_like(p) for p in self.params()]
            self.v = [np.zeros_like(p) for p in self.params()]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, flat: list[np.ndarray]) -> None:
        self.weights = list(flat[0::2])
        self.biases = list(flat[1::2])

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def copy(self) -> "NetParams":
        return NetParams(self.role, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         [a.copy() for a in self.m], [a.copy() for a in self.v], self.step)


def init_params(role: str, in_dim: int, hidden=(256, 256), seed: int = 0) -> NetParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    dims = (in_dim, *hidden, 3)
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return NetParams(role, ws, bs)


def _raw_forward(p: NetParams, X: np.ndarray):
    acts = [X]
    h = X
    for w, b in zip(p.weights[:-1], p.biases[:-1]):
        h = np.tanh(h @ w.T + b)
        acts.append(h)
    raw = h @ p.weights[-1].T + p.biases[-1]
    return raw, acts


def _activate(role: str, raw: np.ndarray) -> np.ndarray:
    if role == "actor":
        return 0.5 * (np.tanh(raw) + 1.0)
    return np.maximum(raw, 0.0)


def forward(p: NetParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != p.dims[0]:
        raise ValueError(f"{p.role} expects {p.dims[0]} inputs, got {X.shape[1]}")
    out = _activate(p.role, _raw_forward(p, X)[0])
    return out[0] if single else out


def actor_forward(p: NetParams, x) -> np.ndarray:
    return forward(p, x)


def critic_input(x, cand_norm) -> np.ndarray:
    """Append normalized candidate action(s) to the feature vector (broadcast over candidates)."""
    cand = np.atleast_2d(np.asarray(cand_norm, dtype=float))
    xs = np.broadcast_to(np.asarray(x, dtype=float), (len(cand), len(x)))
    return np.concatenate([xs, cand], axis=1)


def critic_forward(p: NetParams, x, cand_norm) -> np.ndarray:
    out = forward(p, critic_input(x, cand_norm))
    return out[0] if np.asarray(cand_norm).ndim == 1 else out


# -------------------------------------------------------------------- losses

def l1_loss(pred, target) -> float:
    """Mean over the batch of the summed absolute component error."""
    d = np.abs(np.atleast_2d(pred) - np.atleast_2d(target))
    return float(d.sum(axis=1).mean())


loss_actor = l1_loss
loss_critic = l1_loss


def loss_and_grads(p: NetParams, X: np.ndarray, Y: np.ndarray):
    """Batch-mean L1 loss and its gradients, ordered like ``p.params()``.

    The L1 subgradient at a tie is 0 (``np.sign``), as is the ReLU derivative at 0.
    """
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    raw, acts = _raw_forward(p, X)
    out = _activate(p.role, raw)
    B = len(X)
    loss = float(np.abs(out - Y).sum(axis=1).mean())
    g = np.sign(out - Y) / B
    if p.role == "actor":
        t = np.tanh(raw)
        g = g * 0.5 * (1.0 - t * t)
    else:
        g = g * (raw > 0)
    grads_w, grads_b = [], []
    for i in range(len(p.weights) - 1, -1, -1):
        grads_w.append(g.T @ acts[i])
        grads_b.append(g.sum(axis=0))
        if i:
            g = (g @ p.weights[i]) * (1.0 - acts[i] * acts[i])
    grads = []
    for w, b in zip(reversed(grads_w), reversed(grads_b)):
        grads += [w, b]
    return loss, grads


def backward(p: NetParams, X, Y) -> list[np.ndarray]:
    return loss_and_grads(p, X, Y)[1]


# ----------------------------------------------------------------- optimizer

BETA1, BETA2, EPS = 0.9, 0.999, 1e-8


def optimizer_step(p: NetParams, grads, lr: float, weight_decay: float = 1e-4) -> NetParams:
    """One AdamW step, in place; returns ``p`` for chaining."""
    p.step += 1
    bc1 = 1.0 - BETA1 ** p.step
    bc2 = 1.0 - BETA2 ** p.step
    new = []
    for param, g, m, v in zip(p.params(), grads, p.m, p.v):
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        upd = param * (1.0 - lr * weight_decay)
        upd = upd - lr * (m / bc1) / (np.sqrt(v / bc2) + EPS)
        new.append(upd)
    p.set_params(new)
    return p


# ---------------------------------------------------------------- checkpoint

MAGIC = "sgf-ckpt"
VERSION = "v1"


def _line(a: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in a.ravel())


def dumps_checkpoint(p: NetParams) -> str:
    head = f"{MAGIC} {VERSION} {p.role} " + " ".join(str(d) for d in p.dims)
    lines = [head]
    lines += [_line(a) for a in p.params()]
    lines += [_line(a) for a in p.m]
    lines += [_line(a) for a in p.v]
    lines.append(str(p.step))
    return "\n".join(lines) + "\n"


def loads_checkpoint(text: str) -> NetParams:
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) < 5 or head[0] != MAGIC or head[1] != VERSION:
        raise ValueError("not an sgf-ckpt v1 file")
    role = head[2]
    dims = [int(d) for d in head[3:]]
    shapes = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        shapes += [(fan_out, fan_in), (fan_out,)]
    n = len(shapes)
    if len(lines) != 1 + 3 * n + 1:
        raise ValueError(f"checkpoint has {len(lines)} lines, expected {3 * n + 2}")

    def arrays(offset):
        out = []
        for i, shp in enumerate(shapes):
            vals = np.array([float(t) for t in lines[1 + offset + i].split()])
            if vals.size != int(np.prod(shp)):
                raise ValueError(f"checkpoint line {2 + offset + i}: wrong value count")
            out.append(vals.reshape(shp))
        return out

    flat = arrays(0)
    p = NetParams(role, list(flat[0::2]), list(flat[1::2]), arrays(n), arrays(2 * n),
                  int(lines[1 + 3 * n]))
    return p


def save_checkpoint(p: NetParams, path) -> None:
    Path(path).write_text(dumps_checkpoint(p))


def load_checkpoint(path) -> NetParams:
    return loads_checkpoint(Path(path).read_text())
