"""Random-trajectory generation, return-to-go labeling, offline training,
prompted rollouts, and the critic-error and error-bound studies."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .approx import (NetParams, RtgStats, actor_forward, critic_forward, critic_input,
                     feature_maps, features, init_params, loss_and_grads,
                     optimizer_step, forward)
from .config import CanvasConfig, TrainConfig
from .env import Anchor, CanvasState, FloorplanEnv, RewardVector
from .netlist import Netlist
from .sldas import CandidateSet, distances, knn, normalize, select_action

MAX_RETRIES = 100
COMPONENTS = {"w": 0, "c": 1, "h": 2}


class RetryExhausted(RuntimeError):
    pass


class ActionSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class StepRecord:
    t: int
    action: Anchor
    reward: RewardVector
    rtg: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class Trajectory:
    netlist: str
    hash: str
    seed: int
    steps: tuple[StepRecord, ...]
    failed: bool = False
    totals: dict = field(default_factory=dict)
    episode: int = 0
    attempt: int = 0

    @property
    def g0(self) -> np.ndarray:
        return np.asarray(self.steps[0].rtg)

    @property
    def wirelength(self) -> float:
        return self.totals["wirelength"]


# ------------------------------------------------------------------ labeling

def label_rtg(traj: Trajectory) -> Trajectory:
    """Attach suffix sums of received rewards: rtg_t = r_t + rtg_{t+1}."""
    acc = (0.0, 0.0, 0.0)
    out = []
    for rec in reversed(traj.steps):
        acc = tuple(float(r + a) for r, a in zip(rec.reward, acc))
        out.append(replace(rec, rtg=acc))
    return replace(traj, steps=tuple(reversed(out)))


def dataset_stats(trajs) -> RtgStats:
    """Mean and population std of episode returns, std floored at 1e-6."""
    trajs = list(trajs)
    if not trajs:
        raise ValueError("empty dataset")
    g0 = np.array([t.g0 for t in trajs])
    mu = g0.mean(axis=0)
    sigma = np.maximum(g0.std(axis=0), 1e-6)
    return RtgStats(tuple(map(float, mu)), tuple(map(float, sigma)))


def make_prompt(stats: RtgStats) -> tuple[float, float, float]:
    mu, sigma = stats.mu, stats.sigma
    return (mu[0] + 3 * sigma[0], mu[1], mu[2])


# --------------------------------------------------------------- generation

def random_episode(env: FloorplanEnv, rng: np.random.Generator, seed: int = 0,
                   episode: int = 0, attempt: int = 0) -> Trajectory:
    s = env.reset()
    steps = []
    failed = False
    while not s.done:
        legal = env.legal_array(s)
        if len(legal) == 0:
            failed = True
            break
        a = Anchor(*map(int, legal[rng.integers(len(legal))]))
        s2, r, _ = env.step(s, a)
        steps.append(StepRecord(s.t, a, r))
        s = s2
    traj = Trajectory(env.netlist.name, env.netlist.content_hash(), seed, tuple(steps),
                      failed, env.metrics(s), episode, attempt)
    return label_rtg(traj) if steps else traj


def _gen_one(args):
    netlist, cfg, seed, i = args
    env = FloorplanEnv(netlist, cfg)
    for attempt in range(MAX_RETRIES + 1):
        rng = np.random.default_rng([seed, i, attempt])
        traj = random_episode(env, rng, seed, i, attempt)
        if not traj.failed:
            return traj
    raise RetryExhausted(f"episode {i}: no complete placement after {MAX_RETRIES} retries")


def gen_random(netlist: Netlist, cfg: CanvasConfig, count: int, seed: int,
               jobs: int = 1) -> list[Trajectory]:
    """``count`` complete uniformly-random trajectories, labeled with RTGs.

    Episode ``i``, attempt ``r`` draws from ``default_rng([seed, i, r])``, so
    the output does not depend on ``jobs``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    tasks = [(netlist, cfg, seed, i) for i in range(count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_gen_one, tasks, chunksize=max(1, count // (4 * jobs))))
    return [_gen_one(t) for t in tasks]


def replay(env: FloorplanEnv, traj: Trajectory):
    """Re-execute stored actions; yields (state_before, prev_state, record, reward)."""
    s, prev = env.reset(), None
    for rec in traj.steps:
        s2, r, _ = env.step(s, rec.action)
        yield s, prev, rec, r
        prev, s = s, s2


# ----------------------------------------------------------------- storage

def dumps_trajectories(trajs) -> str:
    buf = io.StringIO()
    for tr in trajs:
        head = {"netlist": tr.netlist, "hash": tr.hash, "seed": tr.seed,
                "episode": tr.episode, "attempt": tr.attempt, "failed": tr.failed,
                "steps": len(tr.steps), "totals": tr.totals}
        buf.write(json.dumps(head) + "\n")
        for rec in tr.steps:
            buf.write(json.dumps({"t": rec.t, "action": list(rec.action),
                                  "reward": list(rec.reward),
                                  "rtg": list(rec.rtg) if rec.rtg is not None else None}) + "\n")
    return buf.getvalue()


def loads_trajectories(text: str) -> list[Trajectory]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    out = []
    i = 0
    while i < len(lines):
        try:
            head = json.loads(lines[i])
            n = int(head["steps"])
            steps = []
            for ln in lines[i + 1:i + 1 + n]:
                d = json.loads(ln)
                steps.append(StepRecord(int(d["t"]), Anchor(*d["action"]), RewardVector(*d["reward"]),
                                        tuple(d["rtg"]) if d["rtg"] is not None else None))
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"trajectory file line {i + 1}: {e}") from None
        if len(steps) != n:
            raise ValueError(f"trajectory file line {i + 1}: truncated episode")
        out.append(Trajectory(head["netlist"], head["hash"], head["seed"], tuple(steps),
                              bool(head["failed"]), head["totals"], head.get("episode", 0),
                              head.get("attempt", 0)))
        i += 1 + n
    return out


# ----------------------------------------------------------------- datasets

@dataclass
class Samples:
    actor_x: np.ndarray
    actor_y: np.ndarray
    critic_x: np.ndarray
    critic_y: np.ndarray
    t: np.ndarray          # timestep of each row
    episode: np.ndarray    # trajectory index of each row


def build_samples(env: FloorplanEnv, trajs, stats: RtgStats) -> Samples:
    """Actor rows use the previous action; critic rows append the current action."""
    cfg = env.cfg
    scale = stats.critic_scale
    ax, ay, cx, cy, ts, eps = [], [], [], [], [], []
    for ei, tr in enumerate(trajs):
        prev_a = None
        for s, prev_s, rec, _ in replay(env, tr):
            maps = feature_maps(env, s, prev_s)
            a_norm = normalize(rec.action, cfg)
            ax.append(features(env, s, maps, rec.rtg, stats, prev_a))
            ay.append(a_norm)
            xc = features(env, s, maps, rec.rtg, stats, prev_a, include_rtg=False)
            cx.append(critic_input(xc, a_norm)[0])
            cy.append(np.asarray(rec.rtg) / scale)
            ts.append(rec.t)
            eps.append(ei)
            prev_a = rec.action
    return Samples(np.array(ax), np.array(ay), np.array(cx), np.array(cy),
                   np.array(ts), np.array(eps))


# ----------------------------------------------------------------- training

@dataclass
class TrainResult:
    params: NetParams
    losses: list[float]
    held_out: list[float]


def fit(p: NetParams, X: np.ndarray, Y: np.ndarray, hyper: TrainConfig, lr: float,
        X_val=None, Y_val=None) -> TrainResult:
    """Mini-batch AdamW on the L1 loss; the loss curve holds per-epoch means."""
    if len(X) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng([hyper.seed, 1])
    losses, held = [], []
    n = len(X)
    for _ in range(hyper.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = perm[start:start + hyper.batch_size]
            loss, grads = loss_and_grads(p, X[idx], Y[idx])
            optimizer_step(p, grads, lr, hyper.weight_decay)
            total += loss * len(idx)
        losses.append(total / n)
        if X_val is not None:
            held.append(float(np.abs(forward(p, X_val) - Y_val).sum(axis=1).mean()))
    return TrainResult(p, losses, held)


def output_bias_init(role: str, Y: np.ndarray) -> np.ndarray:
    """Output bias that makes the untrained net emit the mean target.

    For the critic this keeps the ReLU outputs alive at the start of training.
    """
    mean = Y.mean(axis=0)
    if role == "actor":
        return np.arctanh(np.clip(2 * mean - 1, -0.99, 0.99))
    return mean.copy()


def train(role: str, samples: Samples, hyper: TrainConfig,
          held_out: Samples | None = None) -> TrainResult:
    if role not in ("actor", "critic"):
        raise ValueError(f"unknown role {role!r}")
    X, Y = (samples.actor_x, samples.actor_y) if role == "actor" else (samples.critic_x, samples.critic_y)
    Xv = Yv = None
    if held_out is not None:
        Xv, Yv = ((held_out.actor_x, held_out.actor_y) if role == "actor"
                  else (held_out.critic_x, held_out.critic_y))
    lr = hyper.lr_actor if role == "actor" else hyper.lr_critic
    seed = hyper.seed * 2 + (0 if role == "actor" else 1)
    p = init_params(role, X.shape[1], hyper.hidden, seed)
    p.biases[-1] = output_bias_init(role, Y)
    return fit(p, X, Y, hyper, lr, Xv, Yv)


# ------------------------------------------------------------------ rollout

@dataclass
class StepTrace:
    t: int
    rtg: np.ndarray            # conditioning target before the step
    alpha: np.ndarray          # proposal fed to k-NN (after any noise)
    candidates: CandidateSet
    predictions: np.ndarray | None   # denormalized critic RTGs per candidate
    chosen: int
    state: CanvasState
    prev_state: CanvasState | None
    prev_action: Anchor | None


@dataclass
class Policy:
    env: FloorplanEnv
    actor: NetParams
    critic: NetParams
    stats: RtgStats
    k: int = 5
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def critic_predictions(self, s, maps, prev_a, anchors) -> np.ndarray:
        x = features(self.env, s, maps, None, self.stats, prev_a, include_rtg=False)
        return critic_forward(self.critic, x, normalize(anchors, self.env.cfg)) * self.stats.critic_scale

    def run(self, s: CanvasState, prev_s, prev_a, g, rng=None, noise: float = 0.0,
            traces: list | None = None):
        """Follow the policy from ``s`` until done or a dead end.

        Returns (steps, final state, failed).
        """
        env = self.env
        g = np.asarray(g, dtype=float)
        steps = []
        while not s.done:
            legal = env.legal_array(s)
            if len(legal) == 0:
                return steps, s, True
            maps = feature_maps(env, s, prev_s)
            alpha = actor_forward(self.actor, features(env, s, maps, g, self.stats, prev_a))
            if noise and rng is not None:
                alpha = np.clip(alpha + rng.uniform(-noise, noise, 3), 0.0, 1.0)
            cands = knn(alpha, legal, self.k, env.cfg)
            preds = None
            chosen = 0
            if len(cands) > 1:
                preds = self.critic_predictions(s, maps, prev_a, cands.anchors)
                chosen = select_action(preds, g, self.weights)
            a = Anchor(*map(int, cands.anchors[chosen]))
            if traces is not None:
                traces.append(StepTrace(s.t, g.copy(), alpha, cands, preds, chosen, s, prev_s, prev_a))
            s2, r, _ = env.step(s, a)
            steps.append(StepRecord(s.t, a, r))
            g = g - np.asarray(r)
            prev_s, prev_a, s = s, a, s2
        return steps, s, False


def rollout(policy: Policy, prompt, seed: int | None = None, noise: float = 0.0,
            traces: list | None = None) -> tuple[Trajectory, CanvasState]:
    """One prompted episode; RTG is decremented by each received reward."""
    env = policy.env
    rng = np.random.default_rng(seed) if seed is not None else None
    steps, s, failed = policy.run(env.reset(), None, None, prompt, rng, noise, traces)
    traj = Trajectory(env.netlist.name, env.netlist.content_hash(),
                      -1 if seed is None else seed, tuple(steps), failed, env.metrics(s))
    return (label_rtg(traj) if steps else traj), s


def best_of_n(trajs) -> int:
    """Index of the completed trajectory with the smallest final wirelength."""
    best = None
    for i, tr in enumerate(trajs):
        if tr.failed:
            continue
        if best is None or tr.wirelength < trajs[best].wirelength:
            best = i
    if best is None:
        raise RuntimeError("all rollouts failed")
    return best


def sample_rollouts(policy: Policy, prompt, n: int = 3, seed: int = 0, noise: float = 0.02):
    """``n`` noisy rollouts (attempt ``i`` seeded by ``[seed, i]``) and the best index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    runs = [_seeded(policy, prompt, [seed, i], noise) for i in range(n)]
    trajs = [tr for tr, _ in runs]
    best = best_of_n(trajs)
    return trajs, [s for _, s in runs], best


def _seeded(policy, prompt, seed_seq, noise):
    env = policy.env
    rng = np.random.default_rng(seed_seq)
    steps, s, failed = policy.run(env.reset(), None, None, prompt, rng, noise)
    traj = Trajectory(env.netlist.name, env.netlist.content_hash(), int(seed_seq[0]),
                      tuple(steps), failed, env.metrics(s), int(seed_seq[1]))
    return (label_rtg(traj) if steps else traj), s


# --------------------------------------------------------- critic error study

def critic_error_study(env: FloorplanEnv, critic: NetParams, stats: RtgStats, held_out):
    """Per-timestep mean and variance of squared critic error at the taken action.

    Units are the critic's normalized RTG. Returns (mean, var), each (T, 3).
    """
    held_out = list(held_out)
    samples = build_samples(env, held_out, stats)
    pred = forward(critic, samples.critic_x)
    sq = (pred - samples.critic_y) ** 2
    T = env.n_modules
    mean = np.zeros((T, 3))
    var = np.zeros((T, 3))
    for t in range(T):
        rows = sq[samples.t == t]
        if len(rows):
            mean[t] = rows.mean(axis=0)
            var[t] = rows.var(axis=0)
    return mean, var


def error_curve_csv(mean: np.ndarray, var: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mse_w", "mse_c", "mse_h", "var_w", "var_c", "var_h"])
    for t in range(len(mean)):
        w.writerow([t, *map(repr, map(float, mean[t])), *map(repr, map(float, var[t]))])
    return buf.getvalue()


# ------------------------------------------------------------- bound check

@dataclass(frozen=True)
class BoundRow:
    t: int
    Delta: float
    L_hat: float
    d: float
    delta: float
    psi_k: float
    eps_c: float
    holds: bool
    gap_to_selected: float   # ||a* - selected|| in normalized units

    @property
    def triangle_ok(self) -> bool:
        # d_t <= delta_t + psi_k, with slack for float rounding of three square roots
        return self.d <= self.delta + self.psi_k + 1e-12


def q_values(policy: Policy, tr: StepTrace, anchors: np.ndarray, component: str = "w") -> np.ndarray:
    """Deterministic action values: place ``a``, then follow the greedy policy to the end.

    For penalty components the value is the negated penalty sum, so larger is better.
    """
    ci = COMPONENTS[component]
    env = policy.env
    out = np.empty(len(anchors))
    for i, a in enumerate(anchors):
        a = Anchor(*map(int, a))
        s2, r, _ = env.step(tr.state, a)
        rest, _, _ = policy.run(s2, tr.state, a, tr.rtg - np.asarray(r))
        total = r[ci] + sum(rec.reward[ci] for rec in rest)
        out[i] = total if ci == 0 else -total
    return out


def bound_check(policy: Policy, prompt, component: str = "w", seed: int | None = None,
                noise: float = 0.0, max_actions: int = 500) -> list[BoundRow]:
    """Measure every quantity of the one-step error bound along one rollout."""
    env = policy.env
    cfg = env.cfg
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {sorted(COMPONENTS)}")
    if cfg.n_anchors > max_actions:
        raise ActionSpaceTooLarge(
            f"canvas {cfg.W}x{cfg.H}x{cfg.Z} has {cfg.n_anchors} anchors; "
            f"exhaustive bound checking is limited to {max_actions}")
    ci = COMPONENTS[component]
    traces: list[StepTrace] = []
    rollout(policy, prompt, seed=seed, noise=noise, traces=traces)
    rows = []
    for tr in traces:
        legal = env.legal_array(tr.state)
        q = q_values(policy, tr, legal, component)
        star = int(np.argmax(q))
        a_star = legal[star]
        cand = tr.candidates.anchors
        sel = cand[tr.chosen]
        sel_idx = int(np.nonzero((legal == sel).all(axis=1))[0][0])
        Delta = float(q[star] - q[sel_idx])

        pts = normalize(legal, cfg)
        dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        iu = np.triu_indices(len(legal), 1)
        L_hat = float((np.abs(q[:, None] - q[None, :])[iu] / dist[iu]).max()) if len(legal) > 1 else 0.0

        star_n = normalize(a_star, cfg)
        d = float(distances(star_n, normalize(cand, cfg)).min())
        delta = float(np.linalg.norm(tr.alpha - star_n))
        psi = tr.candidates.psi_k

        preds = tr.predictions
        if preds is None:
            maps = feature_maps(env, tr.state, tr.prev_state)
            preds = policy.critic_predictions(tr.state, maps, tr.prev_action, cand)
        cand_idx = [int(np.nonzero((legal == c).all(axis=1))[0][0]) for c in cand]
        realized = np.abs(q[cand_idx])
        eps_c = float(np.abs(preds[:, ci] - realized).max())

        holds = Delta <= L_hat * (delta + psi) + 2 * eps_c
        gap = float(np.linalg.norm(star_n - normalize(sel, cfg)))
        rows.append(BoundRow(tr.t, Delta, L_hat, d, delta, psi, eps_c, bool(holds), gap))
    return rows


def bound_csv(rows: list[BoundRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "Delta", "L_hat", "d", "delta", "psi_k", "eps_c", "holds"])
    for r in rows:
        w.writerow([r.t, repr(r.Delta), repr(r.L_hat), repr(r.d), repr(r.delta), repr(r.psi_k),
                    repr(r.eps_c), int(r.holds)])
    frac = sum(r.holds for r in rows) / len(rows) if rows else float("nan")
    w.writerow(["summary", "holds_fraction", repr(frac)])
    return buf.getvalue()
