"""Desk-scale studies shared by ``scripts/`` and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pipeline as P
from .config import CanvasConfig, TrainConfig
from .env import FloorplanEnv
from .netlist import Netlist, random_netlist, toy3


def toy_setup() -> tuple[Netlist, CanvasConfig]:
    return toy3(), CanvasConfig(6, 6, 2)


def ten_module_setup() -> tuple[Netlist, CanvasConfig]:
    """Fixed 10-module, 14-net netlist on a 16x16x2 canvas."""
    return random_netlist(10, 14, seed=3, max_dim=4, name="r10"), CanvasConfig(16, 16, 2)


@dataclass
class CriticRun:
    seed: int
    train_curve: list[float]
    held_curve: list[float]
    mse: np.ndarray        # (T, 3) per-timestep held-out squared error
    mse_var: np.ndarray

    @property
    def ratio(self) -> float:
        return self.held_curve[-1] / self.held_curve[0]


def critic_from_random(netlist: Netlist, cfg: CanvasConfig, seed: int, n_train: int = 160,
                       n_held: int = 40, hyper: TrainConfig | None = None) -> CriticRun:
    """Train the critic on random episodes only and score it on unseen random episodes."""
    env = FloorplanEnv(netlist, cfg)
    trajs = P.gen_random(netlist, cfg, n_train + n_held, seed)
    train, held = trajs[:n_train], trajs[n_train:]
    stats = P.dataset_stats(train)
    hyper = hyper or TrainConfig(seed=seed)
    res = P.train("critic", P.build_samples(env, train, stats), hyper,
                  P.build_samples(env, held, stats))
    mse, var = P.critic_error_study(env, res.params, stats, held)
    return CriticRun(seed, res.losses, res.held_out, mse, var)


def train_policy(netlist: Netlist, cfg: CanvasConfig, seed: int, count: int = 200,
                 k: int = 5, hyper: TrainConfig | None = None) -> P.Policy:
    env = FloorplanEnv(netlist, cfg)
    trajs = P.gen_random(netlist, cfg, count, seed)
    stats = P.dataset_stats(trajs)
    samples = P.build_samples(env, trajs, stats)
    hyper = hyper or TrainConfig(seed=seed)
    actor = P.train("actor", samples, hyper).params
    critic = P.train("critic", samples, hyper).params
    return P.Policy(env, actor, critic, stats, k=k)


def random_baseline(netlist: Netlist, cfg: CanvasConfig, n: int = 30, seed: int = 1000) -> float:
    """Mean final wirelength of ``n`` uniform-random complete placements."""
    return float(np.mean([t.wirelength for t in P.gen_random(netlist, cfg, n, seed)]))


def sgf_placement(policy: P.Policy, seed: int, samples: int = 3, noise: float = 0.02) -> float:
    """Final wirelength of the best of ``samples`` rollouts from the default prompt."""
    trajs, _, best = P.sample_rollouts(policy, P.make_prompt(policy.stats), samples, seed, noise)
    return trajs[best].wirelength


def bound_study(policy: P.Policy, rollouts: int = 20, noise: float = 0.02,
                component: str = "w") -> list[P.BoundRow]:
    rows = []
    for seed in range(rollouts):
        rows += P.bound_check(policy, P.make_prompt(policy.stats), component, seed=seed, noise=noise)
    return rows
