"""Command-line entry point: ``sgf <command> [flags]``.

Exit codes: 0 ok, 1 usage, 2 bad input data, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline as P
from .approx import RtgStats, load_checkpoint, save_checkpoint
from .config import CanvasConfig, RunConfig
from .env import FloorplanEnv, placement_json
from .netlist import load_netlist, parse_gsrc, serialize_canonical
from .render import render_svg

EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        _, _, command = self.prog.partition(" ")
        raise UsageError(f"{command}: {message}" if command else message)


# ------------------------------------------------------------ arg types

def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def canvas_arg(text: str) -> CanvasConfig:
    try:
        return CanvasConfig.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected w,c,h, got {text!r}")
    return tuple(float(p) for p in parts)


def pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated sizes, got {text!r}")
    return tuple(positive_int(p) for p in parts)


# --------------------------------------------------------------- helpers

def run_config(args) -> RunConfig:
    cfg = RunConfig.from_toml(args.config) if args.config else RunConfig()
    return cfg.override(
        seed=args.seed, jobs=args.jobs, canvas=args.canvas,
        count=getattr(args, "count", None), epochs=getattr(args, "epochs", None),
        k=getattr(args, "k", None), samples=getattr(args, "samples", None),
        noise=getattr(args, "noise", None), batch_size=getattr(args, "batch_size", None),
        hidden=getattr(args, "hidden", None),
    )


def write_out(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def fmt3(v) -> str:
    return ",".join(f"{float(x):.6g}" for x in v)


def read_trajectories(path, netlist=None) -> list:
    trajs = P.loads_trajectories(Path(path).read_text(encoding="utf-8"))
    if not trajs:
        raise DataError(f"{path}: no episodes")
    if netlist is not None:
        h = netlist.content_hash()
        bad = [t for t in trajs if t.hash != h]
        if bad:
            raise DataError(f"{path}: episode {bad[0].episode} was generated for netlist "
                            f"{bad[0].netlist!r} ({bad[0].hash}), not {netlist.name!r} ({h})")
    return trajs


def read_stats(args) -> RtgStats:
    if args.stats:
        return RtgStats.from_dict(json.loads(Path(args.stats).read_text(encoding="utf-8")))
    return P.dataset_stats(read_trajectories(args.traj))


def make_env(args, cfg: RunConfig):
    netlist = load_netlist(args.netlist)
    return FloorplanEnv(netlist, cfg.canvas)


def make_policy(args, cfg: RunConfig, env) -> P.Policy:
    actor = load_checkpoint(args.actor)
    critic = load_checkpoint(args.critic)
    if actor.role != "actor" or critic.role != "critic":
        raise DataError(f"expected actor and critic checkpoints, got {actor.role} and {critic.role}")
    return P.Policy(env, actor, critic, read_stats(args), cfg.k, cfg.select_weights)


# -------------------------------------------------------------- commands

def cmd_gen(args, cfg: RunConfig) -> None:
    netlist = load_netlist(args.netlist)
    trajs = P.gen_random(netlist, cfg.canvas, cfg.count, cfg.seed, cfg.jobs)
    write_out(args.out, P.dumps_trajectories(trajs))
    st = P.dataset_stats(trajs)
    print(f"episodes {len(trajs)}", file=sys.stderr if args.out is None else sys.stdout)
    print(f"return mu {fmt3(st.mu)} sigma {fmt3(st.sigma)}",
          file=sys.stderr if args.out is None else sys.stdout)


def cmd_stats(args, cfg: RunConfig) -> None:
    trajs = read_trajectories(args.traj)
    st = P.dataset_stats(trajs)
    doc = {**st.to_dict(), "prompt": list(P.make_prompt(st)), "episodes": len(trajs)}
    write_out(args.out, json.dumps(doc, indent=1) + "\n")


def cmd_train(args, cfg: RunConfig) -> None:
    env = make_env(args, cfg)
    trajs = read_trajectories(args.traj, env.netlist)
    stats = P.dataset_stats(trajs)
    samples = P.build_samples(env, trajs, stats)
    held = None
    if args.held_out:
        held = P.build_samples(env, read_trajectories(args.held_out, env.netlist), stats)
    hyper = cfg.train_config()
    if args.lr is not None:
        hyper = replace(hyper, **{f"lr_{args.role}": args.lr})
    result = P.train(args.role, samples, hyper, held)
    save_checkpoint(result.params, args.out)
    for i, loss in enumerate(result.losses):
        line = f"epoch {i + 1} loss {loss:.6f}"
        if result.held_out:
            line += f" held_out {result.held_out[i]:.6f}"
        print(line)


def cmd_place(args, cfg: RunConfig) -> None:
    env = make_env(args, cfg)
    policy = make_policy(args, cfg, env)
    prompt = args.prompt if args.prompt is not None else P.make_prompt(policy.stats)
    trajs, states, best = P.sample_rollouts(policy, prompt, cfg.samples, cfg.seed, cfg.noise)
    s = states[best]
    doc = {
        "netlist": env.netlist.name,
        "hash": env.netlist.content_hash(),
        "canvas": [cfg.canvas.W, cfg.canvas.H, cfg.canvas.Z],
        "seed": cfg.seed,
        "k": cfg.k,
        "prompt": [float(v) for v in prompt],
        "best": best,
        "rollouts": [{"failed": t.failed, **t.totals} for t in trajs],
        "metrics": env.metrics(s),
        "placement": placement_json(env, s),
    }
    write_out(args.out, json.dumps(doc, indent=1) + "\n")
    if args.svg:
        write_out(args.svg, render_svg(doc["placement"], env.netlist, cfg.canvas))
    m = doc["metrics"]
    print(f"best {best} wirelength {m['wirelength']:g} congestion {m['max_congestion']:.6g} "
          f"heat {m['max_heat']:.6g}", file=sys.stderr if args.out is None else sys.stdout)


def cmd_eval(args, cfg: RunConfig) -> None:
    env = make_env(args, cfg)
    critic = load_checkpoint(args.critic)
    if critic.role != "critic":
        raise DataError(f"{args.critic}: expected a critic checkpoint, got {critic.role}")
    held = read_trajectories(args.held_out, env.netlist)
    mean, var = P.critic_error_study(env, critic, read_stats(args), held)
    write_out(args.out, P.error_curve_csv(mean, var))


def cmd_bound_check(args, cfg: RunConfig) -> None:
    env = make_env(args, cfg)
    policy = make_policy(args, cfg, env)
    prompt = args.prompt if args.prompt is not None else P.make_prompt(policy.stats)
    rows = []
    for i in range(args.rollouts):
        rows += P.bound_check(policy, prompt, args.component, seed=cfg.seed + i, noise=args.noise)
    write_out(args.out, P.bound_csv(rows))


def cmd_render(args, cfg: RunConfig) -> None:
    netlist = load_netlist(args.netlist)
    doc = json.loads(Path(args.placement).read_text(encoding="utf-8"))
    placement = doc.get("placement", doc) if isinstance(doc, dict) else None
    if not isinstance(placement, dict):
        raise DataError(f"{args.placement}: expected a JSON object of module positions")
    canvas = cfg.canvas
    if args.canvas is None and "canvas" in doc:
        canvas = CanvasConfig(*doc["canvas"])
    write_out(args.out, render_svg(placement, netlist, canvas))


def cmd_convert(args, cfg: RunConfig) -> None:
    blocks = Path(args.blocks).read_text(encoding="utf-8")
    nets = Path(args.nets).read_text(encoding="utf-8")
    name = args.name or Path(args.blocks).stem
    netlist = parse_gsrc(blocks, nets, None if args.raw else cfg.canvas, name=name)
    write_out(args.out, serialize_canonical(netlist))


# ---------------------------------------------------------------- parser

def build_parser() -> Parser:
    common = Parser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--seed", type=int, help="RNG seed (default 0)")
    g.add_argument("--jobs", type=positive_int, help="worker processes for generation")
    g.add_argument("--config", help="TOML run config; flags override it")
    g.add_argument("--canvas", type=canvas_arg, help="canvas as W,H,Z (default 48,48,3)")

    parser = Parser(prog="sgf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    def policy_flags(p):
        p.add_argument("--netlist", required=True)
        p.add_argument("--actor", required=True)
        p.add_argument("--critic", required=True)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--traj", help="training trajectories (for RTG stats)")
        src.add_argument("--stats", help="stats JSON written by `sgf stats`")
        p.add_argument("--k", type=positive_int)
        p.add_argument("--prompt", type=triple, help="target return as w,c,h")

    p = add("gen", cmd_gen, "generate random trajectories")
    p.add_argument("--netlist", required=True)
    p.add_argument("--count", type=positive_int)
    p.add_argument("--out")

    p = add("stats", cmd_stats, "return statistics and default prompt of a trajectory file")
    p.add_argument("--traj", required=True)
    p.add_argument("--out")

    p = add("train", cmd_train, "train the actor or the critic offline")
    p.add_argument("--role", required=True, choices=["actor", "critic"])
    p.add_argument("--netlist", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--held-out")
    p.add_argument("--epochs", type=positive_int)
    p.add_argument("--batch-size", type=positive_int)
    p.add_argument("--hidden", type=pair, help="hidden widths as a,b (default 256,256)")
    p.add_argument("--lr", type=float)
    p.add_argument("--out", required=True)

    p = add("place", cmd_place, "best-of-n prompted placement")
    policy_flags(p)
    p.add_argument("--samples", type=positive_int)
    p.add_argument("--noise", type=float)
    p.add_argument("--svg")
    p.add_argument("--out")

    p = add("eval", cmd_eval, "per-timestep critic error on held-out episodes (CSV)")
    p.add_argument("--netlist", required=True)
    p.add_argument("--critic", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--traj")
    src.add_argument("--stats")
    p.add_argument("--held-out", required=True)
    p.add_argument("--out")

    p = add("bound-check", cmd_bound_check, "measure the one-step error bound (CSV)")
    policy_flags(p)
    p.add_argument("--component", choices=sorted(P.COMPONENTS), default="w")
    p.add_argument("--rollouts", type=positive_int, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out")

    p = add("render", cmd_render, "draw a placement as SVG")
    p.add_argument("--netlist", required=True)
    p.add_argument("--placement", required=True)
    p.add_argument("--out")

    p = add("convert", cmd_convert, "GSRC bookshelf to canonical JSON")
    p.add_argument("--blocks", required=True)
    p.add_argument("--nets", required=True)
    p.add_argument("--name")
    p.add_argument("--raw", action="store_true", help="keep file units instead of scaling to the canvas")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = run_config(args)
        args.func(args, cfg)
    except UsageError as e:
        return fail(EXIT_USAGE, e)
    except (DataError, OSError, ValueError, KeyError) as e:
        return fail(EXIT_DATA, e)
    except RuntimeError as e:
        return fail(EXIT_RUNTIME, e)
    return 0


def fail(code: int, err: Exception) -> int:
    msg = " ".join(str(err).split()) or err.__class__.__name__
    if isinstance(err, KeyError):
        msg = f"missing field {msg}"
    print(f"sgf: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
