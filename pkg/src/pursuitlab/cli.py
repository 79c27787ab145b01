"""Command-line interface: train, eval, render, attention.

Every command is deterministic given its arguments; run artifacts land in a
directory named by the config hash and seed under the run root (flag,
``run_root`` config key, or the PURSUITLAB_RUNS environment variable).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import trainer as tr
from .config import ENV_RUN_ROOT, parse_config, parse_scenario
from .env import EnvConfig, render_frame, reset, step, step_record
from .errors import PursuitError

METRIC_COLUMNS = (
    "env_step",
    "train_step",
    "epsilon",
    "lr",
    "loss",
    "eval_mean_reward",
    "eval_capture_rate",
)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_metrics_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(METRIC_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in METRIC_COLUMNS) + "\n")


def cmd_train(args) -> int:
    run_config = parse_config(args.config)
    root = Path(args.run_root) if args.run_root else Path(run_config.run_root)
    run_dir = root / run_config.run_name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(run_config.canonical)
    result = tr.train(run_config.train)
    write_metrics_csv(run_dir / "metrics.csv", result.metrics)
    tr.save_nets(
        run_dir / "final.ckpt",
        result.nets,
        run_config.train.env,
        extra={"env_steps": result.env_steps, "train_steps": result.train_steps},
    )
    print(run_dir)
    return 0


def _scenario_override(env_cfg: EnvConfig, nets: tr.NetPair, args) -> EnvConfig:
    """Apply scenario flags to a checkpoint's environment, refusing changes
    that no longer fit the stored network shapes."""
    width, pursuers, evaders = env_cfg.width, env_cfg.n_pursuers, env_cfg.n_evaders
    if args.scenario:
        pursuers, evaders = parse_scenario(args.scenario)
    if args.width:
        width = args.width
    if getattr(args, "evaders", None):
        evaders = args.evaders
    if nets.mixer_kind == "qmix" and nets.policy_kind != "random":
        if width != env_cfg.width or pursuers != env_cfg.n_pursuers:
            raise PursuitError(
                "checkpoint mixes over "
                f"{env_cfg.n_pursuers} agents on a {env_cfg.width}x{env_cfg.width} "
                f"state; cannot evaluate {pursuers} agents on {width}x{width}"
            )
    return EnvConfig(
        width=width,
        n_pursuers=pursuers,
        n_evaders=evaders,
        view=env_cfg.view,
        horizon=env_cfg.horizon,
    )


def _load_or_random(spec: str, args) -> tuple[tr.NetPair, EnvConfig]:
    if spec == "random":
        width = args.width or 13
        pursuers, evaders = parse_scenario(args.scenario) if args.scenario else (8, 4)
        if getattr(args, "evaders", 0):
            evaders = args.evaders
        env_cfg = EnvConfig(width=width, n_pursuers=pursuers, n_evaders=evaders)
        cfg = tr.TrainConfig(env=env_cfg, algorithm="random", seed=args.seed)
        return tr.build_nets(cfg), env_cfg
    nets, env_cfg = tr.load_nets(spec)
    return nets, _scenario_override(env_cfg, nets, args)


def cmd_eval(args) -> int:
    nets, env_cfg = _load_or_random(args.checkpoint, args)
    scores = tr.evaluate(nets, env_cfg, args.episodes, args.seed, pin_still=args.pin_still)
    for key in ("mean_global_reward", "capture_rate", "mean_steps_to_first_capture"):
        print(f"{key} = {_fmt(scores[key])}")
    out = Path(args.out) if args.out else Path(str(args.checkpoint) + ".eval.csv")
    with open(out, "w", newline="") as fh:
        fh.write("mean_global_reward,capture_rate,mean_steps_to_first_capture\n")
        fh.write(
            ",".join(
                _fmt(scores[k])
                for k in ("mean_global_reward", "capture_rate", "mean_steps_to_first_capture")
            )
            + "\n"
        )
    return 0


def _greedy_rollout_frames(nets, env_cfg, seed, frame_sink, trace_sink):
    """Greedy episode pushed through the frame and trace sinks."""
    from . import autodiff as ad
    from .autodiff import Tensor
    from .env import observe

    world = reset(env_cfg, seed)
    rng = np.random.default_rng([tr.stream_seed(seed, 0), tr._STREAM_EXPLORE])
    wrapped = ad.wrap_params(nets.online, False)
    policy_view, _ = tr._split_views(wrapped)
    h = tr.init_hidden(nets, env_cfg.n_pursuers)
    frame_sink(world)
    while not world.done:
        if nets.policy_kind == "random":
            q_data = None
        else:
            obs = [observe(world, k) for k in range(world.n_pursuers)]
            poses = [(p.position, p.heading) for p in world.pursuers]
            with ad.no_grad():
                q, h_out, _ = tr.net_forward(
                    nets, policy_view, obs, poses, env_cfg.width, Tensor(h)
                )
            q_data = q.data
            h = h_out.data
        actions = tr.select_actions(q_data, 0.0, rng, n_agents=world.n_pursuers)
        outcome = step(world, actions.tolist())
        trace_sink(world.t, actions, outcome)
        world = outcome.next
        frame_sink(world)


def cmd_render(args) -> int:
    nets, env_cfg = _load_or_random(args.checkpoint, args)
    trace_path = Path(args.trace)
    with open(trace_path, "w") as trace_fh:

        def frame_sink(world):
            print(f"t={world.t}")
            print(render_frame(world))
            print()

        def trace_sink(t, actions, outcome):
            trace_fh.write(json.dumps(step_record(t, actions.tolist(), outcome)) + "\n")

        _greedy_rollout_frames(nets, env_cfg, args.seed, frame_sink, trace_sink)
    return 0


def cmd_attention(args) -> int:
    nets, env_cfg = _load_or_random(args.checkpoint, args)
    if nets.policy_kind != "t3":
        raise PursuitError(
            f"checkpoint algorithm {nets.algorithm!r} has no attention maps to export"
        )
    if args.t < 0:
        raise PursuitError(f"step {args.t} out of range")

    # roll greedily, keeping the maps of steps t-1 and t; error if the
    # episode ends before t is reached
    kept: list[tuple[int, list]] = []
    from . import autodiff as ad
    from .autodiff import Tensor
    from .env import observe

    world = reset(env_cfg, args.seed)
    rng = np.random.default_rng([tr.stream_seed(args.seed, 0), tr._STREAM_EXPLORE])
    wrapped = ad.wrap_params(nets.online, False)
    policy_view, _ = tr._split_views(wrapped)
    h = tr.init_hidden(nets, env_cfg.n_pursuers)
    while not world.done and world.t <= args.t:
        obs = [observe(world, k) for k in range(world.n_pursuers)]
        poses = [(p.position, p.heading) for p in world.pursuers]
        with ad.no_grad():
            q, h_out, attn = tr.net_forward(nets, policy_view, obs, poses, env_cfg.width, Tensor(h))
        kept.append((world.t, attn))
        kept = kept[-2:]
        h = h_out.data
        actions = tr.select_actions(q.data, 0.0, rng, n_agents=world.n_pursuers)
        world = step(world, actions.tolist()).next
    if not kept or kept[-1][0] != args.t:
        raise PursuitError(f"step {args.t} out of range (episode ended at t={world.t})")

    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        fh.write("step,layer,head,query,key,weight\n")
        for step_t, attn in kept:
            for layer, heads in enumerate(attn):
                for head, weights in enumerate(heads):
                    for qi in range(weights.shape[0]):
                        for ki in range(weights.shape[1]):
                            fh.write(
                                f"{step_t},{layer},{head},{qi},{ki},{_fmt(weights[qi, ki])}\n"
                            )

    # per-agent incoming attention at step t, averaged over layers/heads/queries
    _, attn_t = kept[-1]
    stacked = np.stack([w for heads in attn_t for w in heads])  # (L*H, rows, rows)
    incoming = stacked.mean(axis=(0, 1))
    n = env_cfg.n_pursuers
    for k in range(n):
        print(f"agent {k} incoming_attention = {_fmt(incoming[k])}")
    for extra in range(n, incoming.shape[0]):
        print(f"hidden {extra - n} incoming_attention = {_fmt(incoming[extra])}")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pursuitlab",
        description="Occluded-grid pursuit lab: train, evaluate, render, inspect attention.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training config to completion")
    p_train.add_argument("config", help="path to a key = value config file")
    p_train.add_argument("--run-root", default="", help=f"run directory root (or ${ENV_RUN_ROOT})")
    p_train.set_defaults(fn=cmd_train)

    def add_scenario(p):
        p.add_argument("--scenario", default="", help="NvM shorthand, e.g. 8v4")
        p.add_argument("--width", type=int, default=0, help="grid width override")
        p.add_argument("--evaders", type=int, default=0, help="evader count override")
        p.add_argument("--seed", type=int, default=0)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p_eval.add_argument("checkpoint", help="checkpoint path, or 'random'")
    add_scenario(p_eval)
    p_eval.add_argument("--episodes", type=int, default=50)
    p_eval.add_argument("--pin-still", action="store_true", help="freeze evaders (fixed-seed protocol)")
    p_eval.add_argument("--out", default="", help="metrics CSV path")
    p_eval.set_defaults(fn=cmd_eval)

    p_render = sub.add_parser("render", help="ASCII episode playback")
    p_render.add_argument("checkpoint", help="checkpoint path, or 'random'")
    add_scenario(p_render)
    p_render.add_argument("--trace", default="episode_trace.jsonl", help="trace JSONL path")
    p_render.set_defaults(fn=cmd_render)

    p_attn = sub.add_parser("attention", help="export attention maps at one step")
    p_attn.add_argument("checkpoint")
    add_scenario(p_attn)
    p_attn.add_argument("--t", type=int, default=0, help="episode step to export")
    p_attn.add_argument("--out", default="attention.csv")
    p_attn.set_defaults(fn=cmd_attention)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (PursuitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
