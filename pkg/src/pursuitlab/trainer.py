"""Centralized-training / decentralized-execution loop.

Episodes are collected with an epsilon-greedy policy acting on local
observations only; the learner replays stored episodes, unrolls the agent
network over short windows warm-started from the hidden state recorded at
rollout time, and regresses the mixed team value onto one-step targets
computed with a periodically copied target network. Everything is driven by
named integer seed streams, so a run is bit-reproducible from its config.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import mixer as mx
from . import policy as pol
from .autodiff import Tensor
from .env import (
    EnvConfig,
    EvaderStrategy,
    GridMap,
    PursuerObservation,
    VehicleState,
    WorldState,
    build_map,
    global_state,
    observe,
    reset,
    step,
)
from .errors import ContractViolation, InvalidConfig

ALGORITHMS = ("t3-qmix", "t3-vdn", "qmix", "vdn", "random")

_KINDS = {
    "t3-qmix": ("t3", "qmix"),
    "t3-vdn": ("t3", "vdn"),
    "qmix": ("gru", "qmix"),
    "vdn": ("gru", "vdn"),
    "random": ("random", "vdn"),
}

# seed-stream tags
_STREAM_PARAMS = 0
_STREAM_EXPLORE = 1
_STREAM_SAMPLER = 2
_STREAM_EPISODE = 3
_STREAM_EVAL = 4


@dataclass
class TrainConfig:
    """Everything a run needs; defaults follow the reference scenario."""

    env: EnvConfig = field(default_factory=EnvConfig)
    algorithm: str = "t3-qmix"
    gamma: float = 0.95
    batch_size: int = 32
    eps_decay: float = 0.0001
    eps_min: float = 0.1
    total_steps: int = 30000
    target_period: int = 200
    replay_capacity: int = 5000
    lr_peak: float = 0.001
    bptt_window: int = 5
    bptt_full: bool = False
    windows_per_episode: int = 1
    updates_per_episode: int = 1
    double_q: bool = True
    # horizon cutoffs are time limits, not task endings: bootstrap through
    # them so the clockless networks never see spurious zero-value labels
    bootstrap_on_truncation: bool = True
    eval_period: int = 0  # env steps between in-training evals; 0 disables
    eval_episodes: int = 50
    max_train_steps: int = 0  # 0 = no cap
    seed: int = 0
    # model sizing
    embed_dim: int = 250
    heads: int = 5
    depth: int = 2
    mix_hidden: int = 128
    hyper_hidden: int = 128
    rnn_hidden: int = 128
    layer_norm: bool = True
    hidden_mode: str = "team"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidConfig(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.eps_min <= 1.0:
            raise InvalidConfig(f"eps_min must be in (0, 1], got {self.eps_min}")
        if self.algorithm not in ALGORITHMS:
            raise InvalidConfig(f"unknown algorithm {self.algorithm!r}")


@dataclass(frozen=True)
class Snapshot:
    """Pre-step world pose: enough to rebuild observations and global state."""

    pursuers: tuple[tuple[int, int, str], ...]
    evaders: tuple[tuple[int, int, bool], ...]


@dataclass
class EpisodeStep:
    snap: Snapshot
    hidden: np.ndarray  # recurrent input at this step (rows x width)
    actions: np.ndarray
    rewards: tuple[float, ...]
    global_reward: float
    done: bool
    terminal: bool  # true task end (all evaders captured), not a time limit
    # lazily memoized views of the immutable snapshot (replay reuses steps
    # across many updates; memory is bounded by replay_capacity)
    obs_cache: tuple | None = None
    state_cache: np.ndarray | None = None


@dataclass
class Episode:
    width: int
    view: int
    horizon: int
    steps: list[EpisodeStep]
    final_snap: Snapshot | None = None  # post-step world after the last step
    final_obs_cache: tuple | None = None
    final_state_cache: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def snap_at(self, t: int) -> Snapshot:
        return self.steps[t].snap if t < len(self.steps) else self.final_snap


@dataclass
class NetPair:
    """Online and target parameter tables plus the wiring that built them."""

    algorithm: str
    policy_kind: str  # "t3" | "gru" | "random"
    mixer_kind: str  # "qmix" | "vdn"
    policy_cfg: pol.PolicyConfig | pol.BaselineConfig | None
    mixer_cfg: mx.MixerConfig | None
    online: dict[str, np.ndarray]
    target: dict[str, np.ndarray]


@dataclass
class TrainResult:
    nets: NetPair
    metrics: list[dict]
    env_steps: int
    train_steps: int


_GRIDS: dict[int, GridMap] = {}


def _grid(width: int) -> GridMap:
    if width not in _GRIDS:
        _GRIDS[width] = build_map(width)
    return _GRIDS[width]


def stream_seed(seed: int, stream: int, index: int = 0) -> int:
    """Deterministic derived seed for one named stream."""
    return int(np.random.SeedSequence([int(seed), stream, index]).generate_state(1)[0])


# ------------------------------------------------------------------ nets


def build_nets(cfg: TrainConfig) -> NetPair:
    policy_kind, mixer_kind = _KINDS[cfg.algorithm]
    rng = np.random.default_rng([cfg.seed, _STREAM_PARAMS])
    online: dict[str, np.ndarray] = {}
    policy_cfg: pol.PolicyConfig | pol.BaselineConfig | None = None
    mixer_cfg: mx.MixerConfig | None = None

    if policy_kind == "t3":
        policy_cfg = pol.PolicyConfig(
            embed_dim=cfg.embed_dim,
            heads=cfg.heads,
            depth=cfg.depth,
            view=cfg.env.view,
            layer_norm=cfg.layer_norm,
            hidden_mode=cfg.hidden_mode,
        )
        for name, value in pol.make_policy_params(rng, policy_cfg).items():
            online[f"policy/{name}"] = value
    elif policy_kind == "gru":
        policy_cfg = pol.BaselineConfig(hidden=cfg.rnn_hidden, view=cfg.env.view)
        for name, value in pol.make_baseline_params(rng, policy_cfg).items():
            online[f"policy/{name}"] = value

    if mixer_kind == "qmix" and policy_kind != "random":
        mixer_cfg = mx.MixerConfig(
            n_agents=cfg.env.n_pursuers,
            state_dim=3 * cfg.env.width * cfg.env.width,
            mix_hidden=cfg.mix_hidden,
            hyper_hidden=cfg.hyper_hidden,
        )
        for name, value in mx.make_mixer_params(rng, mixer_cfg).items():
            online[f"mixer/{name}"] = value

    return NetPair(
        algorithm=cfg.algorithm,
        policy_kind=policy_kind,
        mixer_kind=mixer_kind,
        policy_cfg=policy_cfg,
        mixer_cfg=mixer_cfg,
        online=online,
        target={k: v.copy() for k, v in online.items()},
    )


def update_targets(nets: NetPair) -> NetPair:
    """Hard copy online -> target, bit-exact."""
    nets.target = {k: v.copy() for k, v in nets.online.items()}
    return nets


def _split_views(leaves: dict[str, Tensor]) -> tuple[dict[str, Tensor], dict[str, Tensor]]:
    policy_view = {k[7:]: v for k, v in leaves.items() if k.startswith("policy/")}
    mixer_view = {k[6:]: v for k, v in leaves.items() if k.startswith("mixer/")}
    return policy_view, mixer_view


def init_hidden(nets: NetPair, n_agents: int) -> np.ndarray:
    if nets.policy_kind == "t3":
        return pol.init_hidden(nets.policy_cfg, n_agents)
    if nets.policy_kind == "gru":
        return pol.baseline_init_hidden(nets.policy_cfg, n_agents)
    return np.zeros(0)


def net_forward(
    nets: NetPair,
    policy_view: dict[str, Tensor],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
    h: Tensor,
):
    """Dispatch to the right agent network; returns (q, h_next, attn|None)."""
    if nets.policy_kind == "t3":
        return pol.policy_forward(policy_view, observations, poses, width, h, nets.policy_cfg)
    if nets.policy_kind == "gru":
        q, h_next = pol.baseline_forward_team(policy_view, observations, poses, width, h)
        return q, h_next, None
    raise ContractViolation("random policy has no network forward")


def net_eval(
    nets: NetPair,
    params_np: dict[str, np.ndarray],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
    h: np.ndarray,
):
    """Tape-free twin of :func:`net_forward` for value-only passes; emits the
    same numbers bit for bit."""
    if nets.policy_kind == "t3":
        return pol.policy_forward_np(params_np, observations, poses, width, h, nets.policy_cfg)
    if nets.policy_kind == "gru":
        q, h_next = pol.baseline_forward_team_np(params_np, observations, poses, width, h)
        return q, h_next, None
    raise ContractViolation("random policy has no network forward")


def _split_views_np(params: dict[str, np.ndarray]) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    policy_view = {k[7:]: v for k, v in params.items() if k.startswith("policy/")}
    mixer_view = {k[6:]: v for k, v in params.items() if k.startswith("mixer/")}
    return policy_view, mixer_view


# ------------------------------------------------------------------ schedule


def epsilon_at(env_step: int, cfg: TrainConfig) -> float:
    """Linear exploration schedule from 1.0 down to the configured floor."""
    return max(cfg.eps_min, 1.0 - cfg.eps_decay * env_step)


def select_actions(
    q_values: np.ndarray | None,
    eps: float,
    rng: np.random.Generator,
    n_agents: int | None = None,
) -> np.ndarray:
    """Independent epsilon-greedy per agent.

    With probability eps the agent draws uniformly over all 5 actions
    (argmax included), otherwise it takes the argmax with ties broken to the
    lowest index. ``q_values=None`` is the pure random policy and needs an
    explicit ``n_agents``.
    """
    if not 0.0 <= eps <= 1.0:
        raise ContractViolation(f"eps must be in [0, 1], got {eps}")
    n = q_values.shape[0] if q_values is not None else n_agents
    actions = np.empty(n, dtype=np.int64)
    for i in range(n):
        if q_values is None or rng.random() < eps:
            actions[i] = rng.integers(0, 5)
        else:
            actions[i] = int(np.argmax(q_values[i]))
    return actions


# ------------------------------------------------------------------ rollouts


def _snapshot(world: WorldState) -> Snapshot:
    return Snapshot(
        pursuers=tuple((p.position[0], p.position[1], p.heading) for p in world.pursuers),
        evaders=tuple((e.position[0], e.position[1], e.alive) for e in world.evaders),
    )


def world_from_snapshot(snap: Snapshot, width: int, view: int) -> WorldState:
    grid = _grid(width)
    return WorldState(
        grid=grid,
        pursuers=[VehicleState((i, j), h, "pursuer") for i, j, h in snap.pursuers],
        evaders=[VehicleState((i, j), "N", "evader", alive) for i, j, alive in snap.evaders],
        strategies=[],
        view=view,
    )


def _observations(snap: Snapshot, width: int, view: int):
    world = world_from_snapshot(snap, width, view)
    obs = [observe(world, k) for k in range(world.n_pursuers)]
    poses = [(p.position, p.heading) for p in world.pursuers]
    return obs, poses


def _state_vector(snap: Snapshot, width: int, view: int) -> np.ndarray:
    return global_state(world_from_snapshot(snap, width, view)).reshape(-1)


def _step_observations(ep: Episode, t: int):
    if t < len(ep.steps):
        stp = ep.steps[t]
        if stp.obs_cache is None:
            stp.obs_cache = _observations(stp.snap, ep.width, ep.view)
        return stp.obs_cache
    if ep.final_obs_cache is None:
        ep.final_obs_cache = _observations(ep.final_snap, ep.width, ep.view)
    return ep.final_obs_cache


def _step_state(ep: Episode, t: int) -> np.ndarray:
    if t < len(ep.steps):
        stp = ep.steps[t]
        if stp.state_cache is None:
            stp.state_cache = _state_vector(stp.snap, ep.width, ep.view)
        return stp.state_cache
    if ep.final_state_cache is None:
        ep.final_state_cache = _state_vector(ep.final_snap, ep.width, ep.view)
    return ep.final_state_cache


def collect_episode(env_cfg: EnvConfig, nets: NetPair, eps: float, seed: int) -> Episode:
    """Roll one seeded episode to completion and record it for replay."""
    world = reset(env_cfg, seed)
    rng = np.random.default_rng([int(seed), _STREAM_EXPLORE])
    policy_view, _ = _split_views_np(nets.online)
    h = init_hidden(nets, env_cfg.n_pursuers)
    steps: list[EpisodeStep] = []
    while not world.done:
        snap = _snapshot(world)
        if nets.policy_kind == "random":
            q_data = None
            h_next = h
        else:
            obs = [observe(world, k) for k in range(world.n_pursuers)]
            poses = [(p.position, p.heading) for p in world.pursuers]
            q_data, h_next, _ = net_eval(nets, policy_view, obs, poses, env_cfg.width, h)
        actions = select_actions(q_data, eps, rng, n_agents=world.n_pursuers)
        outcome = step(world, actions.tolist())
        if math.fsum(outcome.per_agent_reward) != outcome.global_reward:
            raise ContractViolation("reward conservation broken in rollout")
        steps.append(
            EpisodeStep(
                snap=snap,
                hidden=np.asarray(h, dtype=np.float64).copy(),
                actions=actions,
                rewards=tuple(outcome.per_agent_reward),
                global_reward=outcome.global_reward,
                done=outcome.done,
                terminal=outcome.next.n_alive_evaders == 0,
            )
        )
        h = h_next
        world = outcome.next
    return Episode(
        width=env_cfg.width,
        view=env_cfg.view,
        horizon=env_cfg.horizon,
        steps=steps,
        final_snap=_snapshot(world),
    )


# ------------------------------------------------------------------ learning


def td_targets(
    global_rewards: list[float], dones: list[bool], bootstraps: list[float], gamma: float
) -> np.ndarray:
    """One-step targets: r_t, or r_t + gamma * bootstrap(t+1) when not done."""
    out = np.empty(len(global_rewards))
    for t, (r, done) in enumerate(zip(global_rewards, dones)):
        out[t] = r if done else r + gamma * bootstraps[t + 1]
    return out


def _mix_value(
    nets: NetPair, mixer_view: dict[str, Tensor], q_chosen: Tensor, state_vec: np.ndarray
) -> Tensor:
    if nets.mixer_kind == "vdn":
        return mx.vdn_mix(q_chosen)
    return mx.qmix_mix(q_chosen, Tensor(state_vec), mixer_view, nets.mixer_cfg)


def td_loss(
    batch: list[Episode], nets: NetPair, cfg: TrainConfig, rng: np.random.Generator
) -> tuple[float, dict[str, np.ndarray]]:
    """Window-sampled TD(0) regression of the mixed team value.

    Returns the scalar loss and a gradient table aligned with the online
    parameters. The recurrent state is warm-started from the stored rollout
    hidden at the window start (gradients stop there), and targets use the
    target network with online-argmax action selection when double_q is on.
    """
    if not batch:
        raise ContractViolation("td_loss needs a non-empty batch")
    leaves = ad.wrap_params(nets.online, True)
    policy_view, mixer_view = _split_views(leaves)
    online_np, _ = _split_views_np(nets.online)
    t_policy_np, t_mixer_np = _split_views_np(nets.target)

    # one TD term per (window, step): taped chosen-value rows plus everything
    # needed to finish the targets after a single batched mixer pass
    pred_rows: list[Tensor] = []
    pred_states: list[np.ndarray] = []
    rewards: list[float] = []
    boot_rows: list[np.ndarray] = []
    boot_states: list[np.ndarray] = []
    boot_for_term: list[int | None] = []
    n_actions = 5
    draws = 1 if cfg.bptt_full else max(1, cfg.windows_per_episode)
    for ep in (ep for ep in batch for _ in range(draws)):
        total = len(ep)
        window = total if cfg.bptt_full else min(cfg.bptt_window, total)
        if cfg.bptt_full:
            w = 0
        else:
            # uniform over centers, clipped: every step (the terminal one
            # included) keeps a healthy chance of appearing in a window
            center = int(rng.integers(0, total))
            w = min(max(center - window // 2, 0), total - window)
        e = w + window - 1
        n = len(ep.steps[0].snap.pursuers)

        last = ep.steps[e]
        stop_at_e = e == total - 1 and (
            last.terminal or (last.done and not cfg.bootstrap_on_truncation)
        )
        hi = e if stop_at_e else e + 1

        # taped online unroll across the window
        h = Tensor(ep.steps[w].hidden)
        online_q: dict[int, Tensor] = {}
        for t in range(w, e + 1):
            obs, poses = _step_observations(ep, t)
            q_t, h, _ = net_forward(nets, policy_view, obs, poses, ep.width, h)
            online_q[t] = q_t

        # target unroll (same warm start), one step past the window end
        h_t = ep.steps[w].hidden
        target_q: dict[int, np.ndarray] = {}
        for t in range(w, hi + 1):
            obs, poses = _step_observations(ep, t)
            q_t, h_t, _ = net_eval(nets, t_policy_np, obs, poses, ep.width, h_t)
            target_q[t] = q_t
        # online value one step past the window, for double-Q argmax
        next_online: np.ndarray | None = None
        if hi == e + 1:
            obs, poses = _step_observations(ep, e + 1)
            next_online, _, _ = net_eval(nets, online_np, obs, poses, ep.width, h.data)

        for t in range(w, e + 1):
            stp = ep.steps[t]
            truncated = stp.done and not stp.terminal
            if stp.terminal or (truncated and not cfg.bootstrap_on_truncation):
                boot_for_term.append(None)
            else:
                if cfg.double_q:
                    q_next = online_q[t + 1].data if t + 1 <= e else next_online
                else:
                    q_next = target_q[t + 1]
                a_star = np.argmax(q_next, axis=1)
                boot_rows.append(target_q[t + 1][np.arange(n), a_star])
                boot_states.append(_step_state(ep, t + 1))
                boot_for_term.append(len(boot_rows) - 1)
            rewards.append(stp.global_reward)
            onehot = np.zeros((n, n_actions))
            onehot[np.arange(n), stp.actions] = 1.0
            pred_rows.append(ad.reshape(ad.row_sums(ad.mul(online_q[t], Tensor(onehot))), (1, n)))
            pred_states.append(_step_state(ep, t))

    # finish targets with one batched value pass
    targets = np.asarray(rewards)
    if boot_rows:
        stacked = np.stack(boot_rows)
        if nets.mixer_kind == "vdn":
            boots = stacked.sum(axis=1)
        else:
            boots = mx.qmix_rows_np(stacked, np.stack(boot_states), t_mixer_np, nets.mixer_cfg)
        for term, slot in enumerate(boot_for_term):
            if slot is not None:
                targets[term] += cfg.gamma * boots[slot]

    # one batched taped mixer pass over every TD term
    q_rows = ad.concat(pred_rows, axis=0)
    if nets.mixer_kind == "vdn":
        preds = ad.row_sums(q_rows)
    else:
        preds = mx.qmix_mix_rows(q_rows, Tensor(np.stack(pred_states)), mixer_view, nets.mixer_cfg)
    loss = ad.mse(preds, Tensor(targets))
    ad.backward(loss)
    return float(loss.data), ad.collect_grads(leaves)


def train(cfg: TrainConfig) -> TrainResult:
    """Run the full loop; fully reproducible from (config, seed)."""
    nets = build_nets(cfg)
    adam = ad.adam_init(nets.online)
    replay: deque[Episode] = deque(maxlen=cfg.replay_capacity)
    sampler = np.random.default_rng([cfg.seed, _STREAM_SAMPLER])
    metrics: list[dict] = []
    env_step = 0
    train_step = 0
    episode_idx = 0
    last_loss = float("nan")
    next_eval = cfg.eval_period if cfg.eval_period > 0 else None

    while env_step < cfg.total_steps:
        if cfg.max_train_steps and train_step >= cfg.max_train_steps:
            break
        eps = epsilon_at(env_step, cfg)
        episode = collect_episode(
            cfg.env, nets, eps, stream_seed(cfg.seed, _STREAM_EPISODE, episode_idx)
        )
        replay.append(episode)
        env_step += len(episode)
        episode_idx += 1

        if nets.policy_kind != "random" and len(replay) >= cfg.batch_size:
            for _ in range(max(1, cfg.updates_per_episode)):
                picks = sampler.choice(len(replay), size=cfg.batch_size, replace=False)
                batch = [replay[int(i)] for i in picks]
                last_loss, grads = td_loss(batch, nets, cfg, sampler)
                lr = ad.lr_linear(env_step, cfg.total_steps, cfg.lr_peak)
                ad.adam_step(nets.online, grads, adam, lr)
                train_step += 1
                if train_step % cfg.target_period == 0:
                    update_targets(nets)

        if next_eval is not None and env_step >= next_eval:
            scores = evaluate(nets, cfg.env, cfg.eval_episodes, cfg.seed)
            metrics.append(
                {
                    "env_step": env_step,
                    "train_step": train_step,
                    "epsilon": epsilon_at(env_step, cfg),
                    "lr": ad.lr_linear(env_step, cfg.total_steps, cfg.lr_peak),
                    "loss": last_loss,
                    "eval_mean_reward": scores["mean_global_reward"],
                    "eval_capture_rate": scores["capture_rate"],
                }
            )
            while next_eval <= env_step:
                next_eval += cfg.eval_period

    return TrainResult(nets=nets, metrics=metrics, env_steps=env_step, train_steps=train_step)


def evaluate(
    nets: NetPair,
    env_cfg: EnvConfig,
    episodes: int,
    seed: int,
    pin_still: bool = False,
) -> dict:
    """Greedy-policy evaluation over seeded episodes.

    Reports the mean per-episode summed global reward, the fraction of
    evaders captured, and the mean step of the first capture (horizon when
    an episode captures nothing). ``pin_still`` freezes every evader for the
    fixed-seed measurement protocol.
    """
    if episodes < 1:
        raise ContractViolation("evaluate needs episodes >= 1")
    policy_view, _ = _split_views_np(nets.online)
    total_reward = 0.0
    captured = 0
    first_steps: list[int] = []
    for i in range(episodes):
        ep_seed = stream_seed(seed, _STREAM_EVAL, i)
        world = reset(env_cfg, ep_seed)
        if pin_still:
            world.strategies = [
                EvaderStrategy("Still", e.position, 0) for e in world.evaders
            ]
        rng = np.random.default_rng([ep_seed, _STREAM_EXPLORE])
        h = init_hidden(nets, env_cfg.n_pursuers)
        first: int | None = None
        while not world.done:
            if nets.policy_kind == "random":
                q_data = None
            else:
                obs = [observe(world, k) for k in range(world.n_pursuers)]
                poses = [(p.position, p.heading) for p in world.pursuers]
                q_data, h, _ = net_eval(nets, policy_view, obs, poses, env_cfg.width, h)
            actions = select_actions(q_data, 0.0, rng, n_agents=world.n_pursuers)
            outcome = step(world, actions.tolist())
            total_reward += outcome.global_reward
            if first is None and outcome.captures:
                first = outcome.next.t - 1
            world = outcome.next
        captured += env_cfg.n_evaders - world.n_alive_evaders
        first_steps.append(first if first is not None else env_cfg.horizon)
    return {
        "mean_global_reward": total_reward / episodes,
        "capture_rate": captured / (episodes * env_cfg.n_evaders),
        "mean_steps_to_first_capture": float(np.mean(first_steps)),
    }


# ------------------------------------------------------------------ checkpoints


def save_nets(path, nets: NetPair, env_cfg: EnvConfig, extra: dict | None = None) -> None:
    meta = {
        "algorithm": nets.algorithm,
        "env": {
            "width": env_cfg.width,
            "n_pursuers": env_cfg.n_pursuers,
            "n_evaders": env_cfg.n_evaders,
            "view": env_cfg.view,
            "horizon": env_cfg.horizon,
            "strategy": env_cfg.strategy,
        },
    }
    if nets.policy_kind == "t3":
        meta["policy"] = {
            "embed_dim": nets.policy_cfg.embed_dim,
            "heads": nets.policy_cfg.heads,
            "depth": nets.policy_cfg.depth,
            "layer_norm": nets.policy_cfg.layer_norm,
            "hidden_mode": nets.policy_cfg.hidden_mode,
        }
    elif nets.policy_kind == "gru":
        meta["policy"] = {"hidden": nets.policy_cfg.hidden}
    if nets.mixer_cfg is not None:
        meta["mixer"] = {
            "mix_hidden": nets.mixer_cfg.mix_hidden,
            "hyper_hidden": nets.mixer_cfg.hyper_hidden,
        }
    if extra:
        meta.update(extra)
    ad.save_checkpoint(path, nets.online, meta)


def load_nets(path) -> tuple[NetPair, EnvConfig]:
    params, meta = ad.load_checkpoint(path)
    env_cfg = EnvConfig(**meta["env"])
    algorithm = meta["algorithm"]
    policy_kind, mixer_kind = _KINDS[algorithm]
    policy_cfg: pol.PolicyConfig | pol.BaselineConfig | None = None
    mixer_cfg: mx.MixerConfig | None = None
    if policy_kind == "t3":
        policy_cfg = pol.PolicyConfig(view=env_cfg.view, **meta["policy"])
    elif policy_kind == "gru":
        policy_cfg = pol.BaselineConfig(hidden=meta["policy"]["hidden"], view=env_cfg.view)
    if "mixer" in meta and policy_kind != "random":
        mixer_cfg = mx.MixerConfig(
            n_agents=env_cfg.n_pursuers,
            state_dim=3 * env_cfg.width * env_cfg.width,
            **meta["mixer"],
        )
    nets = NetPair(
        algorithm=algorithm,
        policy_kind=policy_kind,
        mixer_kind=mixer_kind,
        policy_cfg=policy_cfg,
        mixer_cfg=mixer_cfg,
        online=params,
        target={k: v.copy() for k, v in params.items()},
    )
    return nets, env_cfg
