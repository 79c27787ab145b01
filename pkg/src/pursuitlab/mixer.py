"""Centralized credit assignment over per-agent chosen-action values.

Additive mixing is an exact sum. Monotonic mixing feeds the agent values
through one hidden mixing layer whose weights are emitted by state-
conditioned hypernetworks; both weight blocks pass through an absolute
value, which keeps every partial derivative of the team value with respect
to an agent value non-negative for every state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractViolation


@dataclass(frozen=True)
class MixerConfig:
    n_agents: int
    state_dim: int
    mix_hidden: int = 128
    hyper_hidden: int = 128


def make_mixer_params(rng: np.random.Generator, cfg: MixerConfig) -> dict[str, np.ndarray]:
    s, hh, mh, n = cfg.state_dim, cfg.hyper_hidden, cfg.mix_hidden, cfg.n_agents
    return {
        # state -> N x mix_hidden mixing weights (two layers, elu between)
        "hw1/w1": ad.init_uniform(rng, s, hh),
        "hw1/b1": np.zeros(hh),
        "hw1/w2": ad.init_uniform(rng, hh, mh * n),
        "hw1/b2": np.zeros(mh * n),
        # state -> mix_hidden final weights (two layers, elu between)
        "hwf/w1": ad.init_uniform(rng, s, hh),
        "hwf/b1": np.zeros(hh),
        "hwf/w2": ad.init_uniform(rng, hh, mh),
        "hwf/b2": np.zeros(mh),
        # state -> hidden bias (single layer)
        "hb1/w": ad.init_uniform(rng, s, mh),
        "hb1/b": np.zeros(mh),
        # state -> scalar output bias (two layers, elu between)
        "hbf/w1": ad.init_uniform(rng, s, hh),
        "hbf/b1": np.zeros(hh),
        "hbf/w2": ad.init_uniform(rng, hh, 1),
        "hbf/b2": np.zeros(1),
    }


def vdn_mix(q_chosen) -> Tensor | float:
    """Exact sum of the per-agent chosen-action values.

    Plain values are summed correctly rounded, which makes the result
    independent of agent ordering.
    """
    if isinstance(q_chosen, Tensor):
        return ad.total_sum(q_chosen)
    return math.fsum(np.asarray(q_chosen, dtype=np.float64).reshape(-1))


def qmix_mix(
    q_chosen: Tensor, state: Tensor, params: dict[str, Tensor], cfg: MixerConfig
) -> Tensor:
    """Monotone state-conditioned mix of the agent values (scalar tensor)."""
    if q_chosen.data.size != cfg.n_agents:
        raise ContractViolation(
            f"expected {cfg.n_agents} agent values, got {q_chosen.data.size}"
        )
    if state.data.size != cfg.state_dim:
        raise ContractViolation(
            f"expected state of size {cfg.state_dim}, got {state.data.size}"
        )
    s = ad.reshape(state, (1, cfg.state_dim))
    q = ad.reshape(q_chosen, (1, cfg.n_agents))

    w1 = ad.absolute(_two_layer(s, params, "hw1"))
    w1 = ad.reshape(w1, (cfg.n_agents, cfg.mix_hidden))
    b1 = ad.add(ad.matmul(s, params["hb1/w"]), params["hb1/b"])
    hidden = ad.elu(ad.add(ad.matmul(q, w1), b1))

    wf = ad.absolute(_two_layer(s, params, "hwf"))
    wf = ad.reshape(wf, (cfg.mix_hidden, 1))
    bf = _two_layer(s, params, "hbf")
    return ad.reshape(ad.add(ad.matmul(hidden, wf), bf), ())


def _two_layer(s: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    inner = ad.elu(ad.add(ad.matmul(s, params[f"{prefix}/w1"]), params[f"{prefix}/b1"]))
    return ad.add(ad.matmul(inner, params[f"{prefix}/w2"]), params[f"{prefix}/b2"])


def qmix_mix_rows(
    q_rows: Tensor, states: Tensor, params: dict[str, Tensor], cfg: MixerConfig
) -> Tensor:
    """Batched monotone mixing: rows of agent values and matching state rows
    in, one team value per row out. Same math as :func:`qmix_mix`."""
    rows, n = q_rows.data.shape
    if n != cfg.n_agents or states.data.shape != (rows, cfg.state_dim):
        raise ContractViolation(
            f"batched mix shapes {q_rows.data.shape} / {states.data.shape} do not fit "
            f"{cfg.n_agents} agents with state {cfg.state_dim}"
        )
    w1 = ad.absolute(_two_layer(states, params, "hw1"))
    w1 = ad.reshape(w1, (rows, cfg.n_agents, cfg.mix_hidden))
    q3 = ad.reshape(q_rows, (rows, cfg.n_agents, 1))
    b1 = ad.add(ad.matmul(states, params["hb1/w"]), params["hb1/b"])
    hidden = ad.elu(ad.add(ad.sum_axis(ad.mul(q3, w1), 1), b1))
    wf = ad.absolute(_two_layer(states, params, "hwf"))
    bf = _two_layer(states, params, "hbf")
    return ad.add(ad.row_sums(ad.mul(hidden, wf)), ad.reshape(bf, (rows,)))


def qmix_rows_np(
    q_rows: np.ndarray, states: np.ndarray, params: dict[str, np.ndarray], cfg: MixerConfig
) -> np.ndarray:
    """Value-only twin of :func:`qmix_mix_rows` on plain arrays."""

    def two_layer(prefix):
        inner = states @ params[f"{prefix}/w1"] + params[f"{prefix}/b1"]
        inner = np.where(inner > 0, inner, np.expm1(np.minimum(inner, 0.0)))
        return inner @ params[f"{prefix}/w2"] + params[f"{prefix}/b2"]

    rows = q_rows.shape[0]
    w1 = np.abs(two_layer("hw1")).reshape(rows, cfg.n_agents, cfg.mix_hidden)
    b1 = states @ params["hb1/w"] + params["hb1/b"]
    pre = (q_rows.reshape(rows, cfg.n_agents, 1) * w1).sum(axis=1) + b1
    hidden = np.where(pre > 0, pre, np.expm1(np.minimum(pre, 0.0)))
    wf = np.abs(two_layer("hwf"))
    bf = two_layer("hbf")
    return (hidden * wf).sum(axis=1) + bf.reshape(rows)


def monotonicity_probe(
    params: dict[str, np.ndarray],
    cfg: MixerConfig,
    samples: int,
    rng: np.random.Generator,
    delta: float = 1e-5,
) -> float:
    """Smallest central-difference derivative of the team value with respect
    to any single agent value, over random (q, state) probe points."""
    if samples < 1:
        raise ContractViolation("monotonicity_probe needs samples >= 1")
    wrapped = ad.wrap_params(params, requires_grad=False)
    worst = np.inf
    with ad.no_grad():
        for _ in range(samples):
            q = rng.normal(size=cfg.n_agents)
            state = rng.normal(size=cfg.state_dim)
            s = Tensor(state)
            for i in range(cfg.n_agents):
                bumped = q.copy()
                bumped[i] = q[i] + delta
                hi = qmix_mix(Tensor(bumped), s, wrapped, cfg).item()
                bumped[i] = q[i] - delta
                lo = qmix_mix(Tensor(bumped), s, wrapped, cfg).item()
                worst = min(worst, (hi - lo) / (2.0 * delta))
    return float(worst)
