"""Agent networks producing per-pursuer Q-values.

Two families share the same observation features (flattened evader mask,
flattened obstacle mask, normalized position, heading one-hot):

* the transformer team network: every agent contributes one embedded token,
  a single extra token carries the recurrent team memory, and a stack of
  self-attention blocks mixes them before a shared linear Q-head reads one
  row per agent (no per-action-group decoupling anywhere);
* a gated recurrent baseline evaluated independently per agent, for the
  plain mixing-only algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .env import HEADINGS, PursuerObservation
from .errors import ContractViolation

N_ACTIONS = 5


@dataclass(frozen=True)
class PolicyConfig:
    """Transformer sizing; embedding width must split evenly across heads."""

    embed_dim: int = 250
    heads: int = 5
    depth: int = 2
    view: int = 5
    n_actions: int = N_ACTIONS
    layer_norm: bool = True
    hidden_mode: str = "team"  # "team": one shared memory token; "per-agent": one each

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ContractViolation(
                f"embed_dim {self.embed_dim} not divisible by {self.heads} heads"
            )
        if self.hidden_mode not in ("team", "per-agent"):
            raise ContractViolation(f"unknown hidden_mode {self.hidden_mode!r}")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def feat_dim(self) -> int:
        return 2 * self.view * self.view + 6


@dataclass(frozen=True)
class BaselineConfig:
    hidden: int = 128
    view: int = 5
    n_actions: int = N_ACTIONS

    @property
    def feat_dim(self) -> int:
        return 2 * self.view * self.view + 6


def obs_features(obs: PursuerObservation, pose, width: int) -> np.ndarray:
    """Flat per-agent input: evader mask, obstacle mask, pose, heading."""
    (i, j), heading = pose
    onehot = np.zeros(4)
    onehot[HEADINGS.index(heading)] = 1.0
    return np.concatenate(
        [
            obs.evaders.reshape(-1).astype(np.float64),
            obs.obstacles.reshape(-1).astype(np.float64),
            np.array([i / (width - 1), j / (width - 1)]),
            onehot,
        ]
    )


def make_policy_params(rng: np.random.Generator, cfg: PolicyConfig) -> dict[str, np.ndarray]:
    d, dk = cfg.embed_dim, cfg.head_dim
    params = {
        "emb/w": ad.init_uniform(rng, cfg.feat_dim, d),
        "emb/b": np.zeros(d),
        "head/w": ad.init_uniform(rng, d, cfg.n_actions),
        "head/b": np.zeros(cfg.n_actions),
    }
    for l in range(cfg.depth):
        for h in range(cfg.heads):
            params[f"l{l}/h{h}/wq"] = ad.init_uniform(rng, d, dk)
            params[f"l{l}/h{h}/wk"] = ad.init_uniform(rng, d, dk)
            params[f"l{l}/h{h}/wv"] = ad.init_uniform(rng, d, dk)
        params[f"l{l}/attn_w"] = ad.init_uniform(rng, d, d)
        params[f"l{l}/attn_b"] = np.zeros(d)
        params[f"l{l}/ff1_w"] = ad.init_uniform(rng, d, d)
        params[f"l{l}/ff1_b"] = np.zeros(d)
        params[f"l{l}/ff2_w"] = ad.init_uniform(rng, d, d)
        params[f"l{l}/ff2_b"] = np.zeros(d)
        params[f"l{l}/ln1_g"] = np.ones(d)
        params[f"l{l}/ln1_b"] = np.zeros(d)
        params[f"l{l}/ln2_g"] = np.ones(d)
        params[f"l{l}/ln2_b"] = np.zeros(d)
    return params


def embed_tokens(
    params: dict[str, Tensor],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
) -> Tensor:
    """Project each agent's features to one embedding row (agents stacked)."""
    views = {o.view for o in observations}
    if len(views) > 1:
        raise ContractViolation(f"mixed observation windows: {sorted(views)}")
    feats = np.stack([obs_features(o, p, width) for o, p in zip(observations, poses)])
    return ad.add(ad.matmul(Tensor(feats), params["emb/w"]), params["emb/b"])


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """Scaled dot-product attention: softmax(Q Kt / sqrt(dk)) V."""
    out, _ = _attention_with_map(q, k, v)
    return out


def _attention_with_map(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, np.ndarray]:
    if q.data.ndim != 2 or k.data.ndim != 2 or v.data.ndim != 2:
        raise ContractViolation("attention expects rank-2 tensors")
    if q.data.shape[1] != k.data.shape[1]:
        raise ContractViolation(
            f"query/key width mismatch: {q.data.shape} vs {k.data.shape}"
        )
    if k.data.shape[0] != v.data.shape[0]:
        raise ContractViolation(
            f"key/value row mismatch: {k.data.shape} vs {v.data.shape}"
        )
    dk = q.data.shape[1]
    logits = ad.mul(ad.matmul(q, ad.transpose(k)), Tensor(1.0 / np.sqrt(dk)))
    weights = ad.softmax_rows(logits)
    return ad.matmul(weights, v), weights.data.copy()


def transformer_block(
    x: Tensor, params: dict[str, Tensor], layer: int, cfg: PolicyConfig
) -> tuple[Tensor, list[np.ndarray]]:
    """One encoder block: multi-head self-attention and a feed-forward net,
    each wrapped in a residual connection (plus optional layer norm)."""
    heads = []
    maps = []
    for h in range(cfg.heads):
        q = ad.matmul(x, params[f"l{layer}/h{h}/wq"])
        k = ad.matmul(x, params[f"l{layer}/h{h}/wk"])
        v = ad.matmul(x, params[f"l{layer}/h{h}/wv"])
        out, weights = _attention_with_map(q, k, v)
        heads.append(out)
        maps.append(weights)
    mixed = ad.add(
        ad.matmul(ad.concat(heads, axis=1), params[f"l{layer}/attn_w"]),
        params[f"l{layer}/attn_b"],
    )
    y = ad.add(x, mixed)
    if cfg.layer_norm:
        y = ad.layer_norm_rows(y, params[f"l{layer}/ln1_g"], params[f"l{layer}/ln1_b"])
    ff = ad.add(
        ad.matmul(
            ad.elu(ad.add(ad.matmul(y, params[f"l{layer}/ff1_w"]), params[f"l{layer}/ff1_b"])),
            params[f"l{layer}/ff2_w"],
        ),
        params[f"l{layer}/ff2_b"],
    )
    out = ad.add(y, ff)
    if cfg.layer_norm:
        out = ad.layer_norm_rows(out, params[f"l{layer}/ln2_g"], params[f"l{layer}/ln2_b"])
    return out, maps


def init_hidden(cfg: PolicyConfig, n_agents: int) -> np.ndarray:
    rows = 1 if cfg.hidden_mode == "team" else n_agents
    return np.zeros((rows, cfg.embed_dim))


def policy_forward(
    params: dict[str, Tensor],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
    h_prev: Tensor,
    cfg: PolicyConfig,
) -> tuple[Tensor, Tensor, list[list[np.ndarray]]]:
    """Q-values for every agent, the next memory token(s), and the raw
    attention maps of every layer and head (copied for export)."""
    n = len(observations)
    tokens = embed_tokens(params, observations, poses, width)
    x = ad.concat([tokens, h_prev], axis=0)
    attn: list[list[np.ndarray]] = []
    for layer in range(cfg.depth):
        x, maps = transformer_block(x, params, layer, cfg)
        attn.append(maps)
    q = ad.add(ad.matmul(ad.slice_rows(x, 0, n), params["head/w"]), params["head/b"])
    h_next = ad.slice_rows(x, n, x.data.shape[0])
    return q, h_next, attn


# ------------------------------------------------------------------ baseline


def make_baseline_params(rng: np.random.Generator, cfg: BaselineConfig) -> dict[str, np.ndarray]:
    f, hdim = cfg.feat_dim, cfg.hidden
    params = {
        "emb/w": ad.init_uniform(rng, f, hdim),
        "emb/b": np.zeros(hdim),
        "head/w": ad.init_uniform(rng, hdim, cfg.n_actions),
        "head/b": np.zeros(cfg.n_actions),
    }
    for gate in ("z", "r", "n"):
        params[f"gru/w{gate}"] = ad.init_uniform(rng, hdim, hdim)
        params[f"gru/u{gate}"] = ad.init_uniform(rng, hdim, hdim)
        params[f"gru/b{gate}"] = np.zeros(hdim)
    return params


def baseline_step(
    params: dict[str, Tensor], feats: Tensor, h: Tensor
) -> tuple[Tensor, Tensor]:
    """Shared-weight gated recurrent update; rows (agents) stay independent."""
    x = ad.elu(ad.add(ad.matmul(feats, params["emb/w"]), params["emb/b"]))
    z = ad.sigmoid(_gate(params, "z", x, h))
    r = ad.sigmoid(_gate(params, "r", x, h))
    n = ad.tanh(
        ad.add(
            ad.add(ad.matmul(x, params["gru/wn"]), ad.matmul(ad.mul(r, h), params["gru/un"])),
            params["gru/bn"],
        )
    )
    one_minus_z = ad.add(ad.mul(z, Tensor(-1.0)), Tensor(1.0))
    h_next = ad.add(ad.mul(one_minus_z, n), ad.mul(z, h))
    q = ad.add(ad.matmul(h_next, params["head/w"]), params["head/b"])
    return q, h_next


def _gate(params, tag, x, h):
    return ad.add(
        ad.add(ad.matmul(x, params[f"gru/w{tag}"]), ad.matmul(h, params[f"gru/u{tag}"])),
        params[f"gru/b{tag}"],
    )


def baseline_forward(
    params: dict[str, Tensor],
    obs_k: PursuerObservation,
    pose_k,
    h_k: Tensor,
    width: int,
    cfg: BaselineConfig,
) -> tuple[Tensor, Tensor]:
    """Single-agent view of the recurrent baseline: 5 Q-values and the next
    hidden vector, with no dependence on any other agent."""
    feats = Tensor(obs_features(obs_k, pose_k, width).reshape(1, -1))
    q, h_next = baseline_step(params, feats, h_k)
    return ad.reshape(q, (cfg.n_actions,)), h_next


def baseline_forward_team(
    params: dict[str, Tensor],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
    h: Tensor,
) -> tuple[Tensor, Tensor]:
    """All agents batched as rows; numerically identical to per-agent calls."""
    feats = np.stack([obs_features(o, p, width) for o, p in zip(observations, poses)])
    return baseline_step(params, Tensor(feats), h)


def baseline_init_hidden(cfg: BaselineConfig, n_agents: int) -> np.ndarray:
    return np.zeros((n_agents, cfg.hidden))


# ------------------------------------------------------- fast (tape-free) path
#
# Rollouts and target evaluations need values only. These mirrors repeat the
# taped math operation for operation (same expressions, same order), so their
# outputs are bit-identical to the graph path; a test enforces that.


def _np_softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _np_layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return (centered * inv_std) * gain + bias


def _np_elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def policy_forward_np(
    params: dict[str, np.ndarray],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
    h_prev: np.ndarray,
    cfg: PolicyConfig,
) -> tuple[np.ndarray, np.ndarray, list[list[np.ndarray]]]:
    """Value-only twin of :func:`policy_forward` (no graph, same numbers)."""
    n = len(observations)
    feats = np.stack([obs_features(o, p, width) for o, p in zip(observations, poses)])
    tokens = feats @ params["emb/w"] + params["emb/b"]
    x = np.concatenate([tokens, h_prev], axis=0)
    attn: list[list[np.ndarray]] = []
    for layer in range(cfg.depth):
        heads = []
        maps = []
        for head in range(cfg.heads):
            q = x @ params[f"l{layer}/h{head}/wq"]
            k = x @ params[f"l{layer}/h{head}/wk"]
            v = x @ params[f"l{layer}/h{head}/wv"]
            logits = (q @ k.T.copy()) * (1.0 / np.sqrt(q.shape[1]))
            weights = _np_softmax_rows(logits)
            heads.append(weights @ v)
            maps.append(weights)
        attn.append(maps)
        mixed = np.concatenate(heads, axis=1) @ params[f"l{layer}/attn_w"] + params[f"l{layer}/attn_b"]
        y = x + mixed
        if cfg.layer_norm:
            y = _np_layer_norm(y, params[f"l{layer}/ln1_g"], params[f"l{layer}/ln1_b"])
        ff = _np_elu(y @ params[f"l{layer}/ff1_w"] + params[f"l{layer}/ff1_b"]) @ params[f"l{layer}/ff2_w"] + params[f"l{layer}/ff2_b"]
        x = y + ff
        if cfg.layer_norm:
            x = _np_layer_norm(x, params[f"l{layer}/ln2_g"], params[f"l{layer}/ln2_b"])
    q_out = x[0:n].copy() @ params["head/w"] + params["head/b"]
    h_next = x[n:].copy()
    return q_out, h_next, attn


def baseline_step_np(
    params: dict[str, np.ndarray], feats: np.ndarray, h: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Value-only twin of :func:`baseline_step`."""
    x = _np_elu(feats @ params["emb/w"] + params["emb/b"])

    def gate(tag):
        return x @ params[f"gru/w{tag}"] + h @ params[f"gru/u{tag}"] + params[f"gru/b{tag}"]

    z = 1.0 / (1.0 + np.exp(-gate("z")))
    r = 1.0 / (1.0 + np.exp(-gate("r")))
    n = np.tanh(x @ params["gru/wn"] + (r * h) @ params["gru/un"] + params["gru/bn"])
    one_minus_z = z * -1.0 + 1.0
    h_next = one_minus_z * n + z * h
    q = h_next @ params["head/w"] + params["head/b"]
    return q, h_next


def baseline_forward_team_np(
    params: dict[str, np.ndarray],
    observations: list[PursuerObservation],
    poses: list,
    width: int,
    h: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    feats = np.stack([obs_features(o, p, width) for o, p in zip(observations, poses)])
    return baseline_step_np(params, feats, h)
