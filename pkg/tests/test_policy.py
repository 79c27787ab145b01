"""Agent-network tests: token embedding, attention, equivariance, gradients."""

import math

import numpy as np
import pytest

from pursuitlab import autodiff as ad
from pursuitlab import policy as pol
from pursuitlab.autodiff import Tensor
from pursuitlab.env import EnvConfig, observe, reset
from pursuitlab.errors import ContractViolation

RNG = np.random.default_rng(7)


def oracle_attention(q, k, v):
    """Straight-line re-evaluation of scaled dot-product attention."""
    dk = q.shape[1]
    out = np.zeros((q.shape[0], v.shape[1]))
    for i in range(q.shape[0]):
        logits = np.array([float(q[i] @ k[j]) / math.sqrt(dk) for j in range(k.shape[0])])
        e = np.exp(logits - logits.max())
        w = e / e.sum()
        for j in range(v.shape[0]):
            out[i] += w[j] * v[j]
    return out


def _scene(n_pursuers=8, width=13, seed=3, view=5):
    world = reset(EnvConfig(width=width, n_pursuers=n_pursuers, n_evaders=4, view=view), seed)
    obs = [observe(world, k) for k in range(n_pursuers)]
    poses = [(p.position, p.heading) for p in world.pursuers]
    return world, obs, poses


SMALL = pol.PolicyConfig(embed_dim=16, heads=2, depth=2, view=5)


def test_config_validates_head_split():
    with pytest.raises(ContractViolation):
        pol.PolicyConfig(embed_dim=250, heads=4)


def test_embed_tokens_shape_and_determinism():
    _, obs, poses = _scene()
    cfg = pol.PolicyConfig()  # paper-sized: 250 wide, 5 heads
    params = ad.wrap_params(make_params(cfg), False)
    tokens = pol.embed_tokens(params, obs, poses, 13)
    again = pol.embed_tokens(params, obs, poses, 13)
    assert tokens.data.shape == (8, 250)
    assert np.array_equal(tokens.data, again.data)


def make_params(cfg, seed=11):
    return pol.make_policy_params(np.random.default_rng(seed), cfg)


def test_embed_tokens_zero_input_gives_bias():
    _, obs, poses = _scene(n_pursuers=1)
    raw = make_params(SMALL)
    raw["emb/b"] = RNG.normal(size=16)
    params = ad.wrap_params(raw, False)
    zero_obs = obs[0]
    zero_obs.evaders[:] = 0
    zero_obs.obstacles[:] = 0
    pose = ((0, 0), "N")
    token = pol.embed_tokens(params, [zero_obs], [pose], 13).data
    # position (0,0) and heading N still contribute; zero those columns too
    feats = pol.obs_features(zero_obs, pose, 13)
    manual = feats @ raw["emb/w"] + raw["emb/b"]
    assert np.array_equal(token[0], manual)


def test_features_reject_mixed_windows():
    _, obs, poses = _scene(n_pursuers=2)
    obs[1].view = 3
    params = ad.wrap_params(make_params(SMALL), False)
    with pytest.raises(ContractViolation):
        pol.embed_tokens(params, obs, poses, 13)


def test_attention_single_token_passthrough():
    q = Tensor(RNG.normal(size=(1, 4)))
    k = Tensor(RNG.normal(size=(1, 4)))
    v = Tensor(RNG.normal(size=(1, 6)))
    assert np.allclose(pol.attention(q, k, v).data, v.data, atol=1e-15)


def test_attention_uniform_when_orthogonal():
    k = Tensor(np.zeros((4, 3)))
    q = Tensor(RNG.normal(size=(2, 3)))
    v = Tensor(RNG.normal(size=(4, 5)))
    out = pol.attention(q, k, v).data
    assert np.allclose(out, v.data.mean(axis=0), atol=1e-12)


def test_attention_matches_oracle():
    q = RNG.normal(size=(3, 4))
    k = RNG.normal(size=(3, 4))
    v = RNG.normal(size=(3, 4))
    got = pol.attention(Tensor(q), Tensor(k), Tensor(v)).data
    assert np.allclose(got, oracle_attention(q, k, v), atol=1e-12)


def test_attention_shape_contracts():
    with pytest.raises(ContractViolation):
        pol.attention(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))), Tensor(np.ones((2, 2))))
    with pytest.raises(ContractViolation):
        pol.attention(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 3))), Tensor(np.ones((2, 2))))


def test_block_preserves_shape_and_attention_rows():
    params = ad.wrap_params(make_params(SMALL), False)
    x = Tensor(RNG.normal(size=(9, 16)))
    out, maps = pol.transformer_block(x, params, 0, SMALL)
    assert out.data.shape == (9, 16)
    assert len(maps) == SMALL.heads
    for m in maps:
        assert m.shape == (9, 9)
        assert np.abs(m.sum(axis=1) - 1.0).max() < 1e-9
    assert np.isfinite(out.data).all()


def test_block_permutation_equivariance():
    params = ad.wrap_params(make_params(SMALL), False)
    x = RNG.normal(size=(6, 16))
    perm = np.array([3, 0, 4, 1, 5, 2])
    out = pol.transformer_block(Tensor(x), params, 0, SMALL)[0].data
    out_p = pol.transformer_block(Tensor(x[perm]), params, 0, SMALL)[0].data
    assert np.abs(out_p - out[perm]).max() < 1e-12


def test_policy_forward_shapes():
    _, obs, poses = _scene()
    cfg = pol.PolicyConfig()  # 250 / 5 heads / depth 2
    params = ad.wrap_params(make_params(cfg), False)
    h0 = Tensor(pol.init_hidden(cfg, 8))
    q, h_next, attn = pol.policy_forward(params, obs, poses, 13, h0, cfg)
    assert q.data.shape == (8, 5)
    assert h_next.data.shape == (1, 250)
    assert len(attn) == 2 and all(len(layer) == 5 for layer in attn)
    assert all(m.shape == (9, 9) for layer in attn for m in layer)
    for layer in attn:
        for m in layer:
            assert np.abs(m.sum(axis=1) - 1.0).max() < 1e-9


def test_policy_forward_deterministic_from_zero_hidden():
    _, obs, poses = _scene(n_pursuers=4)
    params = ad.wrap_params(make_params(SMALL), False)
    h0 = Tensor(pol.init_hidden(SMALL, 4))
    a = pol.policy_forward(params, obs, poses, 13, h0, SMALL)[0].data
    b = pol.policy_forward(params, obs, poses, 13, Tensor(pol.init_hidden(SMALL, 4)), SMALL)[0].data
    assert np.array_equal(a, b)


def test_policy_forward_agent_swap_equivariance():
    _, obs, poses = _scene(n_pursuers=6)
    params = ad.wrap_params(make_params(SMALL), False)
    h0 = Tensor(pol.init_hidden(SMALL, 6))
    q = pol.policy_forward(params, obs, poses, 13, h0, SMALL)[0].data
    order = [4, 1, 0, 5, 3, 2]
    q_perm = pol.policy_forward(
        params, [obs[i] for i in order], [poses[i] for i in order], 13, h0, SMALL
    )[0].data
    assert np.abs(q_perm - q[order]).max() < 1e-12


def test_policy_forward_per_agent_hidden_mode():
    cfg = pol.PolicyConfig(embed_dim=16, heads=2, depth=2, hidden_mode="per-agent")
    _, obs, poses = _scene(n_pursuers=3)
    params = ad.wrap_params(make_params(cfg), False)
    h0 = Tensor(pol.init_hidden(cfg, 3))
    assert h0.data.shape == (3, 16)
    q, h_next, attn = pol.policy_forward(params, obs, poses, 13, h0, cfg)
    assert q.data.shape == (3, 5)
    assert h_next.data.shape == (3, 16)
    assert attn[0][0].shape == (6, 6)


def test_policy_unroll_gradients_match_finite_differences():
    cfg = pol.PolicyConfig(embed_dim=8, heads=2, depth=2)
    world, obs, poses = _scene(n_pursuers=2, seed=5)
    params = make_params(cfg, seed=2)
    target = np.random.default_rng(3).normal(size=(2, 5))

    def loss(leaves):
        h = Tensor(pol.init_hidden(cfg, 2))
        total = None
        for _ in range(3):
            q, h, _ = pol.policy_forward(leaves, obs, poses, 13, h, cfg)
            term = ad.mse(q, Tensor(target))
            total = term if total is None else ad.add(total, term)
        return total

    assert ad.grad_check(loss, params, h=1e-6) < 1e-5


def test_no_layer_norm_toggle_still_works():
    cfg = pol.PolicyConfig(embed_dim=8, heads=2, depth=2, layer_norm=False)
    _, obs, poses = _scene(n_pursuers=2)
    params = ad.wrap_params(make_params(cfg), False)
    q, _, _ = pol.policy_forward(params, obs, poses, 13, Tensor(pol.init_hidden(cfg, 2)), cfg)
    assert np.isfinite(q.data).all()


# ------------------------------------------------------------------ baseline


BASE = pol.BaselineConfig(hidden=32)


def test_baseline_deterministic():
    _, obs, poses = _scene(n_pursuers=1)
    params = ad.wrap_params(pol.make_baseline_params(RNG, BASE), False)
    h = Tensor(np.zeros((1, 32)))
    q1, h1 = pol.baseline_forward(params, obs[0], poses[0], h, 13, BASE)
    q2, h2 = pol.baseline_forward(params, obs[0], poses[0], Tensor(np.zeros((1, 32))), 13, BASE)
    assert np.array_equal(q1.data, q2.data)
    assert np.array_equal(h1.data, h2.data)


def test_baseline_zero_weights_give_bias_q():
    _, obs, poses = _scene(n_pursuers=1)
    raw = pol.make_baseline_params(np.random.default_rng(0), BASE)
    for k in raw:
        raw[k] = np.zeros_like(raw[k])
    raw["head/b"] = np.arange(5.0)
    params = ad.wrap_params(raw, False)
    q, _ = pol.baseline_forward(params, obs[0], poses[0], Tensor(np.zeros((1, 32))), 13, BASE)
    assert np.array_equal(q.data, np.arange(5.0))


def test_baseline_team_matches_single_agent_calls():
    _, obs, poses = _scene(n_pursuers=4)
    params = ad.wrap_params(pol.make_baseline_params(np.random.default_rng(4), BASE), False)
    h = np.random.default_rng(5).normal(size=(4, 32))
    team_q, team_h = pol.baseline_forward_team(params, obs, poses, 13, Tensor(h))
    for k in range(4):
        qk, hk = pol.baseline_forward(
            params, obs[k], poses[k], Tensor(h[k : k + 1]), 13, BASE
        )
        assert np.allclose(team_q.data[k], qk.data, atol=1e-15)
        assert np.allclose(team_h.data[k], hk.data[0], atol=1e-15)


def test_fast_eval_twin_is_bit_identical_transformer():
    # the value-only path must emit exactly what the taped path emits
    for seed in (0, 1, 2):
        cfg = pol.PolicyConfig(embed_dim=24, heads=3, depth=2, layer_norm=seed != 1)
        raw = pol.make_policy_params(np.random.default_rng(seed), cfg)
        _, obs, poses = _scene(n_pursuers=5, seed=seed + 10)
        h = np.random.default_rng(seed + 50).normal(size=(1, 24))
        q_np, h_np, attn_np = pol.policy_forward_np(raw, obs, poses, 13, h, cfg)
        params = ad.wrap_params(raw, False)
        q_t, h_t, attn_t = pol.policy_forward(params, obs, poses, 13, Tensor(h), cfg)
        assert np.array_equal(q_np, q_t.data)
        assert np.array_equal(h_np, h_t.data)
        for layer_np, layer_t in zip(attn_np, attn_t):
            for m_np, m_t in zip(layer_np, layer_t):
                assert np.array_equal(m_np, m_t)


def test_fast_eval_twin_is_bit_identical_gru():
    cfg = pol.BaselineConfig(hidden=16)
    raw = pol.make_baseline_params(np.random.default_rng(8), cfg)
    _, obs, poses = _scene(n_pursuers=3, seed=2)
    h = np.random.default_rng(9).normal(size=(3, 16))
    q_np, h_np = pol.baseline_forward_team_np(raw, obs, poses, 13, h)
    params = ad.wrap_params(raw, False)
    q_t, h_t = pol.baseline_forward_team(params, obs, poses, 13, Tensor(h))
    assert np.array_equal(q_np, q_t.data)
    assert np.array_equal(h_np, h_t.data)


def test_baseline_recurrent_gradients():
    cfg = pol.BaselineConfig(hidden=8)
    _, obs, poses = _scene(n_pursuers=2)
    params = pol.make_baseline_params(np.random.default_rng(9), cfg)
    target = np.random.default_rng(10).normal(size=(2, 5))

    def loss(leaves):
        h = Tensor(np.zeros((2, cfg.hidden)))
        total = None
        for _ in range(5):
            q, h = pol.baseline_forward_team(leaves, obs, poses, 13, h)
            term = ad.mse(q, Tensor(target))
            total = term if total is None else ad.add(total, term)
        return total

    assert ad.grad_check(loss, params, h=1e-6) < 1e-5
