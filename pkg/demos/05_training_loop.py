"""A miniature end-to-end training run.

Trains the transformer-plus-monotonic-mixer agent on a small still-target
scenario for a couple of thousand steps, then compares greedy evaluation
against the uniform-random baseline. For the full smoke-scale run, see the
acceptance suite or the `pursuitlab train` command.
Run:  python demos/05_training_loop.py      (about a minute)
"""

import time

from pursuitlab import trainer as tr
from pursuitlab.env import EnvConfig

env = EnvConfig(width=7, n_pursuers=2, n_evaders=1, horizon=30, strategy="Still")
cfg = tr.TrainConfig(
    env=env,
    algorithm="t3-qmix",
    total_steps=4000,
    embed_dim=16,
    heads=2,
    depth=2,
    mix_hidden=8,
    hyper_hidden=8,
    replay_capacity=200,
    target_period=25,
    windows_per_episode=2,
    eval_period=2000,
    eval_episodes=10,
    seed=1,
)

t0 = time.time()
result = tr.train(cfg)
print(f"{result.env_steps} env steps, {result.train_steps} updates, {time.time() - t0:.0f}s")
for row in result.metrics:
    print(
        f"  step {row['env_step']:>5}  eps {row['epsilon']:.2f}  "
        f"loss {row['loss']:.4f}  eval reward {row['eval_mean_reward']:.2f}"
    )

random_nets = tr.build_nets(tr.TrainConfig(env=env, algorithm="random"))
baseline = tr.evaluate(random_nets, env, episodes=50, seed=0)
trained = tr.evaluate(result.nets, env, episodes=50, seed=0)
print(f"\nrandom baseline: {baseline['mean_global_reward']:.2f}")
print(f"after training:  {trained['mean_global_reward']:.2f}")
print("(a short demo run; the acceptance smoke run trains 30k steps)")
