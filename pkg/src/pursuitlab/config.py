"""Run configuration: a small key = value text format with full defaults.

An empty file is a complete configuration (the reference 13x13 eight-versus-
four scenario). Unknown keys and malformed values are rejected with their
line number. The canonical snapshot text is the identity of a run: its hash
plus the seed names the run directory, and feeding the snapshot back in
reproduces the run exactly.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

from .env import EnvConfig
from .errors import ConfigFileError, InvalidConfig
from .trainer import ALGORITHMS, TrainConfig

ENV_RUN_ROOT = "PURSUITLAB_RUNS"


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "width": (int, 13),
    "pursuers": (int, 8),
    "evaders": (int, 4),
    "view": (int, 5),
    "horizon": (int, 50),
    "evader_strategy": (str, ""),
    "algorithm": (str, "t3-qmix"),
    "seed": (int, 0),
    "gamma": (float, 0.95),
    "batch": (int, 32),
    "eps_decay": (float, 0.0001),
    "eps_min": (float, 0.1),
    "total_steps": (int, 30000),
    "target_period": (int, 200),
    "replay_capacity": (int, 5000),
    "lr": (float, 0.001),
    "bptt_window": (int, 5),
    "bptt_full": (_bool, False),
    "windows_per_episode": (int, 1),
    "updates_per_episode": (int, 1),
    "double_q": (_bool, True),
    "eval_period": (int, 0),
    "eval_episodes": (int, 50),
    "max_train_steps": (int, 0),
    "embed_dim": (int, 250),
    "heads": (int, 5),
    "depth": (int, 2),
    "mix_hidden": (int, 128),
    "hyper_hidden": (int, 128),
    "rnn_hidden": (int, 128),
    "layer_norm": (_bool, True),
    "hidden_mode": (str, "team"),
    "run_root": (str, ""),
}


@dataclass
class RunConfig:
    train: TrainConfig
    run_root: str
    canonical: str

    @property
    def ratio(self) -> float:
        """Pursuer-to-evader ratio (the scenario difficulty knob)."""
        return self.train.env.n_pursuers / self.train.env.n_evaders

    @property
    def run_name(self) -> str:
        digest = hashlib.sha256(self.canonical.encode()).hexdigest()[:12]
        return f"{digest}-s{self.train.seed}"


def parse_scenario(raw: str) -> tuple[int, int]:
    """Expand an 'NvM' shorthand such as 8v4 into (pursuers, evaders)."""
    parts = raw.lower().split("v")
    if len(parts) != 2:
        raise ValueError(f"scenario must look like 8v4, got {raw!r}")
    return int(parts[0]), int(parts[1])


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"no such config file: {path}")
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"expected key = value, got {line!r}", lineno)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key == "scenario":
            try:
                values["pursuers"], values["evaders"] = parse_scenario(raw_value)
            except ValueError as exc:
                raise ConfigFileError(str(exc), lineno) from exc
            continue
        if key not in SCHEMA:
            raise ConfigFileError(f"unknown key {key!r}", lineno)
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(raw_value)
        except ValueError as exc:
            raise ConfigFileError(f"bad value for {key}: {raw_value!r}", lineno) from exc
    return build_run_config(values)


def build_run_config(values: dict) -> RunConfig:
    if values["width"] < 5 or values["width"] % 2 == 0:
        raise ConfigFileError(f"width must be odd and >= 5, got {values['width']}")
    if values["view"] < 1 or values["view"] % 2 == 0:
        raise ConfigFileError(f"view must be odd and >= 1, got {values['view']}")
    if values["algorithm"] not in ALGORITHMS:
        raise ConfigFileError(
            f"unknown algorithm {values['algorithm']!r}; choose from {', '.join(ALGORITHMS)}"
        )
    if values["pursuers"] < 1 or values["evaders"] < 1:
        raise ConfigFileError("pursuers and evaders must both be at least 1")
    if values["evader_strategy"] not in ("", "Still", "LatLoop", "LongLoop", "Circle"):
        raise ConfigFileError(f"unknown evader_strategy {values['evader_strategy']!r}")
    env = EnvConfig(
        width=values["width"],
        n_pursuers=values["pursuers"],
        n_evaders=values["evaders"],
        view=values["view"],
        horizon=values["horizon"],
        strategy=values["evader_strategy"],
    )
    try:
        train = TrainConfig(
            env=env,
            algorithm=values["algorithm"],
            gamma=values["gamma"],
            batch_size=values["batch"],
            eps_decay=values["eps_decay"],
            eps_min=values["eps_min"],
            total_steps=values["total_steps"],
            target_period=values["target_period"],
            replay_capacity=values["replay_capacity"],
            lr_peak=values["lr"],
            bptt_window=values["bptt_window"],
            bptt_full=values["bptt_full"],
            windows_per_episode=values["windows_per_episode"],
            updates_per_episode=values["updates_per_episode"],
            double_q=values["double_q"],
            eval_period=values["eval_period"],
            eval_episodes=values["eval_episodes"],
            max_train_steps=values["max_train_steps"],
            seed=values["seed"],
            embed_dim=values["embed_dim"],
            heads=values["heads"],
            depth=values["depth"],
            mix_hidden=values["mix_hidden"],
            hyper_hidden=values["hyper_hidden"],
            rnn_hidden=values["rnn_hidden"],
            layer_norm=values["layer_norm"],
            hidden_mode=values["hidden_mode"],
        )
    except InvalidConfig as exc:
        raise ConfigFileError(str(exc)) from exc
    run_root = values["run_root"] or os.environ.get(ENV_RUN_ROOT, "runs")
    canonical = canonical_text(values)
    return RunConfig(train=train, run_root=run_root, canonical=canonical)


def canonical_text(values: dict) -> str:
    lines = []
    for key in sorted(SCHEMA):
        value = values[key]
        rendered = str(value).lower() if isinstance(value, bool) else repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def default_run_config() -> RunConfig:
    return build_run_config({key: default for key, (_, default) in SCHEMA.items()})
