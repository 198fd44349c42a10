"""Run configuration: every knob of a training run, with defaults.

Config files are flat YAML mappings. Unknown keys are errors. An ``include``
key names a tree definition file (relative to the config file) and sets
``env`` to it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..agent import ALGORITHMS, LR_PRESETS, AgentConfig
from ..envs.reach import RewardSpec


class ConfigError(ValueError):
    """Raised with the name of the offending key."""

    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


@dataclass
class TrainConfig:
    env: str = "mini-4link"
    algorithm: str = "digrad-single-heuristic"
    episodes: int = 2000
    max_steps: int = 200
    seeds: list = field(default_factory=lambda: [0])

    hidden: list = field(default_factory=lambda: [400, 300])
    lr_preset: str | None = "literal"
    actor_lr: float | None = None
    critic_lr: float | None = None
    rms_decay: float = 0.9
    rms_eps: float = 1e-8
    gamma: float = 0.99
    tau: float = 0.001
    bootstrap: str = "head"

    batch_size: int = 64
    buffer_capacity: int = 1_000_000
    noise_sigma: float = 0.3          # fraction of the action bound
    noise_decay: float = 0.995        # per episode

    reach_fraction: float = 0.02
    reach_tolerance: float | None = None
    success_bonus: float = 0.5
    all_bonus: float = 1.0
    penalty: float = 1.0
    dt: float = 1.0

    eval_every: int = 50
    eval_episodes: int = 20
    eval_seed: int = 10_000
    output_dir: str = "runs"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"unknown tag {self.algorithm!r}; expected one of {sorted(ALGORITHMS)}")
        for key in ("max_steps", "batch_size", "buffer_capacity", "eval_every", "eval_episodes"):
            if not isinstance(getattr(self, key), int) or getattr(self, key) < 1:
                raise ConfigError(key, "must be a positive integer")
        if not isinstance(self.episodes, int) or self.episodes < 0:
            raise ConfigError("episodes", "must be a non-negative integer")
        if not self.seeds or not all(isinstance(s, int) for s in self.seeds):
            raise ConfigError("seeds", "must be a non-empty list of integers")
        if not self.hidden or not all(isinstance(h, int) and h > 0 for h in self.hidden):
            raise ConfigError("hidden", "must be a non-empty list of positive integers")
        if self.lr_preset is not None and self.lr_preset not in LR_PRESETS:
            raise ConfigError("lr_preset", f"expected one of {sorted(LR_PRESETS)} or null")
        if self.lr_preset is None and (self.actor_lr is None or self.critic_lr is None):
            raise ConfigError("lr_preset", "null preset needs both actor_lr and critic_lr")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma", "must be non-negative")
        if not 0 < self.noise_decay <= 1:
            raise ConfigError("noise_decay", "must lie in (0, 1]")
        try:
            self.agent_config()
        except ValueError as exc:
            raise ConfigError(_guess_key(str(exc)), str(exc)) from None
        try:
            self.reward_spec()
        except ValueError as exc:
            raise ConfigError(_guess_key(str(exc)), str(exc)) from None

    def learning_rates(self) -> tuple[float, float]:
        preset = LR_PRESETS.get(self.lr_preset, {})
        actor = self.actor_lr if self.actor_lr is not None else preset["actor_lr"]
        critic = self.critic_lr if self.critic_lr is not None else preset["critic_lr"]
        return actor, critic

    def agent_config(self, action_bound: float = 0.1) -> AgentConfig:
        actor_lr, critic_lr = self.learning_rates()
        return AgentConfig(hidden=tuple(self.hidden), actor_lr=actor_lr, critic_lr=critic_lr,
                           rms_decay=self.rms_decay, rms_eps=self.rms_eps, gamma=self.gamma,
                           tau=self.tau, action_bound=action_bound, bootstrap=self.bootstrap)

    def reward_spec(self) -> RewardSpec:
        return RewardSpec(self.reach_fraction, self.reach_tolerance, self.success_bonus,
                          self.all_bonus, self.penalty)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _guess_key(message: str) -> str:
    names = [f.name for f in fields(TrainConfig)]
    for name in sorted(names, key=len, reverse=True):
        if name in message:
            return name
    return "?"


def config_from_dict(d: dict, base_dir=None) -> TrainConfig:
    d = dict(d or {})
    known = {f.name for f in fields(TrainConfig)}
    if "include" in d:
        inc = Path(d.pop("include"))
        if base_dir is not None and not inc.is_absolute():
            inc = Path(base_dir) / inc
        if not inc.exists():
            raise ConfigError("include", f"tree file {str(inc)!r} not found")
        d["env"] = str(inc)
    for key in d:
        if key not in known:
            raise ConfigError(key, "unknown key")
    if "seeds" in d and isinstance(d["seeds"], int):
        d["seeds"] = [d["seeds"]]
    float_keys = [f.name for f in fields(TrainConfig) if "float" in str(f.type)]
    for key in float_keys:
        if isinstance(d.get(key), str):  # yaml 1.1 reads "1e-3" as a string
            try:
                d[key] = float(d[key])
            except ValueError:
                raise ConfigError(key, f"not a number: {d[key]!r}") from None
    try:
        return TrainConfig(**d)
    except TypeError as exc:
        raise ConfigError("?", str(exc)) from None


def load_config(path) -> TrainConfig:
    path = Path(path)
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config file must be a mapping")
    return config_from_dict(data, base_dir=path.parent)
