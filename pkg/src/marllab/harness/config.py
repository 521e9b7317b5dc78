"""Run configuration: `key = value` files with `#` comments.

Unknown keys are rejected with their line number; missing keys take the
published defaults (per-environment temperature and episode length, shared
optimiser settings).  The fully resolved configuration is echoed into the
output directory so a run is reproducible from its artifacts alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from ..algorithms import ALGORITHMS, AlgoSpec
from ..environments import ENV_NAMES, Environment, make_env

TABULAR_ALGOS = ("tabular_qmix", "tabular_qmixs")

ENV_ALPHA = {"simple_world": 0.02, "multi_pendulum": 0.01,
             "predator_prey": 0.01, "po_predator_prey": 0.01,
             "matrix_game": 3.0}
ENV_EPISODE_LENGTH = {"matrix_game": 1, "simple_world": 1,
                      "multi_pendulum": 200, "predator_prey": 100,
                      "po_predator_prey": 100}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    env: str = "simple_world"
    algo: str = ""                     # resolved after parsing
    policy: str = ""
    critic: str = ""
    seed: int = 0
    total_steps: int = 20000
    eval_interval: int = 2000
    eval_episodes: int = 10
    out: str = ""
    alpha: float = float("nan")        # resolved from env default
    gamma: float = 0.95
    batch_size: int = 256
    buffer_size: int = 500000
    policy_lr: float = 1e-4
    critic_lr: float = 1e-3
    target_period: int = 200
    attention_heads: int = 4
    m: int = 1
    jitter: float = 1e-6
    hidden: int = -1                   # resolved: 10 for simple_world, else 64
    mixing_embed: int = 32
    expl_noise: float = 0.1
    warmup_steps: int = 1000
    updates_per_step: int = -1        # resolved default: 1
    entropy_bootstrap: bool = True
    n_agents: int = -1                 # pendulum only; -1 = env default
    episode_length: int = -1           # -1 = env default
    reward_mode: str = "sparse"
    partial_rewards: dict[int, float] = field(
        default_factory=lambda: {1: 0.1, 3: 0.2})
    iterations: int = 8000             # tabular fits

    def algo_spec(self) -> AlgoSpec:
        pk, ck = ALGORITHMS[self.algo]
        return AlgoSpec(
            policy_kind=pk, critic_kind=ck, alpha=self.alpha, gamma=self.gamma,
            batch_size=self.batch_size, policy_lr=self.policy_lr,
            critic_lr=self.critic_lr, target_period=self.target_period,
            attention_heads=self.attention_heads, factor_rank=self.m,
            jitter=self.jitter, hidden=self.hidden,
            mixing_embed=self.mixing_embed, expl_noise=self.expl_noise,
            warmup_steps=self.warmup_steps,
            entropy_bootstrap=self.entropy_bootstrap,
            buffer_size=self.buffer_size)

    def make_env(self) -> Environment:
        return make_env(self.env,
                        n_agents=None if self.n_agents < 0 else self.n_agents,
                        episode_length=(None if self.episode_length < 0
                                        else self.episode_length),
                        reward_mode=self.reward_mode,
                        partial_rewards=self.partial_rewards)

    def to_text(self) -> str:
        lines = ["# resolved run configuration"]
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name == "partial_rewards":
                val = ",".join(f"{k}:{v}" for k, v in sorted(val.items()))
            elif isinstance(val, bool):
                val = "true" if val else "false"
            lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"


_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


def _parse_partial_rewards(text: str, lineno: int) -> dict[int, float]:
    out: dict[int, float] = {}
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if ":" not in piece:
            raise ConfigError(f"line {lineno}: expected count:reward pairs, "
                              f"got {piece!r}")
        k, v = piece.split(":", 1)
        try:
            out[int(k)] = float(v)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad count:reward pair "
                              f"{piece!r}") from exc
    return out


def parse_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    cfg = RunConfig()
    typed = {f.name: f for f in fields(RunConfig)}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in typed:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} "
                              f"(first set on line {seen[key]})")
        seen[key] = lineno
        setattr(cfg, key, _coerce(key, value, typed[key].type, lineno))
    if overrides:
        for key, value in overrides.items():
            setattr(cfg, key, value)
    return _resolve(cfg)


def _coerce(key: str, value: str, ftype: str, lineno: int):
    if key == "partial_rewards":
        return _parse_partial_rewards(value, lineno)
    if ftype == "bool":
        if value.lower() not in _BOOL:
            raise ConfigError(f"line {lineno}: {key} expects a boolean, "
                              f"got {value!r}")
        return _BOOL[value.lower()]
    if ftype == "int":
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key} expects an integer, "
                              f"got {value!r}") from exc
    if ftype == "float":
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key} expects a number, "
                              f"got {value!r}") from exc
    return value


def _resolve(cfg: RunConfig) -> RunConfig:
    if cfg.env not in ENV_NAMES:
        raise ConfigError(f"unknown environment {cfg.env!r}; "
                          f"choose from {ENV_NAMES}")
    discrete = cfg.env == "matrix_game"
    if not cfg.algo and (cfg.policy or cfg.critic):
        # kinds given without a named algo: resolve the name from the pair
        if not (cfg.policy and cfg.critic):
            raise ConfigError("policy and critic must be given together")
        matches = [name for name, pair in ALGORITHMS.items()
                   if pair == (cfg.policy, cfg.critic)]
        if not matches:
            raise ConfigError(f"no algorithm with policy={cfg.policy!r} "
                              f"critic={cfg.critic!r}")
        cfg.algo = matches[0]
    if not cfg.algo:
        cfg.algo = "tabular_qmix" if discrete else "iac"
    known = tuple(ALGORITHMS) + TABULAR_ALGOS
    if cfg.algo not in known:
        raise ConfigError(f"unknown algorithm {cfg.algo!r}; choose from {known}")
    if discrete and cfg.algo not in TABULAR_ALGOS:
        raise ConfigError(f"{cfg.algo!r} needs continuous actions; the matrix "
                          f"game is handled by tabular_qmix / tabular_qmixs")
    if not discrete and cfg.algo in TABULAR_ALGOS:
        raise ConfigError(f"{cfg.algo!r} applies to the matrix game only")
    if cfg.algo in ALGORITHMS:
        pk, ck = ALGORITHMS[cfg.algo]
        if cfg.policy and cfg.policy != pk:
            raise ConfigError(f"algo {cfg.algo!r} implies policy {pk!r}, "
                              f"conflicting with policy = {cfg.policy!r}")
        if cfg.critic and cfg.critic != ck:
            raise ConfigError(f"algo {cfg.algo!r} implies critic {ck!r}, "
                              f"conflicting with critic = {cfg.critic!r}")
        cfg.policy, cfg.critic = pk, ck
    if cfg.alpha != cfg.alpha:  # NaN: unset
        cfg.alpha = ENV_ALPHA[cfg.env]
    if cfg.alpha <= 0:
        raise ConfigError("alpha must be positive")
    if cfg.hidden < 0:
        cfg.hidden = 10 if cfg.env == "simple_world" else 64
    if cfg.updates_per_step < 0:
        cfg.updates_per_step = 1
    if cfg.episode_length < 0:
        cfg.episode_length = ENV_EPISODE_LENGTH[cfg.env]
    if cfg.n_agents < 0 and cfg.env == "multi_pendulum":
        cfg.n_agents = 3
    if not cfg.out:
        cfg.out = f"runs/{cfg.env}_{cfg.algo}_s{cfg.seed}"
    return cfg
