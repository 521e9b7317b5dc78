"""Training loop and ablation matrix.

An algorithm is a (policy kind, critic kind) pair: policy kind in
{deterministic, independent_soft, collaborative_soft}, critic kind in
{mix, attention_mix}.  The named algorithms cover the full ablation grid;
``iac`` is the full method (coupled exploration + attention critic).

Per environment step: collect one transition, then (after warmup) sample
one minibatch and run a policy update followed by a critic update on it,
hard-syncing targets every ``target_period`` updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffmath as dm
from . import distributions as dist
from .diffmath import Adam, Tensor
from .environments import Environment, StepResult, make_env
from .networks import (
    AttentionCritic,
    CollabNet,
    GaussianPolicy,
    JointPolicy,
    MixingNet,
    PlainCritic,
    named_params,
    sync_targets,
)

POLICY_KINDS = ("deterministic", "independent_soft", "collaborative_soft")
CRITIC_KINDS = ("mix", "attention_mix")

ALGORITHMS: dict[str, tuple[str, str]] = {
    "iac": ("collaborative_soft", "attention_mix"),
    "sq": ("collaborative_soft", "mix"),
    "siaq": ("independent_soft", "attention_mix"),
    "siq": ("independent_soft", "mix"),
    "attn_qmix": ("deterministic", "attention_mix"),
    "ddpg_mix": ("deterministic", "mix"),
}


class TrainerAbort(RuntimeError):
    """Raised when a loss goes non-finite; carries a diagnostic snapshot."""

    def __init__(self, message: str, snapshot: dict[str, np.ndarray]) -> None:
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class AlgoSpec:
    policy_kind: str = "collaborative_soft"
    critic_kind: str = "attention_mix"
    alpha: float = 0.01
    gamma: float = 0.95
    batch_size: int = 256
    policy_lr: float = 1e-4
    critic_lr: float = 1e-3
    target_period: int = 200
    attention_heads: int = 4
    factor_rank: int = 1
    jitter: float = 1e-6
    hidden: int = 64
    mixing_embed: int = 32
    expl_noise: float = 0.1
    warmup_steps: int = 1000
    updates_per_step: int = 1
    entropy_bootstrap: bool = True
    buffer_size: int = 500_000

    def __post_init__(self) -> None:
        if self.policy_kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.policy_kind!r}")
        if self.critic_kind not in CRITIC_KINDS:
            raise ValueError(f"unknown critic kind {self.critic_kind!r}")

    @property
    def algo_name(self) -> str:
        for name, (pk, ck) in ALGORITHMS.items():
            if (pk, ck) == (self.policy_kind, self.critic_kind):
                return name
        return f"{self.policy_kind}+{self.critic_kind}"

    @staticmethod
    def named(algo: str, **overrides) -> "AlgoSpec":
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algo!r}; "
                             f"choose from {sorted(ALGORITHMS)}")
        pk, ck = ALGORITHMS[algo]
        return AlgoSpec(policy_kind=pk, critic_kind=ck, **overrides)


class ReplayBuffer:
    """FIFO ring of transitions with uniform no-replacement batch sampling."""

    def __init__(self, capacity: int, n_agents: int, obs_dim: int,
                 state_dim: int, action_dim: int,
                 expected_steps: int | None = None) -> None:
        self.capacity = capacity
        alloc = capacity if expected_steps is None else min(capacity, expected_steps)
        alloc = max(alloc, 1)
        self._alloc = alloc
        self.obs = np.zeros((alloc, n_agents, obs_dim), dtype=np.float32)
        self.state = np.zeros((alloc, state_dim), dtype=np.float32)
        self.actions = np.zeros((alloc, n_agents, action_dim), dtype=np.float32)
        self.reward = np.zeros(alloc, dtype=np.float32)
        self.next_obs = np.zeros_like(self.obs)
        self.next_state = np.zeros_like(self.state)
        self.done = np.zeros(alloc, dtype=np.float32)
        self.size = 0
        self._ptr = 0

    def add(self, obs, state, actions, reward, next_obs, next_state, done) -> None:
        i = self._ptr
        self.obs[i] = obs
        self.state[i] = state
        self.actions[i] = actions
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.next_state[i] = next_state
        self.done[i] = 1.0 if done else 0.0
        self._ptr = (i + 1) % self._alloc
        self.size = min(self.size + 1, self._alloc)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return {
            "obs": self.obs[idx], "state": self.state[idx],
            "actions": self.actions[idx], "reward": self.reward[idx],
            "next_obs": self.next_obs[idx], "next_state": self.next_state[idx],
            "done": self.done[idx],
        }


@dataclass
class MetricsRow:
    step: int
    episode: int
    eval_return_mean: float
    eval_return_std: float
    policy_loss: float
    critic_loss: float
    joint_entropy: float
    wall_ms: int


def _spawn_seeds(seed: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(count)]


class Trainer:
    """Owns the networks, targets, optimizers, buffer and RNG streams."""

    def __init__(self, env: Environment, spec: AlgoSpec, seed: int,
                 expected_steps: int | None = None) -> None:
        if env.spec.action_kind != "box":
            raise ValueError(
                f"{env.spec.name} has discrete actions; continuous-control "
                f"algorithms do not apply (use the tabular study instead)")
        self.env = env
        self.spec = spec
        self.seed = seed
        es = env.spec
        self.nd = es.n_agents * es.action_dim
        init_seed, env_seed, noise_seed, batch_seed, eval_seed = \
            _spawn_seeds(seed, 5)
        self._rng_init = np.random.default_rng(init_seed)
        self._rng_env = np.random.default_rng(env_seed)
        self._rng_noise = np.random.default_rng(noise_seed)
        self._rng_batch = np.random.default_rng(batch_seed)
        self._eval_seed_base = eval_seed

        self.policy, self.critic, self.mixer = self._build(self._rng_init)
        tgt_rng = np.random.default_rng(init_seed)
        self.t_policy, self.t_critic, self.t_mixer = self._build(tgt_rng)
        self.live_params = named_params(self.policy, self.critic, self.mixer)
        self.target_params = named_params(self.t_policy, self.t_critic, self.t_mixer)
        sync_targets(self.live_params, self.target_params)

        self.policy_opt = Adam(self.policy.params(), lr=spec.policy_lr)
        self.critic_opt = Adam(self.critic.params() + self.mixer.params(),
                               lr=spec.critic_lr)
        self.buffer = ReplayBuffer(spec.buffer_size, es.n_agents, es.obs_dim,
                                   es.state_dim, es.action_dim, expected_steps)
        self.update_count = 0
        self.env_steps = 0
        self.episodes = 0
        self.last_policy_loss = 0.0
        self.last_critic_loss = 0.0
        self.last_entropy = self._initial_entropy()
        self._current: StepResult | None = None

    # -- construction -------------------------------------------------------

    def _build(self, rng: np.random.Generator):
        es = self.env.spec
        sp = self.spec
        init_range = (es.action_low, es.action_high) if es.obs_dim == 0 else None
        policies = [GaussianPolicy(rng, es.obs_dim, es.action_dim, sp.hidden,
                                   name=f"policy{i}", mean_init_range=init_range)
                    for i in range(es.n_agents)]
        collab = None
        if sp.policy_kind == "collaborative_soft":
            collab = CollabNet(rng, es.state_dim, self.nd, sp.factor_rank,
                               sp.hidden, name="collab")
        policy = JointPolicy(policies, collab, sp.jitter)
        if sp.critic_kind == "attention_mix":
            critic = AttentionCritic(rng, es.n_agents, es.obs_dim, es.action_dim,
                                     embed=sp.hidden, heads=sp.attention_heads)
        else:
            critic = PlainCritic(rng, es.n_agents, es.obs_dim, es.action_dim,
                                 hidden=sp.hidden)
        mixer = MixingNet(rng, es.n_agents, es.state_dim, embed=sp.mixing_embed)
        return policy, critic, mixer

    def _initial_entropy(self) -> float:
        if self.spec.policy_kind == "deterministic":
            return self.nd * (0.5 * (dist.LOG_2PI + 1.0)
                              + math.log(self.spec.expl_noise))
        return float("nan")

    # -- acting -------------------------------------------------------------

    def _policy_outputs(self, policy: JointPolicy, obs: np.ndarray,
                        state: np.ndarray):
        """obs (B, n, O), state (B, S) -> (mu, std, factor) tensors."""
        batch = obs.shape[0]
        obs_t = [dm.const(obs[:, i, :]) for i in range(self.env.spec.n_agents)]
        return policy.forward(obs_t, dm.const(state), batch)

    def act(self, obs_list: list[np.ndarray], state: np.ndarray,
            mode: str) -> np.ndarray:
        """Pre-clip joint action (n, d); ``mode`` is 'train' or 'eval'."""
        es = self.env.spec
        obs = np.stack(obs_list)[None, :, :].astype(np.float32) \
            if es.obs_dim > 0 else np.zeros((1, es.n_agents, 0), dtype=np.float32)
        mu, std, factor = self._policy_outputs(
            self.policy, obs, state[None, :].astype(np.float32))
        u = mu.data[0].copy()
        if mode == "train":
            if self.spec.policy_kind == "deterministic":
                u += self.spec.expl_noise * self._rng_noise.standard_normal(self.nd)
            else:
                eps_n = self._rng_noise.standard_normal(self.nd)
                u += std.data[0] * eps_n
                if factor is not None:
                    eps_m = self._rng_noise.standard_normal(self.spec.factor_rank)
                    u += factor.data[0] @ eps_m
        return u.astype(np.float32).reshape(es.n_agents, es.action_dim)

    def _clip(self, actions: np.ndarray) -> np.ndarray:
        es = self.env.spec
        return np.clip(actions, es.action_low, es.action_high)

    def collect_step(self, mode: str = "train") -> StepResult:
        """Advance the training environment one step; store the transition."""
        if self._current is None or self._current.done:
            self._current = self.env.reset(
                int(self._rng_env.integers(0, 2**63 - 1)))
            self.episodes += 1
        cur = self._current
        es = self.env.spec
        actions = self.act(cur.observations, cur.state, mode)
        nxt = self.env.step(self._clip(actions))
        if mode == "train":
            obs = (np.stack(cur.observations) if es.obs_dim > 0
                   else np.zeros((es.n_agents, 0), dtype=np.float32))
            nobs = (np.stack(nxt.observations) if es.obs_dim > 0
                    else np.zeros((es.n_agents, 0), dtype=np.float32))
            self.buffer.add(obs, cur.state, actions, nxt.reward, nobs,
                            nxt.state, nxt.done)
        self._current = nxt
        self.env_steps += 1
        return nxt

    # -- updates ------------------------------------------------------------

    def _joint_actions_graph(self, mu: Tensor, std: Tensor,
                             factor: Tensor | None, batch: int):
        sp = self.spec
        if sp.policy_kind == "deterministic":
            return mu
        eps_n = self._rng_noise.standard_normal((batch, self.nd)).astype(np.float32)
        eps_m = None
        if factor is not None:
            eps_m = self._rng_noise.standard_normal(
                (batch, sp.factor_rank)).astype(np.float32)
        return dist.sample_graph(mu, std, factor, eps_n, eps_m)

    def _obs_tensors(self, obs: np.ndarray) -> list[Tensor]:
        return [dm.const(obs[:, i, :]) for i in range(self.env.spec.n_agents)]

    def _critic_qtot(self, critic, mixer, obs, u: Tensor, state) -> Tensor:
        es = self.env.spec
        obs_t = obs if isinstance(obs, list) else self._obs_tensors(obs)
        state_t = state if isinstance(state, Tensor) else dm.const(state)
        acts = [dm.tslice(u, (slice(None), slice(i * es.action_dim,
                                                 (i + 1) * es.action_dim)))
                for i in range(es.n_agents)]
        qs = critic.forward(obs_t, acts)
        return mixer.forward(dm.concat(qs, axis=1), state_t)

    def policy_update(self, batch: dict[str, np.ndarray]) -> float:
        """One Adam step on the policy parameters; returns the loss."""
        sp = self.spec
        B = batch["obs"].shape[0]
        with dm.record():
            obs_t = self._obs_tensors(batch["obs"])
            state_t = dm.const(batch["state"])
            mu, std, factor = self.policy.forward(obs_t, state_t, B)
            u = self._joint_actions_graph(mu, std, factor, B)
            qtot = self._critic_qtot(self.critic, self.mixer, obs_t, u, state_t)
            if sp.policy_kind == "deterministic":
                loss = dm.tmean(dm.mul(qtot, -1.0))
            else:
                if sp.policy_kind == "collaborative_soft":
                    logp = dist.lowrank_log_prob_graph(mu, std, factor,
                                                       sp.jitter, u)
                else:
                    logp = dist.diag_log_prob_graph(mu, std, u)
                loss = dm.tmean(dm.add(logp, dm.mul(qtot, -1.0 / sp.alpha)))
            dm.backward(loss)
        self.policy_opt.step()
        for _, p in self.live_params:
            p.grad = None
        if sp.policy_kind != "deterministic":
            if factor is not None:
                ent = dist.lowrank_entropy_np(std.data, factor.data, sp.jitter)
            else:
                ent = dist.lowrank_entropy_np(
                    std.data, np.zeros((B, self.nd, 1), dtype=np.float32),
                    sp.jitter)
            self.last_entropy = float(ent.mean())
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainerAbort(f"policy loss became {value} at update "
                               f"{self.update_count}", self.snapshot())
        self.last_policy_loss = value
        return value

    def bootstrap_targets(self, batch: dict[str, np.ndarray]) -> np.ndarray:
        """TD targets y = r + gamma*(1-done)*(Q_tot' [- alpha*log pi'])."""
        sp = self.spec
        B = batch["obs"].shape[0]
        mu, std, factor = self._policy_outputs(self.t_policy, batch["next_obs"],
                                               batch["next_state"])
        if sp.policy_kind == "deterministic":
            eps = self._rng_noise.standard_normal((B, self.nd)).astype(np.float32)
            u_next = mu.data + sp.expl_noise * eps
            bonus = 0.0
        else:
            eps_n = self._rng_noise.standard_normal((B, self.nd)).astype(np.float32)
            u_next = mu.data + std.data * eps_n
            if factor is not None:
                eps_m = self._rng_noise.standard_normal(
                    (B, sp.factor_rank)).astype(np.float32)
                u_next = u_next + np.einsum("bnm,bm->bn", factor.data, eps_m)
            if sp.entropy_bootstrap:
                if factor is not None:
                    logp = dist.lowrank_log_prob_np(mu.data, std.data,
                                                    factor.data, sp.jitter, u_next)
                else:
                    logp = dist.diag_log_prob_np(mu.data, std.data, u_next)
                bonus = -sp.alpha * logp
            else:
                bonus = 0.0
        qtot_next = self._critic_qtot(self.t_critic, self.t_mixer,
                                      batch["next_obs"],
                                      dm.const(u_next.astype(np.float32)),
                                      batch["next_state"]).data
        return (batch["reward"]
                + sp.gamma * (1.0 - batch["done"]) * (qtot_next + bonus))

    def critic_update(self, batch: dict[str, np.ndarray]) -> float:
        """One Adam step on critic+mixer parameters; returns the TD loss."""
        B = batch["obs"].shape[0]
        y = self.bootstrap_targets(batch)
        u_taken = dm.const(batch["actions"].reshape(B, self.nd))
        with dm.record():
            qtot = self._critic_qtot(self.critic, self.mixer, batch["obs"],
                                     u_taken, batch["state"])
            loss = dm.square_loss(qtot, dm.const(y.astype(np.float32)))
            dm.backward(loss)
        self.critic_opt.step()
        for _, p in self.live_params:
            p.grad = None
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainerAbort(f"critic loss became {value} at update "
                               f"{self.update_count}", self.snapshot())
        self.last_critic_loss = value
        return value

    def update(self) -> None:
        """One training round: sample a batch, policy step, critic step."""
        batch = self.buffer.sample(self.spec.batch_size, self._rng_batch)
        self.policy_update(batch)
        self.critic_update(batch)
        self.update_count += 1
        if self.update_count % self.spec.target_period == 0:
            sync_targets(self.live_params, self.target_params)

    def update_rounds(self) -> None:
        for _ in range(self.spec.updates_per_step):
            self.update()

    # -- evaluation / orchestration -----------------------------------------

    def evaluate(self, episodes: int = 10, eval_index: int = 0) -> tuple[float, float]:
        """Mean/std of undiscounted return over zero-noise episodes."""
        env = make_env(self.env.spec.name,
                       n_agents=self.env.spec.n_agents,
                       episode_length=self.env.spec.episode_length,
                       reward_mode=getattr(self.env, "reward_mode", "sparse"),
                       partial_rewards=getattr(self.env, "partial_rewards", None))
        returns = []
        for ep in range(episodes):
            seed = int(np.random.SeedSequence(
                [self._eval_seed_base, eval_index, ep]).generate_state(1)[0])
            res = env.reset(seed)
            total = 0.0
            while not res.done:
                actions = self.act(res.observations, res.state, "eval")
                res = env.step(self._clip(actions))
                total += res.reward
            returns.append(total)
        arr = np.asarray(returns)
        return float(arr.mean()), float(arr.std())

    def warm(self) -> bool:
        return (self.env_steps >= self.spec.warmup_steps
                and self.buffer.size >= self.spec.batch_size)

    def train(self, total_steps: int, eval_interval: int = 2000,
              eval_episodes: int = 10, on_metrics=None) -> list[MetricsRow]:
        import time

        rows: list[MetricsRow] = []
        t0 = time.monotonic()

        def emit(step: int) -> None:
            mean, std = self.evaluate(eval_episodes, eval_index=len(rows))
            row = MetricsRow(step, self.episodes, mean, std,
                             self.last_policy_loss, self.last_critic_loss,
                             self.last_entropy,
                             int((time.monotonic() - t0) * 1000))
            rows.append(row)
            if on_metrics is not None:
                on_metrics(row)

        emit(0)
        for step in range(1, total_steps + 1):
            self.collect_step("train")
            if self.warm():
                self.update_rounds()
            if step % eval_interval == 0:
                emit(step)
        if total_steps % eval_interval != 0:
            emit(total_steps)
        return rows

    def snapshot(self) -> dict[str, np.ndarray]:
        out = {name: p.data.copy() for name, p in self.live_params}
        out.update({f"target/{name}": p.data.copy()
                    for name, p in self.target_params})
        return out

    def load_snapshot(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.live_params:
            if name not in arrays:
                raise KeyError(f"missing parameter {name!r} in checkpoint")
            if arrays[name].shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            np.copyto(p.data, arrays[name])
        for name, p in self.target_params:
            key = f"target/{name}"
            if key in arrays:
                np.copyto(p.data, arrays[key])
            else:
                np.copyto(p.data, arrays[name])
