"""Function approximators: per-agent Gaussian policies, the state-conditioned
exploration-coupling factor network, attention-based per-agent critics, and
the monotonic mixing network, plus hard-sync target management.

All forward passes take batched (B, dim) tensors and run on the diffmath
tape when one is active.
"""

from __future__ import annotations

import math

import numpy as np

from . import diffmath as dm
from .diffmath import Tensor

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
FACTOR_CLAMP = 1.0


class Linear:
    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int,
                 name: str) -> None:
        bound = 1.0 / math.sqrt(max(n_in, 1))
        self.w = dm.param(rng.uniform(-bound, bound, (n_in, n_out)), f"{name}/w")
        self.b = dm.param(rng.uniform(-bound, bound, (n_out,)), f"{name}/b")

    def __call__(self, x: Tensor) -> Tensor:
        return dm.add(dm.matmul(x, self.w), self.b)

    def params(self) -> list[Tensor]:
        return [self.w, self.b]


class MLP:
    """Stack of hidden ReLU layers followed by a linear output layer."""

    def __init__(self, rng: np.random.Generator, n_in: int, hidden: list[int],
                 n_out: int, name: str) -> None:
        self.layers: list[Linear] = []
        prev = n_in
        for k, width in enumerate(hidden):
            self.layers.append(Linear(rng, prev, width, f"{name}/h{k}"))
            prev = width
        self.out = Linear(rng, prev, n_out, f"{name}/out")

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = dm.relu(layer(x))
        return self.out(x)

    def params(self) -> list[Tensor]:
        ps: list[Tensor] = []
        for layer in self.layers:
            ps.extend(layer.params())
        ps.extend(self.out.params())
        return ps


class GaussianPolicy:
    """Per-agent policy head mapping a local observation to (mu, log sigma).

    Observation-free tasks feed the net a constant scalar input; the output
    bias for the mean starts uniform over the action box so initial policies
    scatter across the arena.
    """

    def __init__(self, rng: np.random.Generator, obs_dim: int, action_dim: int,
                 hidden: int = 64, n_hidden: int = 3, name: str = "policy",
                 mean_init_range: tuple[float, float] | None = None) -> None:
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.name = name
        self.net = MLP(rng, max(obs_dim, 1), [hidden] * n_hidden,
                       2 * action_dim, name)
        if obs_dim == 0 and mean_init_range is not None:
            lo, hi = mean_init_range
            self.net.out.b.data[:action_dim] = rng.uniform(lo, hi, action_dim)

    def forward(self, obs: Tensor, batch: int) -> tuple[Tensor, Tensor]:
        """Returns (mu, std), each (B, action_dim)."""
        if self.obs_dim == 0:
            obs = dm.const(np.ones((batch, 1), dtype=np.float32))
        raw = self.net(obs)
        d = self.action_dim
        mu = dm.tslice(raw, (slice(None), slice(0, d)))
        log_std = dm.clamp(dm.tslice(raw, (slice(None), slice(d, 2 * d))),
                           LOG_STD_MIN, LOG_STD_MAX)
        return mu, dm.exp_(log_std)

    def params(self) -> list[Tensor]:
        return self.net.params()


class CollabNet:
    """Global state -> exploration coupling factor (B, nd, m), entries in [-1, 1]."""

    def __init__(self, rng: np.random.Generator, state_dim: int, nd: int, m: int,
                 hidden: int = 64, name: str = "collab") -> None:
        self.nd = nd
        self.m = m
        self.net = MLP(rng, state_dim, [hidden, hidden], nd * m, name)

    def forward(self, state: Tensor) -> Tensor:
        raw = dm.clamp(self.net(state), -FACTOR_CLAMP, FACTOR_CLAMP)
        return dm.reshape(raw, (state.shape[0], self.nd, self.m))

    def params(self) -> list[Tensor]:
        return self.net.params()


class JointPolicy:
    """Per-agent heads plus optional coupling factor = the joint policy."""

    def __init__(self, policies: list[GaussianPolicy],
                 collab: CollabNet | None, jitter: float) -> None:
        self.policies = policies
        self.collab = collab
        self.jitter = jitter

    @property
    def n_agents(self) -> int:
        return len(self.policies)

    @property
    def action_dim(self) -> int:
        return self.policies[0].action_dim

    def forward(self, obs: list[Tensor], state: Tensor,
                batch: int) -> tuple[Tensor, Tensor, Tensor | None]:
        """Joint (mu, std, factor): (B, nd), (B, nd), (B, nd, m) or None."""
        mus, stds = [], []
        for agent, head in enumerate(self.policies):
            mu, std = head.forward(obs[agent], batch)
            mus.append(mu)
            stds.append(std)
        mu = dm.concat(mus, axis=1)
        std = dm.concat(stds, axis=1)
        factor = self.collab.forward(state) if self.collab is not None else None
        return mu, std, factor

    def params(self) -> list[Tensor]:
        ps: list[Tensor] = []
        for head in self.policies:
            ps.extend(head.params())
        if self.collab is not None:
            ps.extend(self.collab.params())
        return ps


class AttentionCritic:
    """Per-agent action values from all agents' observation-action pairs.

    Each agent's embedding attends over the other agents' value-transformed
    embeddings; per-head contributions are concatenated before the per-agent
    output net.  Scaled-dot-product weights are a distribution over the
    other n-1 agents per head.
    """

    def __init__(self, rng: np.random.Generator, n_agents: int, obs_dim: int,
                 action_dim: int, embed: int = 64, heads: int = 4,
                 name: str = "attn") -> None:
        # round up so the embedding splits evenly across heads
        embed = heads * max(1, -(-embed // heads))
        self.n_agents = n_agents
        self.heads = heads
        self.embed = embed
        self.head_dim = embed // heads
        self.degenerate = n_agents < 2
        self.encoders = [Linear(rng, obs_dim + action_dim, embed, f"{name}/enc{i}")
                         for i in range(n_agents)]
        # per-head projections stored merged (one matmul, head columns
        # sliced out where needed); with exactly one other agent the softmax
        # weight is identically 1, so keys/queries would be dead parameters
        bound = 1 / math.sqrt(embed)
        self.trivial_weights = n_agents == 2
        if self.trivial_weights or self.degenerate:
            self.w_query = None
            self.w_key = None
        else:
            self.w_query = dm.param(rng.uniform(-bound, bound, (embed, embed)),
                                    f"{name}/wq")
            self.w_key = dm.param(rng.uniform(-bound, bound, (embed, embed)),
                                  f"{name}/wk")
        self.w_value = dm.param(rng.uniform(-bound, bound, (embed, embed)),
                                f"{name}/wv")
        self.outputs = [MLP(rng, 2 * embed, [embed], 1, f"{name}/out{i}")
                        for i in range(n_agents)]

    def _embeddings(self, obs: list[Tensor], acts: list[Tensor]) -> list[Tensor]:
        embs = []
        for i in range(self.n_agents):
            if obs[i].shape[1] > 0:
                x = dm.concat([obs[i], acts[i]], axis=1)
            else:
                x = acts[i]
            embs.append(dm.relu(self.encoders[i](x)))
        return embs

    def _head(self, t: Tensor, h: int) -> Tensor:
        lo = h * self.head_dim
        return dm.tslice(t, (slice(None), slice(lo, lo + self.head_dim)))

    def forward(self, obs: list[Tensor], acts: list[Tensor]) -> list[Tensor]:
        """Per-agent values, each (B, 1)."""
        e = self._embeddings(obs, acts)
        batch = e[0].shape[0]
        scale = 1.0 / math.sqrt(self.head_dim)
        values: list[Tensor] = []
        vals = [dm.relu(dm.matmul(e[j], self.w_value))
                for j in range(self.n_agents)]
        if not (self.degenerate or self.trivial_weights):
            keys = [dm.matmul(e[j], self.w_key) for j in range(self.n_agents)]
            queries = [dm.matmul(e[i], self.w_query)
                       for i in range(self.n_agents)]
        for i in range(self.n_agents):
            if self.degenerate:
                ctx = dm.const(np.zeros((batch, self.embed), dtype=np.float32))
            elif self.trivial_weights:
                ctx = vals[1 - i]   # heads already concatenated
            else:
                per_head = []
                for h in range(self.heads):
                    query = self._head(queries[i], h)
                    others = [j for j in range(self.n_agents) if j != i]
                    logits = dm.concat(
                        [dm.mul(dm.tsum(dm.mul(query, self._head(keys[j], h)),
                                        axis=1, keepdims=True), scale)
                         for j in others], axis=1)
                    weights = dm.softmax(logits, axis=1)
                    ctx_h = None
                    for col, j in enumerate(others):
                        term = dm.mul(
                            dm.tslice(weights, (slice(None), slice(col, col + 1))),
                            self._head(vals[j], h))
                        ctx_h = term if ctx_h is None else dm.add(ctx_h, term)
                    per_head.append(ctx_h)
                ctx = dm.concat(per_head, axis=1)
            values.append(self.outputs[i](dm.concat([e[i], ctx], axis=1)))
        return values

    def attention_weights(self, obs: list[np.ndarray],
                          acts: list[np.ndarray]) -> list[list[np.ndarray]]:
        """weights[i][h] over the other agents, (B, n-1); diagnostics/tests."""
        if self.trivial_weights:
            batch = acts[0].shape[0]
            ones = np.ones((batch, 1), dtype=np.float32)
            return [[ones.copy() for _ in range(self.heads)]
                    for _ in range(self.n_agents)]
        obs_t = [dm.const(o) for o in obs]
        act_t = [dm.const(a) for a in acts]
        e = self._embeddings(obs_t, act_t)
        scale = 1.0 / math.sqrt(self.head_dim)
        out: list[list[np.ndarray]] = []
        keys = [dm.matmul(e[j], self.w_key) for j in range(self.n_agents)]
        for i in range(self.n_agents):
            rows = []
            query_full = dm.matmul(e[i], self.w_query)
            for h in range(self.heads):
                query = self._head(query_full, h)
                others = [j for j in range(self.n_agents) if j != i]
                logits = dm.concat(
                    [dm.mul(dm.tsum(dm.mul(query, self._head(keys[j], h)),
                                    axis=1, keepdims=True), scale)
                     for j in others], axis=1)
                rows.append(dm.softmax(logits, axis=1).data.copy())
            out.append(rows)
        return out

    def params(self) -> list[Tensor]:
        ps: list[Tensor] = []
        for enc in self.encoders:
            ps.extend(enc.params())
        if self.w_query is not None:
            ps.append(self.w_query)
            ps.append(self.w_key)
        ps.append(self.w_value)
        for net in self.outputs:
            ps.extend(net.params())
        return ps


class PlainCritic:
    """Per-agent action values from local observation-action pairs only."""

    def __init__(self, rng: np.random.Generator, n_agents: int, obs_dim: int,
                 action_dim: int, hidden: int = 64, name: str = "critic") -> None:
        self.n_agents = n_agents
        self.nets = [MLP(rng, obs_dim + action_dim, [hidden] * 3, 1,
                         f"{name}/q{i}") for i in range(n_agents)]

    def forward(self, obs: list[Tensor], acts: list[Tensor]) -> list[Tensor]:
        values = []
        for i in range(self.n_agents):
            if obs[i].shape[1] > 0:
                x = dm.concat([obs[i], acts[i]], axis=1)
            else:
                x = acts[i]
            values.append(self.nets[i](x))
        return values

    def params(self) -> list[Tensor]:
        ps: list[Tensor] = []
        for net in self.nets:
            ps.extend(net.params())
        return ps


class MixingNet:
    """Monotonic state-conditioned mixer: Q_tot nondecreasing in every Q_i.

    Hypernetworks map the global state to mixing weights whose absolute
    value is used, so dQ_tot/dQ_i >= 0 by construction.
    """

    def __init__(self, rng: np.random.Generator, n_agents: int, state_dim: int,
                 embed: int = 32, name: str = "mix") -> None:
        self.n_agents = n_agents
        self.embed = embed
        self.hyper_w1 = Linear(rng, state_dim, n_agents * embed, f"{name}/hw1")
        self.hyper_b1 = Linear(rng, state_dim, embed, f"{name}/hb1")
        self.hyper_w2 = Linear(rng, state_dim, embed, f"{name}/hw2")
        self.hyper_v = MLP(rng, state_dim, [embed], 1, f"{name}/hv")

    def forward(self, q_values: Tensor, state: Tensor) -> Tensor:
        """q_values (B, n), state (B, S) -> Q_tot (B,)."""
        batch = q_values.shape[0]
        w1 = dm.reshape(dm.tabs(self.hyper_w1(state)),
                        (batch, self.n_agents, self.embed))
        b1 = dm.reshape(self.hyper_b1(state), (batch, 1, self.embed))
        hidden = dm.relu(dm.add(dm.matmul(
            dm.reshape(q_values, (batch, 1, self.n_agents)), w1), b1))
        w2 = dm.reshape(dm.tabs(self.hyper_w2(state)), (batch, self.embed, 1))
        mixed = dm.reshape(dm.matmul(hidden, w2), (batch,))
        v = dm.reshape(self.hyper_v(state), (batch,))
        return dm.add(mixed, v)

    def params(self) -> list[Tensor]:
        return (self.hyper_w1.params() + self.hyper_b1.params()
                + self.hyper_w2.params() + self.hyper_v.params())


# ---------------------------------------------------------------------------
# parameter bookkeeping


def named_params(*components) -> list[tuple[str, Tensor]]:
    seen: dict[str, Tensor] = {}
    for comp in components:
        if comp is None:
            continue
        for p in comp.params():
            if not p.name:
                raise ValueError("unnamed parameter")
            if p.name in seen and seen[p.name] is not p:
                raise ValueError(f"duplicate parameter name {p.name!r}")
            seen[p.name] = p
    return list(seen.items())


def sync_targets(live: list[tuple[str, Tensor]],
                 target: list[tuple[str, Tensor]]) -> None:
    """Hard copy live -> target; raises on any name/shape mismatch."""
    if [n for n, _ in live] != [n for n, _ in target]:
        raise ValueError("target parameter set does not match live parameters")
    for (name, src), (_, dst) in zip(live, target):
        if src.data.shape != dst.data.shape:
            raise ValueError(f"shape mismatch syncing {name!r}: "
                             f"{src.data.shape} vs {dst.data.shape}")
        np.copyto(dst.data, src.data)
