"""Tabular matrix-game study.

Fits the two-player three-action cooperative payoff two ways under uniform
joint-action visitation:

* monotonic value decomposition (per-agent value vectors through a
  nonnegative-weight state-free mixer), which provably cannot represent
  the (A, A) optimum and lands its greedy action in the low-payoff block;
* joint-conditioned per-agent tables (each agent sees the other's action),
  which restore full representational capacity and recover (A, A).

Also provides the Boltzmann policy over a fitted joint table and exact
soft policy iteration on the one-step game.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffmath as dm
from .diffmath import Adam, Tensor
from .environments import MATRIX_PAYOFF

ACTION_NAMES = ("A", "B", "C")


class DivergenceError(RuntimeError):
    pass


def _one_hots() -> tuple[np.ndarray, np.ndarray]:
    """(9, 3) selectors for agent-1 and agent-2 actions over all joint cells."""
    e1 = np.zeros((9, 3), dtype=np.float32)
    e2 = np.zeros((9, 3), dtype=np.float32)
    for u1 in range(3):
        for u2 in range(3):
            e1[u1 * 3 + u2, u1] = 1.0
            e2[u1 * 3 + u2, u2] = 1.0
    return e1, e2


class _ScalarMonotoneMixer:
    """Tiny state-free mixer, monotone in its inputs via |weights|.

    A monotone linear skip path keeps gradients alive when the hidden ReLU
    units saturate on strongly negative inputs.
    """

    def __init__(self, rng: np.random.Generator, n_in: int, hidden: int = 8,
                 name: str = "mix", skip: bool = False) -> None:
        bound = 0.5
        self.w1 = dm.param(rng.uniform(-bound, bound, (n_in, hidden)), f"{name}/w1")
        self.b1 = dm.param(rng.uniform(0.0, 2.0 * bound, (hidden,)), f"{name}/b1")
        self.w2 = dm.param(rng.uniform(-bound, bound, (hidden, 1)), f"{name}/w2")
        self.w_skip = (dm.param(rng.uniform(0.0, bound, (n_in, 1)), f"{name}/wskip")
                       if skip else None)
        self.b2 = dm.param(np.zeros(1), f"{name}/b2")

    LEAK = 0.01

    def __call__(self, q: Tensor) -> Tensor:
        z = dm.add(dm.matmul(q, dm.tabs(self.w1)), self.b1)
        # leaky rectifier (monotone): keeps saturated units trainable
        h = dm.add(dm.mul(dm.relu(z), 1.0 - self.LEAK), dm.mul(z, self.LEAK))
        out = dm.add(dm.matmul(h, dm.tabs(self.w2)), self.b2)
        if self.w_skip is not None:
            out = dm.add(out, dm.matmul(q, dm.tabs(self.w_skip)))
        return out

    def params(self) -> list[Tensor]:
        ps = [self.w1, self.b1, self.w2, self.b2]
        if self.w_skip is not None:
            ps.append(self.w_skip)
        return ps


@dataclass
class TabularQ:
    """Monotonic-decomposition fit: per-agent values and fitted joint table."""

    q1: np.ndarray                 # (3,)
    q2: np.ndarray                 # (3,)
    q_tot: np.ndarray              # (3, 3) fitted joint values
    loss: float

    @property
    def greedy(self) -> tuple[int, int]:
        return tuple(np.unravel_index(np.argmax(self.q_tot), (3, 3)))


@dataclass
class JointConditionedQ:
    """Joint-conditioned fit: per-agent (u_i, u_other) tables and joint sum."""

    tables: list[np.ndarray]       # two (3, 3) arrays
    q_tot: np.ndarray              # (3, 3)
    loss: float

    @property
    def greedy(self) -> tuple[int, int]:
        return tuple(np.unravel_index(np.argmax(self.q_tot), (3, 3)))


def train_tabular_qmix(payoff: np.ndarray = MATRIX_PAYOFF,
                       iterations: int = 8000, seed: int = 0,
                       lr: float = 2e-3, on_eval=None,
                       eval_every: int = 0) -> TabularQ:
    """Fit per-agent value vectors through a monotone mixer, uniform visitation.

    ``on_eval(iteration, loss, q_tot)`` fires every ``eval_every`` iterations
    when requested (metrics emission).
    """
    rng = np.random.default_rng(seed)
    target = dm.const(np.asarray(payoff, dtype=np.float32).reshape(9, 1))
    e1, e2 = _one_hots()
    s1, s2 = dm.const(e1), dm.const(e2)
    q1 = dm.param(np.zeros((3, 1)), "q1")
    q2 = dm.param(np.zeros((3, 1)), "q2")
    mixer = _ScalarMonotoneMixer(rng, 2, hidden=32)
    opt = Adam([q1, q2] + mixer.params(), lr=lr)

    def q_tot_now() -> np.ndarray:
        cells = dm.concat([dm.matmul(s1, q1), dm.matmul(s2, q2)], axis=1)
        return mixer(cells).data.reshape(3, 3).astype(np.float64)

    loss_value = float("inf")
    for it in range(1, iterations + 1):
        with dm.record():
            cells = dm.concat([dm.matmul(s1, q1), dm.matmul(s2, q2)], axis=1)
            fit = mixer(cells)
            loss = dm.square_loss(fit, target)
            dm.backward(loss)
        opt.step()
        opt.zero_grad()
        loss_value = float(loss.data)
        if loss_value > 1e6:
            raise DivergenceError(f"tabular fit diverged: loss {loss_value}")
        if on_eval is not None and eval_every and it % eval_every == 0:
            on_eval(it, loss_value, q_tot_now())
    return TabularQ(q1.data.reshape(3).astype(np.float64),
                    q2.data.reshape(3).astype(np.float64), q_tot_now(),
                    loss_value)


def train_qmixs(payoff: np.ndarray = MATRIX_PAYOFF, iterations: int = 6000,
                seed: int = 0, lr: float = 2e-2, on_eval=None,
                eval_every: int = 0) -> JointConditionedQ:
    """Fit joint-conditioned per-agent tables; recovers the payoff exactly."""
    rng = np.random.default_rng(seed)
    target = dm.const(np.asarray(payoff, dtype=np.float32).reshape(9, 1))
    t1 = dm.param(rng.uniform(-0.1, 0.1, (9, 1)), "t1")
    t2 = dm.param(rng.uniform(-0.1, 0.1, (9, 1)), "t2")
    mixer = _ScalarMonotoneMixer(rng, 1, skip=True)
    opt = Adam([t1, t2] + mixer.params(), lr=lr)

    def q_tot_now() -> np.ndarray:
        return (dm.add(mixer(t1), mixer(t2))).data.reshape(3, 3).astype(np.float64)

    loss_value = float("inf")
    for it in range(1, iterations + 1):
        with dm.record():
            fit = dm.add(mixer(t1), mixer(t2))
            loss = dm.square_loss(fit, target)
            dm.backward(loss)
        opt.step()
        opt.zero_grad()
        loss_value = float(loss.data)
        if loss_value > 1e6:
            raise DivergenceError(f"joint-conditioned fit diverged: loss {loss_value}")
        if on_eval is not None and eval_every and it % eval_every == 0:
            on_eval(it, loss_value, q_tot_now())
    return JointConditionedQ([t1.data.reshape(3, 3).astype(np.float64),
                              t2.data.reshape(3, 3).astype(np.float64)],
                             q_tot_now(), loss_value)


def boltzmann(q_joint: np.ndarray, alpha: float) -> np.ndarray:
    """Softmax over all joint cells of q/alpha (3x3 in, 3x3 out)."""
    if alpha <= 0.0:
        raise ValueError("temperature must be positive")
    q = np.asarray(q_joint, dtype=np.float64)
    z = (q - q.max()) / alpha
    e = np.exp(z)
    return e / e.sum()


def joint_entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def soft_policy_iteration(payoff: np.ndarray = MATRIX_PAYOFF,
                          alpha: float = 1.0,
                          iterations: int = 10) -> list[float]:
    """Exact soft iteration on the one-step game.

    The policy update is the KL minimiser pi <- softmax(payoff/alpha); the
    returned trace records E_pi[payoff] + alpha*H(pi) starting from the
    uniform policy, and is nondecreasing.
    """
    if alpha <= 0.0:
        raise ValueError("temperature must be positive")
    payoff = np.asarray(payoff, dtype=np.float64)
    pi = np.full((3, 3), 1.0 / 9.0)
    trace = [float((pi * payoff).sum()) + alpha * joint_entropy(pi)]
    for _ in range(iterations):
        pi = boltzmann(payoff, alpha)
        trace.append(float((pi * payoff).sum()) + alpha * joint_entropy(pi))
    return trace


def format_table(values: np.ndarray, title: str, fmt: str = "{:8.2f}") -> str:
    """Plain-text 3x3 table with action headers."""
    lines = [title, "        " + "".join(f"{a:>9}" for a in ACTION_NAMES)]
    for i, row in enumerate(np.asarray(values)):
        lines.append(f"  u1={ACTION_NAMES[i]} " + "".join(fmt.format(v) for v in row))
    return "\n".join(lines)
