"""Cooperative benchmark environments.

All environments share one contract: ``reset(seed)`` and ``step(actions)``
return a :class:`StepResult` whose scalar reward is shared by every agent,
and an environment instance owns its RNG so a seed fully determines the
trajectory under a fixed action sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MATRIX_PAYOFF = np.array(
    [[8.0, -12.0, -12.0],
     [-12.0, 0.0, 0.0],
     [-12.0, 0.0, 0.0]], dtype=np.float64)

SIMPLE_WORLD_MODES = (
    (1.0, np.array([4.0, 3.0]), 5.0),    # amplitude, centre, variance
    (0.9, np.array([-6.0, -6.0]), 2.0),
)

DEFAULT_PARTIAL_REWARDS = {1: 0.1, 3: 0.2}
ALL_UPRIGHT_SHAPED_REWARD = 0.5


@dataclass(frozen=True)
class EnvSpec:
    name: str
    n_agents: int
    obs_dim: int
    state_dim: int
    action_dim: int
    action_kind: str            # "box" or "discrete"
    episode_length: int
    action_low: float = 0.0
    action_high: float = 0.0
    n_actions: int = 0          # discrete only


@dataclass
class StepResult:
    observations: list[np.ndarray]
    state: np.ndarray
    reward: float
    done: bool


class Environment:
    spec: EnvSpec

    def __init__(self) -> None:
        self._rng = np.random.default_rng(0)
        self._t = 0

    def reset(self, seed: int) -> StepResult:
        raise NotImplementedError

    def step(self, actions) -> StepResult:
        raise NotImplementedError


class MatrixGame(Environment):
    """Stateless one-step two-player game with the 3x3 cooperative payoff."""

    def __init__(self) -> None:
        super().__init__()
        self.spec = EnvSpec("matrix_game", 2, 0, 1, 1, "discrete", 1, n_actions=3)

    def _result(self, reward: float, done: bool) -> StepResult:
        obs = [np.zeros(0, dtype=np.float32) for _ in range(2)]
        return StepResult(obs, np.zeros(1, dtype=np.float32), reward, done)

    def reset(self, seed: int) -> StepResult:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        return self._result(0.0, False)

    def step(self, actions) -> StepResult:
        u1, u2 = int(actions[0]), int(actions[1])
        if not (0 <= u1 < 3 and 0 <= u2 < 3):
            raise ValueError(f"matrix game actions out of range: {(u1, u2)}")
        self._t += 1
        return self._result(float(MATRIX_PAYOFF[u1, u2]), True)


def simple_world_reward(u: np.ndarray) -> float:
    """Two-mode Gaussian reward surface; global optimum at (4, 3)."""
    r = 0.0
    for amp, centre, var in SIMPLE_WORLD_MODES:
        d2 = float(np.sum((u - centre) ** 2))
        r += amp * np.exp(-d2 / (2.0 * var))
    return float(r)


class SimpleWorld(Environment):
    """Two players pick one scalar each; one step; reward from two Gaussian modes."""

    def __init__(self) -> None:
        super().__init__()
        self.spec = EnvSpec("simple_world", 2, 0, 1, 1, "box", 1,
                            action_low=-10.0, action_high=10.0)

    def _result(self, reward: float, done: bool) -> StepResult:
        obs = [np.zeros(0, dtype=np.float32) for _ in range(2)]
        return StepResult(obs, np.zeros(1, dtype=np.float32), reward, done)

    def reset(self, seed: int) -> StepResult:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        return self._result(0.0, False)

    def step(self, actions) -> StepResult:
        u = np.clip(np.asarray(actions, dtype=np.float64).reshape(2), -10.0, 10.0)
        if not np.all(np.isfinite(u)):
            raise ValueError("non-finite simple-world action")
        self._t += 1
        return self._result(simple_world_reward(u), True)


class MultiPendulum(Environment):
    """n independent pendulums, one torque each, one shared sparse reward.

    Physics follows the classic single-pendulum benchmark: theta measured
    from upright, thetadot then theta updated per step (semi-implicit
    Euler), g=10, m=1, l=1, dt=0.05, torque in [-2, 2], speed clip 8.
    """

    GRAVITY = 10.0
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0
    UPRIGHT_ANGLE = 0.2
    SPARSE_REWARD = 5.0

    def __init__(self, n_agents: int = 3, episode_length: int = 200,
                 reward_mode: str = "sparse",
                 partial_rewards: dict[int, float] | None = None) -> None:
        super().__init__()
        if reward_mode not in ("sparse", "shaped"):
            raise ValueError(f"unknown reward mode {reward_mode!r}")
        self.reward_mode = reward_mode
        self.partial_rewards = (dict(DEFAULT_PARTIAL_REWARDS)
                                if partial_rewards is None else dict(partial_rewards))
        self.spec = EnvSpec("multi_pendulum", n_agents, 3, 3 * n_agents, 1, "box",
                            episode_length, action_low=-self.MAX_TORQUE,
                            action_high=self.MAX_TORQUE)
        self.theta = np.zeros(n_agents)
        self.theta_dot = np.zeros(n_agents)

    @staticmethod
    def _wrap(theta: np.ndarray) -> np.ndarray:
        w = np.remainder(theta + np.pi, 2.0 * np.pi) - np.pi
        w[w == -np.pi] = np.pi
        return w

    def _obs(self) -> list[np.ndarray]:
        return [np.array([np.cos(t), np.sin(t), td], dtype=np.float32)
                for t, td in zip(self.theta, self.theta_dot)]

    def _state(self) -> np.ndarray:
        return np.concatenate(self._obs()).astype(np.float32)

    def _reward(self) -> float:
        upright = int(np.sum(np.abs(self.theta) < self.UPRIGHT_ANGLE))
        n = self.spec.n_agents
        if self.reward_mode == "sparse":
            return self.SPARSE_REWARD if upright == n else 0.0
        if upright == n:
            return ALL_UPRIGHT_SHAPED_REWARD
        return float(self.partial_rewards.get(upright, 0.0))

    def reset(self, seed: int) -> StepResult:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        n = self.spec.n_agents
        self.theta = self._rng.uniform(-np.pi, np.pi, n)
        self.theta_dot = self._rng.uniform(-1.0, 1.0, n)
        return StepResult(self._obs(), self._state(), 0.0, False)

    def step(self, actions) -> StepResult:
        u = np.asarray(actions, dtype=np.float64).reshape(self.spec.n_agents)
        if np.any(np.isnan(u)):
            raise ValueError("NaN torque")
        u = np.clip(u, -self.MAX_TORQUE, self.MAX_TORQUE)
        g, m, l, dt = self.GRAVITY, self.MASS, self.LENGTH, self.DT
        accel = 3.0 * g / (2.0 * l) * np.sin(self.theta) + 3.0 / (m * l * l) * u
        self.theta_dot = np.clip(self.theta_dot + accel * dt,
                                 -self.MAX_SPEED, self.MAX_SPEED)
        self.theta = self._wrap(self.theta + self.theta_dot * dt)
        self._t += 1
        done = self._t >= self.spec.episode_length
        return StepResult(self._obs(), self._state(), self._reward(), done)

    def mechanical_energy(self) -> np.ndarray:
        """Per-pendulum energy (rod about its end; zero reference at pivot)."""
        inertia = self.MASS * self.LENGTH ** 2 / 3.0
        kinetic = 0.5 * inertia * self.theta_dot ** 2
        potential = (self.MASS * self.GRAVITY * self.LENGTH / 2.0) * np.cos(self.theta)
        return kinetic + potential


# ---------------------------------------------------------------------------
# predator-prey particle world


@dataclass
class _Body:
    pos: np.ndarray
    vel: np.ndarray
    radius: float
    max_speed: float


PP_N_PREDATORS = 3
PP_N_LANDMARKS = 2
PP_PREDATOR_RADIUS = 0.075
PP_PREY_RADIUS = 0.05
PP_LANDMARK_RADIUS = 0.2
PP_PREDATOR_SPEED = 1.0
PP_PREY_SPEED = 1.3
PP_DT = 0.1
PP_DAMPING = 0.25
PP_COLLISION_REWARD = 10.0
PP_VIEW_RADIUS = 0.8

# per-predator observation layout (entity blocks, fixed order):
#   own_vel(2), own_pos(2),
#   landmark rel_pos(2) x 2,
#   other predators rel_pos(2)+rel_vel(4... 2+2) x 2, prey rel_pos+rel_vel(4)
PP_OBS_SELF = 4
PP_ENTITY_BLOCKS = [2] * PP_N_LANDMARKS + [4] * PP_N_PREDATORS  # 2 others + prey
PP_OBS_DIM = PP_OBS_SELF + sum(PP_ENTITY_BLOCKS)                # 20
PP_N_ENTITIES = len(PP_ENTITY_BLOCKS)                           # 5
PP_OBS_DIM_PO = PP_OBS_DIM + PP_N_ENTITIES                      # 25


def observe_partial(obs: np.ndarray, view_radius: float = PP_VIEW_RADIUS) -> np.ndarray:
    """Mask entity blocks farther than the view radius; append visibility flags.

    Accepts a bare observation (no flags) or an already-masked one (with
    flags); masking is idempotent and never re-reveals a masked entity.
    """
    obs = np.asarray(obs, dtype=np.float32)
    if obs.shape == (PP_OBS_DIM_PO,):
        flags_in = obs[PP_OBS_DIM:]
        body = obs[:PP_OBS_DIM].copy()
    elif obs.shape == (PP_OBS_DIM,):
        flags_in = np.ones(PP_N_ENTITIES, dtype=np.float32)
        body = obs.copy()
    else:
        raise ValueError(f"unexpected observation shape {obs.shape}")
    flags = np.zeros(PP_N_ENTITIES, dtype=np.float32)
    offset = PP_OBS_SELF
    for k, size in enumerate(PP_ENTITY_BLOCKS):
        rel = body[offset:offset + 2]
        visible = flags_in[k] > 0.0 and float(np.hypot(rel[0], rel[1])) <= view_radius
        if visible:
            flags[k] = 1.0
        else:
            body[offset:offset + size] = 0.0
        offset += size
    return np.concatenate([body, flags])


class PredatorPrey(Environment):
    """Three slower predators chase one faster random prey among two landmarks.

    Landmarks are impenetrable (position projection); each predator-prey
    contact contributes +10 to the shared reward that step.
    """

    def __init__(self, episode_length: int = 100, partial_obs: bool = False) -> None:
        super().__init__()
        self.partial_obs = partial_obs
        name = "po_predator_prey" if partial_obs else "predator_prey"
        obs_dim = PP_OBS_DIM_PO if partial_obs else PP_OBS_DIM
        # state: predator pos+vel, prey pos+vel, landmark positions
        state_dim = 4 * (PP_N_PREDATORS + 1) + 2 * PP_N_LANDMARKS
        self.spec = EnvSpec(name, PP_N_PREDATORS, obs_dim, state_dim, 2, "box",
                            episode_length, action_low=-1.0, action_high=1.0)
        self.predators: list[_Body] = []
        self.prey: _Body | None = None
        self.landmarks: list[np.ndarray] = []

    def reset(self, seed: int) -> StepResult:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self.landmarks = [self._rng.uniform(-1.0, 1.0, 2)
                          for _ in range(PP_N_LANDMARKS)]

        def spawn(radius: float, max_speed: float) -> _Body:
            for _ in range(100):
                pos = self._rng.uniform(-1.0, 1.0, 2)
                if all(np.hypot(*(pos - lm)) >= PP_LANDMARK_RADIUS + radius
                       for lm in self.landmarks):
                    break
            body = _Body(pos, np.zeros(2), radius, max_speed)
            self._project_out_of_landmarks(body)
            np.clip(body.pos, -1.0, 1.0, out=body.pos)
            return body

        self.predators = [spawn(PP_PREDATOR_RADIUS, PP_PREDATOR_SPEED)
                          for _ in range(PP_N_PREDATORS)]
        self.prey = spawn(PP_PREY_RADIUS, PP_PREY_SPEED)
        return StepResult(self._all_obs(), self._state(), 0.0, False)

    def _project_out_of_landmarks(self, body: _Body) -> None:
        for lm in self.landmarks:
            delta = body.pos - lm
            dist = float(np.hypot(delta[0], delta[1]))
            min_dist = PP_LANDMARK_RADIUS + body.radius
            if dist < min_dist:
                if dist < 1e-9:
                    delta = np.array([1.0, 0.0])
                    dist = 1.0
                body.pos = lm + delta / dist * min_dist

    def _integrate(self, body: _Body, force: np.ndarray) -> None:
        body.vel = body.vel * (1.0 - PP_DAMPING) + force * PP_DT
        speed = float(np.hypot(body.vel[0], body.vel[1]))
        if speed > body.max_speed:
            body.vel = body.vel / speed * body.max_speed
        body.pos = body.pos + body.vel * PP_DT
        self._project_out_of_landmarks(body)
        for axis in range(2):
            if body.pos[axis] < -1.0:
                body.pos[axis] = -1.0
                body.vel[axis] = max(body.vel[axis], 0.0)
            elif body.pos[axis] > 1.0:
                body.pos[axis] = 1.0
                body.vel[axis] = min(body.vel[axis], 0.0)

    def _obs_for(self, i: int) -> np.ndarray:
        me = self.predators[i]
        parts = [me.vel, me.pos]
        for lm in self.landmarks:
            parts.append(lm - me.pos)
        for j in range(PP_N_PREDATORS):
            if j == i:
                continue
            other = self.predators[j]
            parts.append(other.pos - me.pos)
            parts.append(other.vel - me.vel)
        parts.append(self.prey.pos - me.pos)
        parts.append(self.prey.vel - me.vel)
        obs = np.concatenate(parts).astype(np.float32)
        if self.partial_obs:
            obs = observe_partial(obs)
        return obs

    def _all_obs(self) -> list[np.ndarray]:
        return [self._obs_for(i) for i in range(PP_N_PREDATORS)]

    def _state(self) -> np.ndarray:
        parts = []
        for body in self.predators + [self.prey]:
            parts.append(body.pos)
            parts.append(body.vel)
        parts.extend(self.landmarks)
        return np.concatenate(parts).astype(np.float32)

    def step(self, actions) -> StepResult:
        acts = np.clip(np.asarray(actions, dtype=np.float64).reshape(
            PP_N_PREDATORS, 2), -1.0, 1.0)
        prey_force = self._rng.uniform(-1.0, 1.0, 2)
        for body, force in zip(self.predators, acts):
            self._integrate(body, force)
        self._integrate(self.prey, prey_force)
        reward = 0.0
        contact = PP_PREDATOR_RADIUS + PP_PREY_RADIUS
        for body in self.predators:
            delta = body.pos - self.prey.pos
            if float(np.hypot(delta[0], delta[1])) < contact:
                reward += PP_COLLISION_REWARD
        self._t += 1
        done = self._t >= self.spec.episode_length
        return StepResult(self._all_obs(), self._state(), reward, done)


ENV_NAMES = ("matrix_game", "simple_world", "multi_pendulum",
             "predator_prey", "po_predator_prey")


def make_env(name: str, n_agents: int | None = None,
             episode_length: int | None = None,
             reward_mode: str = "sparse",
             partial_rewards: dict[int, float] | None = None) -> Environment:
    if name == "matrix_game":
        return MatrixGame()
    if name == "simple_world":
        return SimpleWorld()
    if name == "multi_pendulum":
        return MultiPendulum(n_agents if n_agents is not None else 3,
                             episode_length if episode_length is not None else 200,
                             reward_mode, partial_rewards)
    if name in ("predator_prey", "po_predator_prey"):
        return PredatorPrey(episode_length if episode_length is not None else 100,
                            partial_obs=name.startswith("po_"))
    raise ValueError(f"unknown environment {name!r}")
