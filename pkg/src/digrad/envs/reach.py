"""Multi-goal reaching on a kinematic tree, one goal per end effector."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kinematics import KinematicTree, joint_positions, load_tree

SCORE_ERROR_FLOOR = 1e-6


@dataclass
class RewardSpec:
    """Reward constants. ``reach_tolerance`` overrides ``reach_fraction * max_reach``."""

    reach_fraction: float = 0.02
    reach_tolerance: float | None = None
    success_bonus: float = 0.5
    all_bonus: float = 1.0
    penalty: float = 1.0

    def __post_init__(self):
        if self.reach_tolerance is not None and not self.reach_tolerance > 0:
            raise ValueError("reach_tolerance must be positive")
        if not self.reach_fraction > 0:
            raise ValueError("reach_fraction must be positive")
        if self.success_bonus < 0 or self.all_bonus < 0:
            raise ValueError("bonuses must be non-negative")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")

    def tolerances(self, tree: KinematicTree) -> np.ndarray:
        if self.reach_tolerance is not None:
            return np.full(tree.n_tasks, float(self.reach_tolerance))
        return self.reach_fraction * tree.max_reach()


class StepResult(NamedTuple):
    observation: np.ndarray
    rewards: np.ndarray       # per-task DiGrad rewards
    reward_ddpg: float        # scalar baseline reward
    task_done: np.ndarray     # error_i < tolerance_i
    done: bool                # all tasks done or step budget exhausted
    errors: np.ndarray


def digrad_rewards(errors, tolerances, spec: RewardSpec) -> np.ndarray:
    reached = errors < tolerances
    r = np.where(reached, spec.success_bonus, -spec.penalty * errors)
    if reached.all():
        r = r + spec.all_bonus
    return r


def ddpg_reward(errors, tolerances, spec: RewardSpec) -> float:
    if np.all(errors < tolerances):
        return float(spec.all_bonus)
    return float(-spec.penalty * np.sum(errors))


def scores(errors) -> np.ndarray:
    """``-log10(error)``, with the error floored so coincident points score 6."""
    return -np.log10(np.maximum(errors, SCORE_ERROR_FLOOR))


class ReachEnv:
    """Joint-velocity controlled reaching.

    The action is a joint-velocity vector (rad/step), clipped to the tree's
    velocity limit and integrated with step ``dt``; angles are clamped to the
    joint limits.
    """

    def __init__(self, tree: KinematicTree | str, reward_spec: RewardSpec | None = None,
                 max_steps: int = 200, dt: float = 1.0, rng=None):
        self.tree = load_tree(tree) if isinstance(tree, str) else tree
        self.reward_spec = reward_spec or RewardSpec()
        self.tolerances = self.reward_spec.tolerances(self.tree)
        self.max_steps = int(max_steps)
        self.dt = float(dt)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.q = np.zeros(self.tree.n_joints)
        self.goals = np.zeros((self.tree.n_tasks, self.tree.dim))
        self.steps = 0
        self._refresh()

    @property
    def n_tasks(self) -> int:
        return self.tree.n_tasks

    @property
    def action_dim(self) -> int:
        return self.tree.n_joints

    @property
    def observation_dim(self) -> int:
        t = self.tree
        return t.n_joints + t.dim * t.n_joints + t.dim * t.n_tasks

    @property
    def action_bound(self) -> float:
        return self.tree.velocity_limit

    def partition(self):
        return self.tree.partition()

    def _refresh(self):
        self.positions = joint_positions(self.tree, self.q)
        self.effectors = self.positions[list(self.tree.end_effectors)]

    def set_state(self, q, goals) -> np.ndarray:
        self.q = np.clip(np.asarray(q, dtype=np.float64), self.tree.limits[:, 0], self.tree.limits[:, 1])
        self.goals = np.asarray(goals, dtype=np.float64).reshape(self.tree.n_tasks, self.tree.dim)
        self.steps = 0
        self._refresh()
        return self.observe()

    def sample_goals(self, rng=None) -> tuple[np.ndarray, np.ndarray]:
        """Goals from one random configuration, so all of them are reachable at once."""
        rng = rng if rng is not None else self.rng
        q_goal = self.tree.sample_q(rng)
        return joint_positions(self.tree, q_goal)[list(self.tree.end_effectors)], q_goal

    def reset(self, rng=None) -> np.ndarray:
        rng = rng if rng is not None else self.rng
        self.q = self.tree.sample_q(rng)
        self.goals, self.goal_q = self.sample_goals(rng)
        self.steps = 0
        self._refresh()
        return self.observe()

    def observe(self) -> np.ndarray:
        """``[q, every link tip position, every goal]``, flattened."""
        return np.concatenate([self.q, self.positions.ravel(), self.goals.ravel()])

    def errors(self) -> np.ndarray:
        return np.linalg.norm(self.goals - self.effectors, axis=1)

    def error_and_score(self) -> tuple[np.ndarray, np.ndarray]:
        e = self.errors()
        return e, scores(e)

    def task_done(self) -> np.ndarray:
        return self.errors() < self.tolerances

    def reward_digrad(self) -> np.ndarray:
        return digrad_rewards(self.errors(), self.tolerances, self.reward_spec)

    def reward_ddpg(self) -> float:
        return ddpg_reward(self.errors(), self.tolerances, self.reward_spec)

    def step(self, qdot) -> StepResult:
        qdot = np.asarray(qdot, dtype=np.float64)
        if qdot.shape != (self.tree.n_joints,):
            raise ValueError(f"expected {self.tree.n_joints} joint velocities, got shape {qdot.shape}")
        if not np.all(np.isfinite(qdot)):
            raise ValueError("joint velocities must be finite")
        v = np.clip(qdot, -self.tree.velocity_limit, self.tree.velocity_limit)
        self.q = np.clip(self.q + v * self.dt, self.tree.limits[:, 0], self.tree.limits[:, 1])
        self.steps += 1
        self._refresh()
        errors = self.errors()
        task_done = errors < self.tolerances
        return StepResult(
            self.observe(),
            digrad_rewards(errors, self.tolerances, self.reward_spec),
            ddpg_reward(errors, self.tolerances, self.reward_spec),
            task_done,
            bool(task_done.all() or self.steps >= self.max_steps),
            errors,
        )


# Function forms of the environment operations.

def reset(env: ReachEnv, rng=None):
    return env.reset(rng)


def step(env: ReachEnv, qdot):
    return env.step(qdot)


def observe(env: ReachEnv):
    return env.observe()


def error_and_score(env: ReachEnv):
    return env.error_and_score()


def reward_digrad(env: ReachEnv, spec: RewardSpec | None = None):
    spec = spec or env.reward_spec
    return digrad_rewards(env.errors(), spec.tolerances(env.tree), spec)


def reward_ddpg(env: ReachEnv, spec: RewardSpec | None = None):
    spec = spec or env.reward_spec
    return ddpg_reward(env.errors(), spec.tolerances(env.tree), spec)
