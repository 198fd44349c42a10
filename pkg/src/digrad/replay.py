"""Experience replay and exploration noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    rewards: np.ndarray
    next_state: np.ndarray
    task_done: np.ndarray
    done: bool = False


@dataclass
class Batch:
    """Row-stacked transitions."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    task_done: np.ndarray
    done: np.ndarray

    def __len__(self):
        return self.states.shape[0]

    @classmethod
    def from_transitions(cls, transitions) -> "Batch":
        transitions = list(transitions)
        if not transitions:
            raise ValueError("empty batch")
        return cls(
            np.array([t.state for t in transitions], dtype=np.float64),
            np.array([t.action for t in transitions], dtype=np.float64),
            np.array([np.atleast_1d(t.rewards) for t in transitions], dtype=np.float64),
            np.array([t.next_state for t in transitions], dtype=np.float64),
            np.array([np.atleast_1d(t.task_done) for t in transitions], dtype=bool),
            np.array([t.done for t in transitions], dtype=bool),
        )


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity, state_dim, action_dim, n_rewards, rng=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim, self.action_dim, self.n_rewards = state_dim, action_dim, n_rewards
        self.rng = rng if rng is not None else np.random.default_rng()
        # np.empty does not touch memory, so a large capacity costs only what is written
        self._states = np.empty((capacity, state_dim))
        self._actions = np.empty((capacity, action_dim))
        self._rewards = np.empty((capacity, n_rewards))
        self._next_states = np.empty((capacity, state_dim))
        self._task_done = np.empty((capacity, n_rewards), dtype=bool)
        self._done = np.empty(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0
        self.inserts = 0

    def __len__(self):
        return self.size

    def add(self, t: Transition) -> None:
        state, next_state = np.asarray(t.state), np.asarray(t.next_state)
        action, rewards = np.asarray(t.action), np.atleast_1d(t.rewards)
        task_done = np.atleast_1d(t.task_done)
        if (state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,)
                or action.shape != (self.action_dim,) or rewards.shape != (self.n_rewards,)
                or task_done.shape != (self.n_rewards,)):
            raise ValueError("transition does not match the buffer's dimensions")
        i = self.cursor
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = rewards
        self._next_states[i] = next_state
        self._task_done[i] = task_done
        self._done[i] = t.done
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserts += 1

    def sample_indices(self, batch_size: int) -> np.ndarray:
        return self.rng.integers(0, self.size, size=batch_size)

    def gather(self, idx) -> Batch:
        idx = np.asarray(idx)
        return Batch(self._states[idx], self._actions[idx], self._rewards[idx],
                     self._next_states[idx], self._task_done[idx], self._done[idx])

    def sample(self, batch_size: int) -> Batch:
        """Uniform sample with replacement."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self.gather(self.sample_indices(batch_size))

    def __getitem__(self, i) -> Transition:
        """``buf[0]`` is the oldest stored transition."""
        if not -self.size <= i < self.size:
            raise IndexError(i)
        start = self.cursor if self.size == self.capacity else 0
        j = (start + i % self.size) % self.capacity
        return Transition(self._states[j].copy(), self._actions[j].copy(), self._rewards[j].copy(),
                          self._next_states[j].copy(), self._task_done[j].copy(), bool(self._done[j]))


class GaussianNoise:
    """Zero-mean i.i.d. Gaussian exploration noise whose scale decays per episode.

    ``sigma = sigma0 * decay ** episode``
    """

    def __init__(self, sigma0, dim, decay=1.0, rng=None):
        if sigma0 < 0:
            raise ValueError("sigma0 must be non-negative")
        if not 0 < decay <= 1:
            raise ValueError("decay must lie in (0, 1]")
        self.sigma0, self.dim, self.decay = float(sigma0), int(dim), float(decay)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.episode = 0

    @property
    def sigma(self) -> float:
        return self.sigma0 * self.decay ** self.episode

    def reset(self, episode: int) -> None:
        self.episode = int(episode)

    def sample(self, size=None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.sigma * self.rng.standard_normal(shape)
