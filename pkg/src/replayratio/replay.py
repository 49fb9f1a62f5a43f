"""Fixed-capacity FIFO experience replay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np


class InsufficientDataError(RuntimeError):
    """The buffer holds fewer transitions than the requested minibatch."""


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Ring buffer of transitions stored column-wise in preallocated arrays.

    Observations are copied on push. Storage is allocated on the first push,
    when the observation dimension becomes known.
    """

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.write_cursor = 0
        self.count = 0
        self._obs = None
        self._next_obs = None
        self._actions = np.zeros(self.capacity, dtype=np.int64)
        self._rewards = np.zeros(self.capacity, dtype=np.float64)
        self._terminals = np.zeros(self.capacity, dtype=bool)

    def __len__(self) -> int:
        return self.count

    def _allocate(self, dim: int) -> None:
        self._obs = np.zeros((self.capacity, dim), dtype=np.float64)
        self._next_obs = np.zeros((self.capacity, dim), dtype=np.float64)

    def push(self, t: Transition) -> None:
        obs = np.asarray(t.obs, dtype=np.float64).ravel()
        next_obs = np.asarray(t.next_obs, dtype=np.float64).ravel()
        if obs.shape != next_obs.shape:
            raise ValueError("obs and next_obs must have the same dimension")
        if self._obs is None:
            self._allocate(obs.size)
        elif obs.size != self._obs.shape[1]:
            raise ValueError(f"observation dimension {obs.size} != {self._obs.shape[1]}")
        i = self.write_cursor
        self._obs[i] = obs
        self._next_obs[i] = next_obs
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._terminals[i] = t.terminal
        self.write_cursor = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def _get(self, slot: int) -> Transition:
        return Transition(
            self._obs[slot].copy(),
            int(self._actions[slot]),
            float(self._rewards[slot]),
            self._next_obs[slot].copy(),
            bool(self._terminals[slot]),
        )

    def __iter__(self) -> Iterator[Transition]:
        """Resident transitions, oldest first."""
        start = self.write_cursor if self.count == self.capacity else 0
        for j in range(self.count):
            yield self._get((start + j) % self.capacity)

    def oldest(self) -> Transition:
        if self.count == 0:
            raise IndexError("empty buffer")
        return next(iter(self))

    def sample_indices(self, batch_size: int, rng: np.random.Generator,
                       min_count: int | None = None) -> np.ndarray:
        need = batch_size if min_count is None else max(1, min_count)
        if self.count < need:
            raise InsufficientDataError(
                f"buffer holds {self.count} transitions, need {need} to sample"
            )
        # slots 0..count-1 are exactly the resident ones, full or not
        return rng.integers(0, self.count, size=batch_size)

    def sample_arrays(self, batch_size: int, rng: np.random.Generator,
                      min_count: int | None = None):
        """Same draw as :meth:`sample_minibatch`, returned as stacked arrays.

        Returns ``(obs, actions, rewards, next_obs, terminals)``.
        """
        idx = self.sample_indices(batch_size, rng, min_count)
        return (self._obs[idx], self._actions[idx], self._rewards[idx],
                self._next_obs[idx], self._terminals[idx])

    def sample_minibatch(self, batch_size: int, rng: np.random.Generator,
                         min_count: int | None = None) -> list[Transition]:
        """Uniform draw with replacement.

        Refuses to sample until the buffer holds ``min_count`` transitions,
        ``batch_size`` by default.
        """
        return [self._get(int(i)) for i in self.sample_indices(batch_size, rng, min_count)]


def expected_sample_rate(ratio, batch_size: int, buffer_size: int) -> float:
    """Expected number of times a transition is replayed while resident.

    A full buffer keeps each transition for ``buffer_size`` env steps, during
    which ``buffer_size * ratio`` minibatches of ``batch_size`` uniform draws
    each pick it with probability ``1 / buffer_size``. ``ratio`` is a
    ``LearnRatio`` or a plain number of updates per env step.
    """
    if batch_size < 1 or buffer_size < 1:
        raise ValueError("batch_size and buffer_size must be positive")
    rho = float(getattr(ratio, "value", ratio))
    if rho <= 0:
        raise ValueError("ratio must be positive")
    return batch_size * rho
