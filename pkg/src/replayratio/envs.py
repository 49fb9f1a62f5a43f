"""Environments: HealthGrid (health-gathering gridworld) and a solvable chain MDP.

Both expose the same small interface::

    obs = env.reset(seed)
    result = env.step(action)      # StepResult
    env.n_actions, env.obs_dim, env.nominal_len, env.health_trace
    env.episode_score()
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

EMPTY, WALL, KIT, POISON = 0, 1, 2, 3
# up, down, left, right as (row, col) offsets
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
MAX_HEALTH = 100.0


class EpisodeOverError(RuntimeError):
    """step() called on an episode that has already terminated."""


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    health_after: float
    terminal: bool
    kits_taken: int = 0
    poisons_taken: int = 0
    health_before: float = 0.0
    steps: int = 1

    @property
    def info(self) -> dict:
        return {"kits_taken": self.kits_taken, "poisons_taken": self.poisons_taken}


@dataclass
class HealthGridConfig:
    grid_size: int = 9
    n_kits: int = 4
    n_poisons: int = 3
    kit_heal: float = 25.0
    poison_damage: float = 30.0
    decay_per_step: float = 1.0
    episode_len: int = 200
    obs_window: int = 5
    aux_kit_reward: float = 100.0
    aux_poison_reward: float = -100.0

    def __post_init__(self):
        if self.grid_size < 3:
            raise ValueError("grid_size must be at least 3")
        if self.obs_window < 1 or self.obs_window % 2 == 0:
            raise ValueError("obs_window must be a positive odd integer")
        if min(self.kit_heal, self.poison_damage, self.decay_per_step) <= 0:
            raise ValueError("kit_heal, poison_damage and decay_per_step must be positive")
        if self.n_kits < 0 or self.n_poisons < 0 or self.episode_len < 1:
            raise ValueError("item counts must be >= 0 and episode_len >= 1")
        free = int((build_layout(self.grid_size) == EMPTY).sum())
        # agent cell plus one spare cell so a consumed item can always respawn
        if self.n_kits + self.n_poisons + 2 > free:
            raise ValueError(f"{self.n_kits + self.n_poisons} items do not fit in {free} free cells")

    def to_dict(self) -> dict:
        return asdict(self)


def build_layout(grid_size: int) -> np.ndarray:
    """Border walls plus a lattice of single-cell pillars every other cell."""
    cells = np.zeros((grid_size, grid_size), dtype=np.int8)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = WALL
    for r in range(3, grid_size - 3, 2):
        for c in range(3, grid_size - 3, 2):
            cells[r, c] = WALL
    return cells


def shaped_reward(health_delta: float, kits: int, poisons: int,
                  cfg: HealthGridConfig | None = None) -> float:
    """Change in health plus a fixed bonus per kit and penalty per poison."""
    cfg = cfg or HealthGridConfig()
    return health_delta + cfg.aux_kit_reward * kits + cfg.aux_poison_reward * poisons


def episode_score(health_trace, nominal_len: int) -> float:
    """Mean health over ``nominal_len`` steps; steps after death count as 0."""
    if len(health_trace) > nominal_len:
        raise ValueError("health trace longer than the nominal episode length")
    return float(np.sum(health_trace, dtype=np.float64)) / nominal_len


class HealthGrid:
    """Collect health kits, avoid poison, while health decays every step.

    The observation is an egocentric ``obs_window x obs_window`` view with
    one-hot channels (wall, kit, poison), flattened, followed by health / 100.
    Cells outside the map read as wall. Consumed items respawn on a uniform
    random empty cell, so item counts are constant.
    """

    n_actions = len(MOVES)

    def __init__(self, config: HealthGridConfig | None = None):
        self.cfg = config or HealthGridConfig()
        self._r = self.cfg.obs_window // 2
        # padded by the view radius so the egocentric window is a plain slice
        self.layout = np.pad(build_layout(self.cfg.grid_size), self._r, constant_values=WALL)
        self.free_cells = [tuple(int(v) for v in rc) for rc in np.argwhere(self.layout == EMPTY)]
        self.obs_dim = 3 * self.cfg.obs_window ** 2 + 1
        self.nominal_len = self.cfg.episode_len
        self.rng = np.random.default_rng(0)
        self.cells = self.layout.copy()
        self.pos = self.free_cells[0]
        self.health = MAX_HEALTH
        self.tick = 0
        self.done = True
        self.health_trace: list[float] = []

    # -- state --------------------------------------------------------------

    def _empty_cells(self) -> list[tuple[int, int]]:
        return [rc for rc in self.free_cells if self.cells[rc] == EMPTY and rc != self.pos]

    def _spawn(self, kind: int) -> None:
        empties = self._empty_cells()
        self.cells[empties[int(self.rng.integers(len(empties)))]] = kind

    def reset(self, seed: int) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        self.cells = self.layout.copy()
        self.pos = self.free_cells[int(self.rng.integers(len(self.free_cells)))]
        others = [rc for rc in self.free_cells if rc != self.pos]
        picks = self.rng.choice(len(others), size=self.cfg.n_kits + self.cfg.n_poisons,
                                replace=False)
        for j, i in enumerate(picks):
            self.cells[others[i]] = KIT if j < self.cfg.n_kits else POISON
        self.health = MAX_HEALTH
        self.tick = 0
        self.done = False
        self.health_trace = []
        return self.observe()

    def observe(self) -> np.ndarray:
        r = self._r
        row, col = self.pos
        view = self.cells[row - r:row + r + 1, col - r:col + r + 1]
        obs = np.empty(self.obs_dim, dtype=np.float64)
        n = view.size
        obs[0:n] = (view == WALL).ravel()
        obs[n:2 * n] = (view == KIT).ravel()
        obs[2 * n:3 * n] = (view == POISON).ravel()
        obs[-1] = self.health / MAX_HEALTH
        return obs

    def count_items(self) -> tuple[int, int]:
        return int((self.cells == KIT).sum()), int((self.cells == POISON).sum())

    # -- dynamics -----------------------------------------------------------

    def step(self, action: int) -> StepResult:
        if self.done:
            raise EpisodeOverError("episode is over; call reset()")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range")
        before = self.health
        self.health_trace.append(before)
        dr, dc = MOVES[action]
        target = (self.pos[0] + dr, self.pos[1] + dc)
        if self.cells[target] != WALL:
            self.pos = target

        kits = poisons = 0
        health = before - self.cfg.decay_per_step
        item = self.cells[self.pos]
        if item == KIT:
            kits = 1
            health += self.cfg.kit_heal
        elif item == POISON:
            poisons = 1
            health -= self.cfg.poison_damage
        if item in (KIT, POISON):
            self.cells[self.pos] = EMPTY
            self._spawn(item)
        self.health = min(max(health, 0.0), MAX_HEALTH)
        self.tick += 1
        self.done = self.health <= 0.0 or self.tick >= self.cfg.episode_len
        reward = shaped_reward(self.health - before, kits, poisons, self.cfg)
        return StepResult(self.observe(), reward, self.health, self.done,
                          kits, poisons, before)

    def episode_score(self) -> float:
        return episode_score(self.health_trace, self.nominal_len)


@dataclass
class ChainMDP:
    """Deterministic chain; reaching the right end pays 1.0 and ends the episode.

    States are ``0 .. n_states-1`` with ``n_states-1`` terminal. Action 0
    moves left (blocked at 0), action 1 moves right. The observation is a
    one-hot vector of the current state.
    """

    n_states: int = 5
    goal_reward: float = 1.0
    max_steps: int = 50
    start: int = 0
    n_actions: int = field(default=2, init=False)

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("chain needs at least two states")
        self.obs_dim = self.n_states
        self.nominal_len = self.max_steps
        self.state = self.start
        self.tick = 0
        self.done = True
        self.total_reward = 0.0
        self.health_trace: list[float] = []

    def is_terminal(self, s: int) -> bool:
        return s == self.n_states - 1

    def transition(self, s: int, a: int) -> tuple[int, float]:
        s2 = max(s - 1, 0) if a == 0 else min(s + 1, self.n_states - 1)
        return s2, (self.goal_reward if self.is_terminal(s2) else 0.0)

    def encode(self, s: int) -> np.ndarray:
        obs = np.zeros(self.n_states)
        obs[s] = 1.0
        return obs

    def reset(self, seed: int = 0) -> np.ndarray:
        self.state = self.start
        self.tick = 0
        self.done = False
        self.total_reward = 0.0
        return self.encode(self.state)

    def step(self, action: int) -> StepResult:
        if self.done:
            raise EpisodeOverError("episode is over; call reset()")
        self.state, reward = self.transition(self.state, action)
        self.tick += 1
        self.total_reward += reward
        self.done = self.is_terminal(self.state) or self.tick >= self.max_steps
        return StepResult(self.encode(self.state), reward, 0.0, self.done)

    def episode_score(self) -> float:
        # no health signal here; the score is the undiscounted return
        return self.total_reward


def value_iteration(mdp: ChainMDP, discount: float = 1.0, tolerance: float = 1e-10,
                    max_sweeps: int = 10_000) -> np.ndarray:
    """Optimal Q table of shape ``(n_states, 2)``; terminal rows are zero."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_sweeps):
        v = q.max(axis=1)
        new = np.zeros_like(q)
        for s in range(mdp.n_states):
            if mdp.is_terminal(s):
                continue
            for a in range(mdp.n_actions):
                s2, r = mdp.transition(s, a)
                new[s, a] = r + (0.0 if mdp.is_terminal(s2) else discount * v[s2])
        delta = np.abs(new - q).max()
        q = new
        if delta < tolerance:
            break
    return q


class FrameSkip:
    """Repeat each action ``k`` times, summing rewards, stopping early on terminal."""

    def __init__(self, env, k: int):
        if k < 1:
            raise ValueError("frame skip must be >= 1")
        self.env = env
        self.k = int(k)
        self.n_actions = env.n_actions
        self.obs_dim = env.obs_dim

    def __getattr__(self, name):
        return getattr(self.env, name)

    def reset(self, seed: int) -> np.ndarray:
        return self.env.reset(seed)

    def step(self, action: int) -> StepResult:
        total = 0.0
        kits = poisons = 0
        first = None
        for i in range(self.k):
            res = self.env.step(action)
            if first is None:
                first = res
            total += res.reward
            kits += res.kits_taken
            poisons += res.poisons_taken
            if res.terminal:
                break
        return StepResult(res.obs, total, res.health_after, res.terminal,
                          kits, poisons, first.health_before, i + 1)

    def episode_score(self) -> float:
        return self.env.episode_score()


ENV_NAMES = ("healthgrid", "chain")


def make_env(name: str = "healthgrid", env_config: dict | None = None, frame_skip: int = 1):
    env_config = dict(env_config or {})
    if name == "healthgrid":
        env = HealthGrid(HealthGridConfig(**env_config))
    elif name == "chain":
        env = ChainMDP(**env_config)
    else:
        raise ValueError(f"unknown environment {name!r}; choose from {ENV_NAMES}")
    return env if frame_skip == 1 else FrameSkip(env, frame_skip)
