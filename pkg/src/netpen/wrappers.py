"""Environment-side memory wrappers.

Wrappers change only the observation the agent sees; rewards, termination,
and the underlying environment state pass through untouched.

``AugmentedObservationEnv`` stacks the running element-wise maximum of all
past observations under the latest one, giving the agent an explicit
history that converges toward the true state as it explores.
``FrameStackEnv`` concatenates the last ``frames`` observations along the
row axis. ``ScenarioCyclerEnv`` generates one fixed scenario per network
size up front and cycles through them on reset, which removes topology
stochasticity while keeping action-success stochasticity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import replace
from typing import Optional

import numpy as np

from .env import Environment, StepResult
from .scenario import GenerationConfig, Scenario, generate

_SEED_MASK = (1 << 64) - 1

ALLOWED_FRAME_COUNTS = (4, 8, 16, 32)


def augment(
    prev_agg: np.ndarray, obs: np.ndarray, *, flags_row: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """One aggregation update.

    Returns ``(augmented, new_agg)`` where ``augmented`` stacks ``obs`` on
    top of ``prev_agg`` (the aggregation of everything before ``obs``) and
    ``new_agg`` is the element-wise maximum of the two. With ``flags_row``
    the last row is treated as the action-outcome row and is kept out of
    the aggregate, which tracks state information only.
    """
    prev_agg = np.asarray(prev_agg, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if prev_agg.shape != obs.shape:
        raise ValueError(f"aggregate shape {prev_agg.shape} != observation shape {obs.shape}")
    augmented = np.vstack([obs, prev_agg])
    new_agg = np.maximum(prev_agg, obs)
    if flags_row:
        new_agg[-1, :] = 0.0
    return augmented, new_agg


class AugmentedObservationEnv:
    """Latest observation stacked on the element-wise maximum of its past."""

    def __init__(self, env: Environment):
        self.env = env
        self._agg: Optional[np.ndarray] = None

    @property
    def observation_shape(self) -> tuple[int, int]:
        rows, cols = self.env.observation_shape
        return (2 * rows, cols)

    @property
    def aggregate(self) -> np.ndarray:
        if self._agg is None:
            raise RuntimeError("reset() has not been called")
        return self._agg

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        obs = self.env.reset(seed=seed)
        self._agg = np.zeros_like(obs)
        augmented, self._agg = augment(self._agg, obs)
        return augmented

    def step(self, action: int) -> StepResult:
        result = self.env.step(action)
        augmented, self._agg = augment(self._agg, result.observation)
        return replace(result, observation=augmented)

    def __getattr__(self, name):
        return getattr(self.env, name)


class FrameStack:
    """Ring buffer of the last ``frames`` observations, zero-initialized."""

    def __init__(self, frames: int, frame_shape: tuple[int, int]):
        if frames not in ALLOWED_FRAME_COUNTS:
            raise ValueError(f"frames must be one of {ALLOWED_FRAME_COUNTS}")
        self.frames = frames
        self.frame_shape = frame_shape
        self._buffer: deque[np.ndarray] = deque(maxlen=frames)
        self.reset()

    def reset(self) -> None:
        self._buffer.clear()
        for _ in range(self.frames):
            self._buffer.append(np.zeros(self.frame_shape, dtype=np.float64))

    def push(self, obs: np.ndarray) -> np.ndarray:
        """Append ``obs`` (evicting the oldest frame) and return the stack,
        newest frame last, concatenated along the row axis."""
        if obs.shape != self.frame_shape:
            raise ValueError(f"frame shape {obs.shape} != {self.frame_shape}")
        self._buffer.append(np.array(obs, dtype=np.float64))
        return np.concatenate(self._buffer, axis=0)


def stack(buffer: FrameStack, obs: np.ndarray) -> np.ndarray:
    return buffer.push(obs)


class FrameStackEnv:
    """Observations become the concatenation of the last ``frames`` frames."""

    def __init__(self, env: Environment, frames: int):
        self.env = env
        self.stack = FrameStack(frames, env.observation_shape)

    @property
    def frames(self) -> int:
        return self.stack.frames

    @property
    def observation_shape(self) -> tuple[int, int]:
        rows, cols = self.env.observation_shape
        return (self.stack.frames * rows, cols)

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        obs = self.env.reset(seed=seed)
        self.stack.reset()
        return self.stack.push(obs)

    def step(self, action: int) -> StepResult:
        result = self.env.step(action)
        return replace(result, observation=self.stack.push(result.observation))

    def __getattr__(self, name):
        return getattr(self.env, name)


class ScenarioCyclerEnv:
    """Cycles through one fixed scenario per network size.

    The scenarios are generated once at construction, one for each host
    count the config allows, and resets return them round-robin in
    ascending-size order. Success draws stay stochastic and fresh per
    episode.
    """

    def __init__(self, config: Optional[GenerationConfig] = None, seed: Optional[int] = None, **env_kwargs):
        self.config = config if config is not None else GenerationConfig()
        base = int(seed if seed is not None else self.config.seed) & _SEED_MASK
        self.scenarios: list[Scenario] = []
        for count in range(self.config.min_hosts, self.config.max_hosts + 1):
            rng = np.random.default_rng(np.random.SeedSequence([base, count]))
            self.scenarios.append(generate(self.config, rng, host_count=count))
        self.cursor = 0
        self.env = Environment(self.config, **env_kwargs)
        self.env._base_seed = base  # episode RNG derives from the cycler seed

    @property
    def observation_shape(self) -> tuple[int, int]:
        return self.env.observation_shape

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        scenario = self.scenarios[self.cursor]
        self.cursor = (self.cursor + 1) % len(self.scenarios)
        return self.env.reset(seed=seed, scenario=scenario)

    def step(self, action: int) -> StepResult:
        return self.env.step(action)

    def __getattr__(self, name):
        return getattr(self.env, name)


def cycler_reset(cycler: ScenarioCyclerEnv, seed: Optional[int] = None):
    """Reset onto the next fixed scenario; returns (state, observation)."""
    obs = cycler.reset(seed=seed)
    return cycler.env.state, obs


def parse_memory_spec(spec: str) -> tuple[str, Optional[int]]:
    """Parse a memory spec string: none | augmented | framestack(N) | cycler."""
    spec = spec.strip().lower()
    if spec in ("none", "augmented", "cycler"):
        return spec, None
    if spec.startswith("framestack"):
        rest = spec[len("framestack") :]
        if rest.startswith("(") and rest.endswith(")"):
            rest = rest[1:-1]
        elif rest.startswith(":"):
            rest = rest[1:]
        if rest.isdigit():
            return "framestack", int(rest)
        raise ValueError(f"bad framestack spec: {spec!r} (expected framestack(N))")
    raise ValueError(f"unknown memory spec: {spec!r}")


def make_env(
    config: Optional[GenerationConfig] = None,
    memory: str = "none",
    seed: Optional[int] = None,
    **env_kwargs,
):
    """Build an environment with the requested memory wrapper.

    ``memory`` is one of none, augmented, framestack(N), cycler. The seed
    only participates in construction for the cycler (its fixed scenarios);
    other variants take seeds at reset time.
    """
    kind, param = parse_memory_spec(memory)
    if kind == "cycler":
        return ScenarioCyclerEnv(config, seed=seed, **env_kwargs)
    env = Environment(config, **env_kwargs)
    if kind == "none":
        return env
    if kind == "augmented":
        return AugmentedObservationEnv(env)
    return FrameStackEnv(env, param if param is not None else 4)
