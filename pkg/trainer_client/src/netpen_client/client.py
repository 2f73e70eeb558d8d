"""Reset/step adapter over the netpen serve protocol.

Spawns the simulator as a child process (or attaches to any pair of
line-oriented pipes speaking the same protocol) and exposes it as an
ordinary environment object, so off-the-shelf trainers never see the wire
format. The adapter is transport only: no simulator code is imported, and
rewards, flags, and observations pass through unmodified.
"""

from __future__ import annotations

import json
import subprocess
import sys
from typing import Any, Optional, Sequence

import numpy as np


class RemoteEnvError(RuntimeError):
    """A protocol-level error response, or a dead server."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def default_server_command() -> list[str]:
    """Run the simulator CLI from the current interpreter's environment."""
    return [sys.executable, "-m", "netpen", "serve"]


class RemoteEnv:
    """One environment served by one child process.

    ``config`` holds generation-parameter overrides sent with every reset;
    ``memory`` picks the observation wrapper (none, augmented,
    framestack(N), cycler). Handles are single-threaded; use one per
    worker (see :class:`RemoteEnvPool`).
    """

    def __init__(
        self,
        command: Optional[Sequence[str]] = None,
        *,
        config: Optional[dict] = None,
        memory: str = "none",
    ):
        self.command = list(command) if command is not None else default_server_command()
        self.config = dict(config) if config else {}
        self.memory = memory
        self._spec: Optional[dict] = None
        self._episode_done = True
        self._started = False
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    # -- wire ---------------------------------------------------------------

    def _request(self, payload: dict) -> dict:
        if self._proc.poll() is not None:
            raise RemoteEnvError("server_exited", self._stderr_tail())
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps(payload) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RemoteEnvError("server_exited", self._stderr_tail())
        response = json.loads(line)
        if response.get("type") == "error":
            raise RemoteEnvError(response["code"], response["message"])
        return response

    def _stderr_tail(self) -> str:
        if self._proc.stderr is None:
            return "server process ended"
        tail = self._proc.stderr.read() or ""
        return ("server process ended: " + tail.strip()[-500:]) if tail else "server process ended"

    @staticmethod
    def _to_array(transition: dict) -> np.ndarray:
        obs = np.asarray(transition["observation"], dtype=np.float64)
        return obs.reshape(transition["shape"])

    # -- environment surface -------------------------------------------------

    def spec(self) -> dict:
        """Cached spec_info: action count, observation shape, config."""
        if self._spec is None:
            payload: dict[str, Any] = {"type": "spec", "memory": self.memory}
            if self.config:
                payload["config"] = self.config
            self._spec = self._request(payload)
        return self._spec

    @property
    def action_space_size(self) -> int:
        return self.spec()["action_space_size"]

    @property
    def observation_shape(self) -> tuple[int, ...]:
        return tuple(self.spec()["observation_shape"])

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        payload: dict[str, Any] = {"type": "reset", "memory": self.memory}
        if self.config:
            payload["config"] = self.config
        if seed is not None:
            payload["seed"] = seed
        response = self._request(payload)
        self._started = True
        self._episode_done = False
        obs = self._to_array(response)
        if self._spec is not None and obs.shape != self.observation_shape:
            raise RemoteEnvError("shape_mismatch", f"{obs.shape} != {self.observation_shape}")
        return obs

    def step(self, action: int) -> tuple[np.ndarray, float, bool, bool, dict]:
        if self._episode_done:
            raise RemoteEnvError("episode_over", "episode ended; call reset() first")
        response = self._request({"type": "step", "action": int(action)})
        obs = self._to_array(response)
        terminated = response["terminated"]
        truncated = response["truncated"]
        self._episode_done = terminated or truncated
        return obs, response["reward"], terminated, truncated, response["info"]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._request({"type": "close"})
            except RemoteEnvError:
                pass
            self._proc.terminate()
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()

    def __enter__(self) -> "RemoteEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class RemoteEnvPool:
    """A vector of independent handles for parallel rollouts."""

    def __init__(self, size: int, **env_kwargs):
        self.envs = [RemoteEnv(**env_kwargs) for _ in range(size)]

    def __len__(self) -> int:
        return len(self.envs)

    def __getitem__(self, index: int) -> RemoteEnv:
        return self.envs[index]

    def reset_all(self, seeds: Optional[Sequence[int]] = None) -> list[np.ndarray]:
        if seeds is None:
            return [env.reset() for env in self.envs]
        if len(seeds) != len(self.envs):
            raise ValueError("one seed per environment required")
        return [env.reset(seed=seed) for env, seed in zip(self.envs, seeds)]

    def step_all(self, actions: Sequence[int]) -> list[tuple[np.ndarray, float, bool, bool, dict]]:
        if len(actions) != len(self.envs):
            raise ValueError("one action per environment required")
        return [env.step(action) for env, action in zip(self.envs, actions)]

    def close_all(self) -> None:
        for env in self.envs:
            env.close()

    def __enter__(self) -> "RemoteEnvPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close_all()
