"""Newline-delimited JSON interface for out-of-process trainers.

One session owns one environment (optionally wrapped). Requests and
responses are single-line UTF-8 JSON objects; every request gets exactly
one response, in order.

Requests:
  {"type": "spec"}
  {"type": "reset", "seed": 7, "memory": "augmented", "config": {...overrides}}
  {"type": "step", "action": 17}
  {"type": "close"}

Responses:
  {"type": "spec_info", "action_space_size": A, "observation_shape": [r, c],
   "config": {...}, "memory": "...", "backend": "..."}
  {"type": "transition", "observation": [flat row-major], "shape": [r, c],
   "reward": r, "terminated": b, "truncated": b, "info": {...}}
  {"type": "error", "code": "...", "message": "..."}
  {"type": "closed"}

Error codes: parse, bad_request, bad_config, not_reset, bad_action,
episode_over. Protocol errors never corrupt the environment; the session
continues until close or end of input.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import IO, Iterator, Optional, Union

import numpy as np

from .agents import Trajectory, TrajectoryStep
from .scenario import ConfigError, GenerationConfig
from .wrappers import make_env, parse_memory_spec


class ProtocolSession:
    """State machine behind one connection."""

    def __init__(
        self,
        config: Optional[GenerationConfig] = None,
        memory: str = "none",
        backend: str = "auto",
    ):
        self.base_config = config if config is not None else GenerationConfig()
        self.backend = backend
        self.memory = memory
        self.env = None
        self._env_key = None
        self._episode_done = True
        self.finished = False  # set by recording sessions to end serving

    def handle(self, request: dict) -> dict:
        kind = request.get("type")
        if kind == "spec":
            return self._spec(request)
        if kind == "reset":
            return self._reset(request)
        if kind == "step":
            return self._step(request)
        if kind == "close":
            self.env = None
            return {"type": "closed"}
        return _error("bad_request", f"unknown request type: {kind!r}")

    @staticmethod
    def _shape_for(config: GenerationConfig, memory: str) -> tuple[int, int]:
        kind, param = parse_memory_spec(memory)
        from .env import ObservationLayout

        rows, cols = ObservationLayout.from_config(config).shape
        if kind == "augmented":
            return (2 * rows, cols)
        if kind == "framestack":
            return ((param or 4) * rows, cols)
        return (rows, cols)

    def _spec(self, request: dict) -> dict:
        """Describe the environment a reset with these (optional) overrides
        would produce; never touches session state."""
        from .scenario import action_space_size

        overrides = request.get("config") or {}
        memory = request.get("memory", self.memory)
        try:
            config = self.base_config.with_overrides(**overrides) if overrides else self.base_config
            shape = self._shape_for(config, memory)
        except (ConfigError, TypeError, ValueError) as exc:
            return _error("bad_config", str(exc))
        return {
            "type": "spec_info",
            "action_space_size": action_space_size(config),
            "observation_shape": list(shape),
            "config": config.to_dict(),
            "memory": memory,
            "backend": self.backend,
        }

    def _reset(self, request: dict) -> dict:
        overrides = request.get("config") or {}
        memory = request.get("memory", self.memory)
        try:
            config = self.base_config.with_overrides(**overrides) if overrides else self.base_config
            key = (config, memory)
            if self.env is None or key != self._env_key:
                self.env = make_env(config, memory=memory, seed=request.get("seed"), backend=self.backend)
                self._env_key = key
                self.base_config = config
                self.memory = memory
        except (ConfigError, TypeError, ValueError) as exc:
            return _error("bad_config", str(exc))
        obs = self.env.reset(seed=request.get("seed"))
        self._episode_done = False
        return _transition(obs, 0.0, False, False, {"host_count": self.env.host_count})

    def _step(self, request: dict) -> dict:
        if self.env is None:
            return _error("not_reset", "reset must be called before step")
        if self._episode_done:
            return _error("episode_over", "episode ended; reset to continue")
        action = request.get("action")
        if not isinstance(action, int):
            return _error("bad_action", "step requires an integer 'action'")
        try:
            result = self.env.step(action)
        except ValueError as exc:
            return _error("bad_action", str(exc))
        self._episode_done = result.terminated or result.truncated
        info = dict(result.info)
        info["outcome"] = info["outcome"].to_dict()
        return _transition(result.observation, result.reward, result.terminated, result.truncated, info)


class RecordingSession(ProtocolSession):
    """A session that logs remotely driven episodes.

    Used by ``evaluate --policy remote``: an external agent drives
    reset/step over the wire while completed episodes are captured as
    trajectories (a reset mid-episode drops the partial episode). After
    ``episodes`` completions the session marks itself finished, which ends
    the serve loop after the final response is written.
    """

    def __init__(self, *args, episodes: int, logger: Optional["EpisodeLogger"] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.remaining = episodes
        self.logger = logger
        self.trajectories: list[Trajectory] = []
        self._steps: list[TrajectoryStep] = []
        self._seed: Optional[int] = None

    def handle(self, request: dict) -> dict:
        response = super().handle(request)
        if response.get("type") != "transition":
            return response
        if request.get("type") == "reset":
            self._steps = []
            self._seed = request.get("seed")
            return response
        info = response["info"]
        outcome = info["outcome"]
        error = None
        for name in ("connection", "permission", "undefined"):
            if outcome[f"{name}_error"]:
                error = name
        action = info["action_index"]
        action_def = self.env.scenario.actions[action]
        self._steps.append(
            TrajectoryStep(
                t=len(self._steps),
                action_index=action,
                kind=action_def.kind.wire_name,
                target=action_def.target,
                success=outcome["success"],
                error=error,
                reward=response["reward"],
                newly_discovered=info["newly_discovered"],
            )
        )
        if response["terminated"] or response["truncated"]:
            trajectory = Trajectory(
                seed=self._seed,
                host_count=self.env.host_count,
                config_hash=self.base_config.config_hash(),
                terminal="terminated" if response["terminated"] else "truncated",
                steps=self._steps,
                policy="remote",
            )
            self.trajectories.append(trajectory)
            if self.logger is not None:
                self.logger.log(trajectory)
            self._steps = []
            self.remaining -= 1
            if self.remaining <= 0:
                self.finished = True
        return response


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


def _transition(obs: np.ndarray, reward: float, terminated: bool, truncated: bool, info: dict) -> dict:
    return {
        "type": "transition",
        "observation": [float(v) for v in np.asarray(obs).ravel()],
        "shape": list(obs.shape),
        "reward": float(reward),
        "terminated": bool(terminated),
        "truncated": bool(truncated),
        "info": info,
    }


def serve(
    reader: Optional[IO[str]] = None,
    writer: Optional[IO[str]] = None,
    *,
    config: Optional[GenerationConfig] = None,
    memory: str = "none",
    backend: str = "auto",
    session: Optional[ProtocolSession] = None,
) -> None:
    """Serve one session over a pair of line-oriented text streams.

    Defaults to stdin/stdout. Returns when a close request arrives, the
    input stream ends, or the session marks itself finished. Malformed
    JSON yields an error response and the session continues.
    """
    reader = reader if reader is not None else sys.stdin
    writer = writer if writer is not None else sys.stdout
    if session is None:
        session = ProtocolSession(config, memory=memory, backend=backend)
    for line in reader:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
        except ValueError as exc:
            response = _error("parse", str(exc))
        else:
            response = session.handle(request)
        writer.write(json.dumps(response, separators=(",", ":")) + "\n")
        writer.flush()
        if response.get("type") == "closed" or session.finished:
            break


def serve_tcp(port: int, host: str = "127.0.0.1", **session_kwargs) -> None:
    """Accept local socket connections, one independent session each."""
    import socketserver

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            reader = (line.decode("utf-8") for line in self.rfile)

            class _W:
                def write(inner, text):
                    self.wfile.write(text.encode("utf-8"))

                def flush(inner):
                    self.wfile.flush()

            serve(_IterReader(reader), _W(), **session_kwargs)

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True

    with Server((host, port), Handler) as server:
        server.serve_forever()


class _IterReader:
    """Adapts a line iterator to the for-line interface serve expects."""

    def __init__(self, lines: Iterator[str]):
        self._lines = lines

    def __iter__(self):
        return self._lines


# --- Episode log persistence (JSONL, one step per line) ---------------------
#
# Header: {"record": "episode", "id": "...", "policy": "...", "seed": n,
#          "config_hash": "...", "host_count": n, "terminal": "...",
#          "return": x, "length": n}
# Step:   {"record": "step", "episode": "...", "t": n, "action": n,
#          "kind": "...", "target": [s, i] | null, "success": b,
#          "error": "..." | null, "reward": x, "newly_discovered": n}


class EpisodeLogger:
    """Append-only JSONL sink; one writer per file."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._count = 0
        self._handle = open(self.path, "a", encoding="utf-8")

    def log(self, trajectory: Trajectory) -> str:
        """Append one episode; the whole record is written in a single
        flush so readers never see a partial episode."""
        record_id = f"ep-{self._count}"
        lines = [json.dumps(h, separators=(",", ":")) for h in trajectory_records(trajectory, record_id)]
        self._handle.write("\n".join(lines) + "\n")
        self._handle.flush()
        self._count += 1
        return record_id

    def close(self) -> None:
        self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def trajectory_records(trajectory: Trajectory, record_id: str) -> list[dict]:
    header = {
        "record": "episode",
        "id": record_id,
        "policy": trajectory.policy,
        "seed": trajectory.seed,
        "config_hash": trajectory.config_hash,
        "host_count": trajectory.host_count,
        "terminal": trajectory.terminal,
        "return": trajectory.episode_return,
        "length": trajectory.length,
    }
    records = [header]
    for s in trajectory.steps:
        records.append(
            {
                "record": "step",
                "episode": record_id,
                "t": s.t,
                "action": s.action_index,
                "kind": s.kind,
                "target": list(s.target) if s.target is not None else None,
                "success": s.success,
                "error": s.error,
                "reward": s.reward,
                "newly_discovered": s.newly_discovered,
            }
        )
    return records


def log_episode(sink: Union[str, Path, EpisodeLogger], trajectory: Trajectory) -> str:
    """Append one trajectory to a log file (or an open logger)."""
    if isinstance(sink, EpisodeLogger):
        return sink.log(trajectory)
    path = Path(sink)
    count = 0
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            count = sum(1 for line in fh if '"record":"episode"' in line or '"record": "episode"' in line)
    logger = EpisodeLogger(path)
    logger._count = count
    try:
        return logger.log(trajectory)
    finally:
        logger.close()


def read_trajectories(path: Union[str, Path]) -> list[Trajectory]:
    """Parse a JSONL episode log back into trajectories."""
    episodes: dict[str, Trajectory] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["record"] == "episode":
                episodes[rec["id"]] = Trajectory(
                    seed=rec["seed"],
                    host_count=rec["host_count"],
                    config_hash=rec["config_hash"],
                    terminal=rec["terminal"],
                    steps=[],
                    policy=rec.get("policy", ""),
                )
                order.append(rec["id"])
            elif rec["record"] == "step":
                episodes[rec["episode"]].steps.append(
                    TrajectoryStep(
                        t=rec["t"],
                        action_index=rec["action"],
                        kind=rec["kind"],
                        target=tuple(rec["target"]) if rec["target"] is not None else None,
                        success=rec["success"],
                        error=rec["error"],
                        reward=rec["reward"],
                        newly_discovered=rec["newly_discovered"],
                    )
                )
    return [episodes[i] for i in order]
