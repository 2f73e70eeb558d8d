"""The partially observable penetration-testing environment.

State is a per-host record of (compromised, reachable, discovered, access);
everything else a scenario defines is static for the episode. Observations
are fixed-shape ``(max_hosts + 1, n)`` matrices whose host rows are zero
except for the fields the last action revealed, and whose final row carries
the four action-outcome flags (success, connection error, permission error,
undefined error) in its first four columns.

Host vector column layout, in order: subnet one-hot, host-index one-hot,
compromised, reachable, discovered, sensitive, discovery value, access
one-hot (no access / user / root), OS one-hot, service flags, process flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ._engine import get_backend
from ._engine_py import OK
from .scenario import (
    DMZ,
    AccessLevel,
    ActionDef,
    ActionKind,
    GenerationConfig,
    Scenario,
    action_space_size,
    generate,
    max_subnet_count,
)

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ObservationLayout:
    """Column geometry of the host vector; constant for a config."""

    max_subnets: int
    host_slots: int  # one-hot width for the host index within its subnet
    num_os: int
    num_services: int
    num_processes: int
    max_hosts: int

    @classmethod
    def from_config(cls, config: GenerationConfig) -> "ObservationLayout":
        return cls(
            max_subnets=max_subnet_count(config),
            host_slots=config.hosts_per_user_subnet_max,
            num_os=config.num_os,
            num_services=config.num_services,
            num_processes=config.num_processes,
            max_hosts=config.max_hosts,
        )

    @property
    def off_host(self) -> int:
        return self.max_subnets

    @property
    def off_compromised(self) -> int:
        return self.max_subnets + self.host_slots

    @property
    def off_reachable(self) -> int:
        return self.off_compromised + 1

    @property
    def off_discovered(self) -> int:
        return self.off_compromised + 2

    @property
    def off_sensitive(self) -> int:
        return self.off_compromised + 3

    @property
    def off_discovery_value(self) -> int:
        return self.off_compromised + 4

    @property
    def off_access(self) -> int:
        return self.off_discovery_value + 1

    @property
    def off_os(self) -> int:
        return self.off_access + 3

    @property
    def off_services(self) -> int:
        return self.off_os + self.num_os

    @property
    def off_processes(self) -> int:
        return self.off_services + self.num_services

    @property
    def n_cols(self) -> int:
        return self.off_processes + self.num_processes

    @property
    def rows(self) -> int:
        return self.max_hosts + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.n_cols)

    def decode_host_row(self, row: np.ndarray) -> dict:
        """Decode one host row into named fields.

        One-hot segments decode to None when entirely zero (not revealed);
        plain flags decode to their raw boolean value.
        """

        def onehot(start: int, width: int) -> Optional[int]:
            seg = row[start : start + width]
            return int(np.argmax(seg)) if seg.any() else None

        return {
            "subnet": onehot(0, self.max_subnets),
            "host_index": onehot(self.off_host, self.host_slots),
            "compromised": bool(row[self.off_compromised]),
            "reachable": bool(row[self.off_reachable]),
            "discovered": bool(row[self.off_discovered]),
            "sensitive": bool(row[self.off_sensitive]),
            "discovery_value": float(row[self.off_discovery_value]),
            "access": onehot(self.off_access, 3),
            "os": onehot(self.off_os, self.num_os),
            "services": tuple(int(v) for v in row[self.off_services : self.off_services + self.num_services]),
            "processes": tuple(int(v) for v in row[self.off_processes : self.off_processes + self.num_processes]),
        }


class EpisodeRuntime:
    """Numeric mirror of one scenario plus the episode's dynamic state.

    Every array is C-contiguous with a fixed dtype; both transition kernels
    consume this object directly.
    """

    def __init__(self, scenario: Scenario, layout: ObservationLayout):
        config = scenario.config
        hosts = scenario.hosts
        m = len(hosts)
        self.scenario = scenario
        self.n_hosts = m
        self.max_hosts = config.max_hosts
        self.n_subnets = scenario.layout.num_subnets
        self.dmz = DMZ

        self.host_subnet = np.array([h.address[0] for h in hosts], dtype=np.int64)
        self.host_index = np.array([h.address[1] for h in hosts], dtype=np.int64)
        self.host_os = np.array([h.os for h in hosts], dtype=np.int64)
        self.host_services = np.array([h.services for h in hosts], dtype=np.uint8)
        self.host_processes = np.array([h.processes for h in hosts], dtype=np.uint8)
        self.host_sensitive = np.array([h.sensitive for h in hosts], dtype=np.uint8)
        self.host_value = np.array([h.value for h in hosts], dtype=np.float64)
        self.host_dvalue = np.array([h.discovery_value for h in hosts], dtype=np.float64)

        k = self.n_subnets
        self.adj = np.zeros((k, k), dtype=np.uint8)
        for a, b in scenario.layout.adjacency:
            self.adj[a, b] = 1
            self.adj[b, a] = 1
        self.fw = np.zeros((k, k, config.num_services), dtype=np.uint8)
        for rule in scenario.firewall:
            for svc in rule.allowed_services:
                self.fw[rule.from_subnet, rule.to_subnet, svc] = 1

        slot_of = {h.address: i for i, h in enumerate(hosts)}
        acts = scenario.actions
        self.a_kind = np.array([int(a.kind) for a in acts], dtype=np.int64)
        self.a_host = np.array(
            [slot_of[a.target] if a.target is not None else -1 for a in acts], dtype=np.int64
        )
        self.a_cost = np.array([a.cost for a in acts], dtype=np.float64)
        self.a_prob = np.array([a.prob for a in acts], dtype=np.float64)
        self.a_req = np.array([int(a.required_access) for a in acts], dtype=np.int64)
        self.a_os = np.array([-1 if a.os is None else a.os for a in acts], dtype=np.int64)
        self.a_sp = np.array(
            [a.service if a.service is not None else (a.process if a.process is not None else -1) for a in acts],
            dtype=np.int64,
        )
        self.sensitive_slots = np.array(
            [slot_of[addr] for addr in scenario.sensitive_addresses], dtype=np.int64
        )

        self.off_host = layout.off_host
        self.off_comp = layout.off_compromised
        self.off_reach = layout.off_reachable
        self.off_disc = layout.off_discovered
        self.off_sens = layout.off_sensitive
        self.off_dval = layout.off_discovery_value
        self.off_access = layout.off_access
        self.off_os = layout.off_os
        self.off_svc = layout.off_services
        self.off_proc = layout.off_processes
        self.n_cols = layout.n_cols

        self.access = np.zeros(m, dtype=np.int64)
        self.compromised = np.zeros(m, dtype=np.uint8)
        self.reachable = np.zeros(m, dtype=np.uint8)
        self.discovered = np.zeros(m, dtype=np.uint8)


@dataclass(frozen=True)
class OutcomeFlags:
    """Flags reported in the observation's final row."""

    success: bool = False
    connection_error: bool = False
    permission_error: bool = False
    undefined_error: bool = False

    @classmethod
    def from_code(cls, code: int) -> "OutcomeFlags":
        return _OUTCOMES[code]

    @classmethod
    def for_error(cls, code: int) -> Optional["OutcomeFlags"]:
        """The flags a failing precondition would produce, or None for OK."""
        if code == OK:
            return None
        return cls.from_code(code)

    @property
    def error(self) -> Optional[str]:
        if self.connection_error:
            return "connection"
        if self.permission_error:
            return "permission"
        if self.undefined_error:
            return "undefined"
        return None

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "connection_error": self.connection_error,
            "permission_error": self.permission_error,
            "undefined_error": self.undefined_error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomeFlags":
        return cls(d["success"], d["connection_error"], d["permission_error"], d["undefined_error"])


# One instance per outcome code: OK, CONNECTION, PERMISSION, UNDEFINED, FAILED.
_OUTCOMES = (
    OutcomeFlags(success=True),
    OutcomeFlags(connection_error=True),
    OutcomeFlags(permission_error=True),
    OutcomeFlags(undefined_error=True),
    OutcomeFlags(),
)


@dataclass(frozen=True)
class HostDynamicState:
    compromised: bool
    reachable: bool
    discovered: bool
    access: AccessLevel


@dataclass
class EnvState:
    """Dynamic episode state; the numeric arrays live in ``runtime``."""

    scenario: Scenario
    layout: ObservationLayout
    runtime: EpisodeRuntime
    rng: np.random.Generator
    step: int = 0
    last_outcome: OutcomeFlags = field(default_factory=OutcomeFlags)

    @property
    def host_count(self) -> int:
        return self.runtime.n_hosts

    @property
    def dyn(self) -> list[HostDynamicState]:
        rt = self.runtime
        return [
            HostDynamicState(
                compromised=bool(rt.compromised[i]),
                reachable=bool(rt.reachable[i]),
                discovered=bool(rt.discovered[i]),
                access=AccessLevel(int(rt.access[i])),
            )
            for i in range(rt.n_hosts)
        ]


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


class Environment:
    """Seedable, replay-deterministic environment over generated scenarios.

    Each reset draws a fresh scenario from a stream derived from
    (seed, episode counter) and a separate stream for the episode's success
    draws, so a (config, seed, action sequence) triple fully determines
    every step result. Instances are single-threaded; run independent
    instances for parallelism.
    """

    def __init__(
        self,
        config: Optional[GenerationConfig] = None,
        *,
        backend: str = "auto",
        fully_observable: bool = False,
        force_success: bool = False,
        step_limit_override: Optional[int] = None,
    ):
        self.config = config if config is not None else GenerationConfig()
        self.layout = ObservationLayout.from_config(self.config)
        self._engine_module = get_backend(backend)
        self.backend = self._engine_module.BACKEND
        self.fully_observable = fully_observable
        self.force_success = force_success
        self.action_count = action_space_size(self.config)
        if step_limit_override is not None:
            self.step_limit = int(step_limit_override)
        elif self.config.step_limit == "auto":
            from .agents import calibrate_step_limit  # deferred: agents imports env

            self.step_limit = calibrate_step_limit(self.config, episodes=100)
        else:
            self.step_limit = int(self.config.step_limit)

        self.state: Optional[EnvState] = None
        self._engine = None
        self._base_seed = int(self.config.seed) & _SEED_MASK
        self._episode = -1
        self._done = True

    @property
    def observation_shape(self) -> tuple[int, int]:
        return self.layout.shape

    @property
    def scenario(self) -> Scenario:
        if self.state is None:
            raise RuntimeError("reset() has not been called")
        return self.state.scenario

    @property
    def host_count(self) -> int:
        if self.state is None:
            raise RuntimeError("reset() has not been called")
        return self.state.host_count

    def reset(self, seed: Optional[int] = None, *, scenario: Optional[Scenario] = None) -> np.ndarray:
        """Start a new episode; returns the initial observation.

        With an explicit seed the episode counter restarts at zero, so the
        same (config, seed) always reproduces the same scenario and success
        draws. Passing ``scenario`` skips generation (fixed-scenario mode);
        the success-draw stream is still fresh per episode.
        """
        if seed is not None:
            self._base_seed = int(seed) & _SEED_MASK
            self._episode = 0
        else:
            self._episode += 1

        scenario_rng = np.random.default_rng(
            np.random.SeedSequence([self._base_seed, self._episode, 0])
        )
        action_rng = np.random.default_rng(
            np.random.SeedSequence([self._base_seed, self._episode, 1])
        )
        if scenario is None:
            scenario = generate(self.config, scenario_rng)
        elif scenario.config != self.config:
            raise ValueError("scenario was generated from a different config")

        runtime = EpisodeRuntime(scenario, self.layout)
        self._engine = self._engine_module.Engine(runtime)
        for slot in range(runtime.n_hosts):
            if runtime.host_subnet[slot] == DMZ:
                runtime.discovered[slot] = 1
        self._engine.recompute_reachability()

        self.state = EnvState(scenario, self.layout, runtime, action_rng)
        self._done = False

        obs = np.zeros(self.layout.shape, dtype=np.float64)
        for slot in range(runtime.n_hosts):
            if not runtime.discovered[slot]:
                continue
            # The foothold knowledge: address, discovered, reachable, and
            # discovery value of the perimeter host(s); nothing else.
            obs[slot, runtime.host_subnet[slot]] = 1.0
            obs[slot, runtime.off_host + runtime.host_index[slot]] = 1.0
            obs[slot, runtime.off_disc] = 1.0
            obs[slot, runtime.off_reach] = float(runtime.reachable[slot])
            obs[slot, runtime.off_dval] = runtime.host_dvalue[slot]
        if self.fully_observable:
            return encode_state(self.state)
        return obs

    def step(self, action: int) -> StepResult:
        """Apply one catalogue action and advance the episode."""
        if self.state is None:
            raise RuntimeError("reset() has not been called")
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        action = int(action)
        if not 0 <= action < self.action_count:
            raise ValueError(f"action {action} outside [0, {self.action_count})")

        code, reward, newly, goal = self._engine.step(action, self.state.rng, self.force_success)
        obs = self._engine.obs_array.copy()
        self.state.step += 1
        outcome = OutcomeFlags.from_code(code)
        self.state.last_outcome = outcome

        terminated = bool(goal)
        truncated = not terminated and self.state.step >= self.step_limit
        self._done = terminated or truncated
        info = {"newly_discovered": newly, "action_index": action, "outcome": outcome}
        observation = encode_state(self.state) if self.fully_observable else obs
        return StepResult(observation, float(reward), terminated, truncated, info)


def reset(config: GenerationConfig, seed: int, **env_kwargs) -> tuple[EnvState, np.ndarray]:
    """Functional form of :meth:`Environment.reset` for one-off states."""
    env = Environment(config, **env_kwargs)
    obs = env.reset(seed=seed)
    assert env.state is not None
    return env.state, obs


def encode_state(state: EnvState) -> np.ndarray:
    """Ground-truth encoding, shape (host_count + 1, n).

    Used by tests and the fully observable debug mode; the final row carries
    the most recent outcome flags.
    """
    rt = state.runtime
    out = np.zeros((rt.n_hosts + 1, rt.n_cols), dtype=np.float64)
    for j in range(rt.n_hosts):
        row = out[j]
        row[rt.host_subnet[j]] = 1.0
        row[rt.off_host + rt.host_index[j]] = 1.0
        row[rt.off_comp] = float(rt.compromised[j])
        row[rt.off_reach] = float(rt.reachable[j])
        row[rt.off_disc] = float(rt.discovered[j])
        row[rt.off_sens] = float(rt.host_sensitive[j])
        row[rt.off_dval] = rt.host_dvalue[j]
        row[rt.off_access + int(rt.access[j])] = 1.0
        row[rt.off_os + int(rt.host_os[j])] = 1.0
        row[rt.off_svc : rt.off_svc + rt.host_services.shape[1]] = rt.host_services[j]
        row[rt.off_proc : rt.off_proc + rt.host_processes.shape[1]] = rt.host_processes[j]
    flags = state.last_outcome
    out[rt.n_hosts, 0] = float(flags.success)
    out[rt.n_hosts, 1] = float(flags.connection_error)
    out[rt.n_hosts, 2] = float(flags.permission_error)
    out[rt.n_hosts, 3] = float(flags.undefined_error)
    return out


def update_reachability(state: EnvState) -> EnvState:
    """Run reachability propagation to its fixpoint; never clears a host."""
    from . import _engine_py

    _engine_py.Engine(state.runtime).recompute_reachability()
    return state


def check_preconditions(state: EnvState, action: Union[int, ActionDef]) -> Optional[OutcomeFlags]:
    """Return the error flags ``action`` would produce, or None if it can run.

    Order of checks: connection (NoOp padding or unreachable target), then
    permission (required access), then undefined (exploit or escalation
    whose (os, service/process) pair the target does not run).
    """
    scenario = state.scenario
    if isinstance(action, int):
        if not 0 <= action < len(scenario.actions):
            raise ValueError(f"action {action} outside [0, {len(scenario.actions)})")
        action = scenario.actions[action]

    rt = state.runtime
    if action.kind is ActionKind.NOOP or action.target is None:
        return OutcomeFlags(connection_error=True)
    slot = scenario.slot_of_address(action.target)
    if not rt.reachable[slot]:
        return OutcomeFlags(connection_error=True)
    if int(rt.access[slot]) < int(action.required_access):
        return OutcomeFlags(permission_error=True)
    host = scenario.hosts[slot]
    if action.kind is ActionKind.EXPLOIT and not (host.os == action.os and host.services[action.service]):
        return OutcomeFlags(undefined_error=True)
    if action.kind is ActionKind.PRIVESC and not (host.os == action.os and host.processes[action.process]):
        return OutcomeFlags(undefined_error=True)
    return None


def reward_of(
    outcome: OutcomeFlags,
    action: ActionDef,
    newly_discovered: int = 0,
    first_success: bool = False,
    target_value: float = 0.0,
    discovery_value: float = 0.0,
) -> float:
    """Per-step reward.

    Every action pays its cost. A successful subnet scan additionally earns
    the discovery value once per newly discovered host; the first successful
    privilege escalation on a host earns that host's value. Everything else,
    including successful exploits and scans, earns nothing on top.
    """
    reward = -action.cost
    if not outcome.success:
        return reward
    if action.kind is ActionKind.SUBNET_SCAN:
        return reward + discovery_value * newly_discovered
    if action.kind is ActionKind.PRIVESC and first_success:
        return reward + target_value
    return reward
