"""Scripted reference policies and episode drivers.

Three strategy classes serve as baselines and test oracles: a uniform
random policy, a brute-force policy that tries every exploit and then every
escalation against each known host without ever scanning, and an oracle
policy that scans first and fires only matching exploits. All of them act
purely on information carried by received observations; none reads the
ground-truth state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .env import Environment, ObservationLayout, StepResult
from .scenario import (
    AccessLevel,
    ActionIndexer,
    ActionKind,
    Address,
    GenerationConfig,
    action_space_size,
)

_SEED_MASK = (1 << 64) - 1


@dataclass
class TrajectoryStep:
    t: int
    action_index: int
    kind: str
    target: Optional[Address]
    success: bool
    error: Optional[str]
    reward: float
    newly_discovered: int


@dataclass
class Trajectory:
    """Full record of one episode, sufficient to recompute any statistic."""

    seed: Optional[int]
    host_count: int
    config_hash: str
    terminal: str  # "terminated" or "truncated"
    steps: list[TrajectoryStep] = field(default_factory=list)
    policy: str = ""

    @property
    def episode_return(self) -> float:
        return sum(s.reward for s in self.steps)

    @property
    def length(self) -> int:
        return len(self.steps)


class AgentMemory:
    """Per-host knowledge accumulated from observations only.

    Unset fields are None; access levels default to no-access until an
    observation says otherwise. ``discovery_order`` records the order in
    which host rows first became known.
    """

    def __init__(self, config: GenerationConfig):
        self.config = config
        self.layout = ObservationLayout.from_config(config)
        m = config.max_hosts
        self.known: list[bool] = [False] * m
        self.subnet: list[Optional[int]] = [None] * m
        self.reachable: list[bool] = [False] * m
        self.compromised: list[bool] = [False] * m
        self.sensitive: list[Optional[bool]] = [None] * m
        self.os: list[Optional[int]] = [None] * m
        self.services: list[Optional[tuple[int, ...]]] = [None] * m
        self.processes: list[Optional[tuple[int, ...]]] = [None] * m
        self.access: list[int] = [AccessLevel.NONE] * m
        self.discovery_order: list[int] = []

    def flags_of(self, obs: np.ndarray) -> tuple[bool, Optional[str]]:
        row = obs[self.layout.max_hosts]
        success = bool(row[0])
        error = None
        if row[1]:
            error = "connection"
        elif row[2]:
            error = "permission"
        elif row[3]:
            error = "undefined"
        return success, error

    def _note_host(self, slot: int, decoded: dict) -> None:
        if not self.known[slot]:
            self.known[slot] = True
            self.discovery_order.append(slot)
        if decoded["subnet"] is not None:
            self.subnet[slot] = decoded["subnet"]

    def observe_reset(self, obs: np.ndarray) -> None:
        self.__init__(self.config)
        for slot in range(self.layout.max_hosts):
            row = obs[slot]
            if not row.any():
                continue
            decoded = self.layout.decode_host_row(row)
            self._note_host(slot, decoded)
            self.reachable[slot] = decoded["reachable"]

    def observe_step(self, action_kind: ActionKind, slot: int, obs: np.ndarray) -> None:
        """Fold one step observation in, interpreting rows by the action
        that produced them."""
        success, _ = self.flags_of(obs)
        if not success:
            return
        layout = self.layout
        if action_kind is ActionKind.OS_SCAN:
            decoded = layout.decode_host_row(obs[slot])
            self._note_host(slot, decoded)
            self.os[slot] = decoded["os"]
        elif action_kind is ActionKind.SERVICE_SCAN:
            decoded = layout.decode_host_row(obs[slot])
            self._note_host(slot, decoded)
            self.services[slot] = decoded["services"]
        elif action_kind is ActionKind.PROCESS_SCAN:
            decoded = layout.decode_host_row(obs[slot])
            self._note_host(slot, decoded)
            self.processes[slot] = decoded["processes"]
        elif action_kind is ActionKind.SUBNET_SCAN:
            for other in range(layout.max_hosts):
                row = obs[other]
                if not row.any():
                    continue
                decoded = layout.decode_host_row(row)
                self._note_host(other, decoded)
                self.reachable[other] = self.reachable[other] or decoded["reachable"]
                self.sensitive[other] = decoded["sensitive"]
        elif action_kind in (ActionKind.EXPLOIT, ActionKind.PRIVESC):
            decoded = layout.decode_host_row(obs[slot])
            self._note_host(slot, decoded)
            self.compromised[slot] = decoded["compromised"]
            self.reachable[slot] = self.reachable[slot] or decoded["reachable"]
            self.sensitive[slot] = decoded["sensitive"]
            if decoded["access"] is not None:
                self.access[slot] = decoded["access"]

    def believed_reachable(self, slot: int) -> bool:
        """Observed reachability, or inferred from a same-subnet compromise."""
        if self.reachable[slot]:
            return True
        subnet = self.subnet[slot]
        if subnet is None:
            return False
        return any(
            self.compromised[other] and self.subnet[other] == subnet
            for other in range(len(self.known))
            if self.known[other]
        )


def random_policy(rng: np.random.Generator, action_count: int) -> int:
    """Uniform over the whole catalogue, NoOp padding included."""
    return int(rng.integers(action_count))


class RandomPolicy:
    name = "random"

    def __init__(self, config: GenerationConfig, rng: Optional[np.random.Generator] = None):
        self.action_count = action_space_size(config)
        self.rng = rng if rng is not None else np.random.default_rng()

    def begin_episode(self, obs: np.ndarray) -> None:
        pass

    def act(self) -> int:
        return random_policy(self.rng, self.action_count)

    def observe(self, action_index: int, result: StepResult) -> None:
        pass


class BruteForcePolicy:
    """No scanning except the post-root subnet scan.

    Works through known hosts (sensitive-first once sensitivity is known,
    discovery order otherwise): cycles exploits in catalogue order until
    user access is observed, then cycles escalations until root, then scans
    the subnet once and moves on. Hosts answering with connection errors are
    benched until every other candidate has had a turn.
    """

    name = "brute-force"

    def __init__(self, config: GenerationConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.indexer = ActionIndexer(config)
        self.memory = AgentMemory(config)
        self.exploit_offsets = list(self.indexer.exploit_offsets())
        self.privesc_offsets = list(self.indexer.privesc_offsets())
        self._scanned: set[int] = set()
        self._exploit_cursor: dict[int, int] = {}
        self._privesc_cursor: dict[int, int] = {}
        self._benched: set[int] = set()

    def begin_episode(self, obs: np.ndarray) -> None:
        self.memory.observe_reset(obs)
        self._scanned.clear()
        self._exploit_cursor.clear()
        self._privesc_cursor.clear()
        self._benched.clear()

    def _finished(self, slot: int) -> bool:
        return self.memory.access[slot] >= AccessLevel.ROOT and slot in self._scanned

    def _candidates(self) -> list[int]:
        mem = self.memory
        order = [s for s in mem.discovery_order if not self._finished(s)]
        order.sort(key=lambda s: (mem.sensitive[s] is not True, mem.discovery_order.index(s)))
        return order

    def _pick_target(self) -> Optional[int]:
        candidates = self._candidates()
        if not candidates:
            return None
        open_slots = [s for s in candidates if s not in self._benched]
        if not open_slots:  # everything benched: give them all another turn
            self._benched.clear()
            open_slots = candidates
        return open_slots[0]

    def act(self) -> int:
        slot = self._pick_target()
        if slot is None:
            return 0
        mem = self.memory
        per_host = self.indexer.per_host
        if mem.access[slot] < AccessLevel.USER:
            cursor = self._exploit_cursor.get(slot, 0)
            return slot * per_host + self.exploit_offsets[cursor % len(self.exploit_offsets)]
        if mem.access[slot] < AccessLevel.ROOT:
            cursor = self._privesc_cursor.get(slot, 0)
            return slot * per_host + self.privesc_offsets[cursor % len(self.privesc_offsets)]
        return self.indexer.subnet_scan(slot)

    def observe(self, action_index: int, result: StepResult) -> None:
        obs = result.observation
        slot = self.indexer.slot_of(action_index)
        offset = self.indexer.offset_of(action_index)
        success, error = self.memory.flags_of(obs)
        if offset in self.exploit_offsets:
            kind = ActionKind.EXPLOIT
        elif offset in self.privesc_offsets:
            kind = ActionKind.PRIVESC
        else:
            kind = ActionKind(offset)
        self.memory.observe_step(kind, slot, obs)
        if error == "connection":
            self._benched.add(slot)
            return
        self._benched.discard(slot)
        if kind is ActionKind.EXPLOIT and not success:
            self._exploit_cursor[slot] = self._exploit_cursor.get(slot, 0) + 1
        elif kind is ActionKind.PRIVESC and not success:
            self._privesc_cursor[slot] = self._privesc_cursor.get(slot, 0) + 1
        elif kind is ActionKind.SUBNET_SCAN and success:
            self._scanned.add(slot)


class OraclePolicy:
    """Scan-first strategy with no redundant actions.

    Per host: OS scan, service scan, the one matching exploit; once user
    access is held and root is actually needed (sensitive target, or the
    host's subnet frontier is unexplored): process scan, the matching
    escalation. Rooted hosts scan their subnet once. Known sensitive hosts
    are always served first.
    """

    name = "oracle"

    def __init__(self, config: GenerationConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.indexer = ActionIndexer(config)
        self.memory = AgentMemory(config)
        self._scanned_subnets: set[int] = set()

    def begin_episode(self, obs: np.ndarray) -> None:
        self.memory.observe_reset(obs)
        self._scanned_subnets.clear()

    def _next_for(self, slot: int) -> Optional[int]:
        mem = self.memory
        if mem.access[slot] >= AccessLevel.ROOT:
            return None
        if mem.access[slot] < AccessLevel.USER:
            if mem.os[slot] is None:
                return self.indexer.os_scan(slot)
            if mem.services[slot] is None:
                return self.indexer.service_scan(slot)
            running = [svc for svc, flag in enumerate(mem.services[slot]) if flag]
            if not running:
                return None  # nothing exploitable on this host
            return self.indexer.exploit(slot, mem.os[slot], running[0])
        # user access held: escalate only when root buys something
        needs_root = mem.sensitive[slot] is True or mem.subnet[slot] not in self._scanned_subnets
        if not needs_root:
            return None
        if mem.processes[slot] is None:
            return self.indexer.process_scan(slot)
        running = [proc for proc, flag in enumerate(mem.processes[slot]) if flag]
        if not running or mem.os[slot] is None:
            return None
        return self.indexer.privesc(slot, mem.os[slot], running[0])

    def act(self) -> int:
        mem = self.memory
        known = [s for s in range(len(mem.known)) if mem.known[s]]
        # Known sensitive targets first.
        for slot in known:
            if mem.sensitive[slot] is True and mem.believed_reachable(slot):
                action = self._next_for(slot)
                if action is not None:
                    return action
        # Expand the frontier from rooted hosts whose subnet is unscanned.
        for slot in known:
            if mem.access[slot] >= AccessLevel.ROOT and mem.subnet[slot] not in self._scanned_subnets:
                return self.indexer.subnet_scan(slot)
        # Otherwise work the lowest reachable host that still has a step.
        for slot in known:
            if mem.believed_reachable(slot):
                action = self._next_for(slot)
                if action is not None:
                    return action
        # Nothing useful left that we know of; rescan from a rooted host.
        for slot in known:
            if mem.access[slot] >= AccessLevel.ROOT:
                return self.indexer.subnet_scan(slot)
        return 0

    def observe(self, action_index: int, result: StepResult) -> None:
        obs = result.observation
        slot = self.indexer.slot_of(action_index)
        offset = self.indexer.offset_of(action_index)
        success, error = self.memory.flags_of(obs)
        if offset in self.indexer.exploit_offsets():
            kind = ActionKind.EXPLOIT
        elif offset in self.indexer.privesc_offsets():
            kind = ActionKind.PRIVESC
        else:
            kind = ActionKind(offset)
        self.memory.observe_step(kind, slot, obs)
        if kind is ActionKind.SUBNET_SCAN and success:
            subnet = self.memory.subnet[slot]
            if subnet is not None:
                self._scanned_subnets.add(subnet)
        elif error == "connection":
            self.memory.reachable[slot] = False
        elif error == "undefined" and kind is ActionKind.EXPLOIT:
            # Stale knowledge; rescan this host from scratch.
            self.memory.os[slot] = None
            self.memory.services[slot] = None
        elif error == "undefined" and kind is ActionKind.PRIVESC:
            self.memory.processes[slot] = None


POLICIES = {
    "random": RandomPolicy,
    "brute-force": BruteForcePolicy,
    "oracle": OraclePolicy,
}


def make_policy(name: str, config: GenerationConfig, rng: Optional[np.random.Generator] = None):
    key = name.replace("_", "-").lower()
    if key not in POLICIES:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}")
    return POLICIES[key](config, rng=rng)


def run_episode(env, policy, seed: Optional[int] = None) -> Trajectory:
    """Drive one episode to termination or truncation and record it."""
    obs = env.reset(seed=seed)
    policy.begin_episode(obs)
    steps: list[TrajectoryStep] = []
    t = 0
    terminal = "truncated"
    while True:
        action = policy.act()
        result = env.step(action)
        policy.observe(action, result)
        action_def = env.scenario.actions[action]
        outcome = result.info["outcome"]
        steps.append(
            TrajectoryStep(
                t=t,
                action_index=action,
                kind=action_def.kind.wire_name,
                target=action_def.target,
                success=outcome.success,
                error=outcome.error,
                reward=result.reward,
                newly_discovered=result.info["newly_discovered"],
            )
        )
        t += 1
        if result.terminated:
            terminal = "terminated"
            break
        if result.truncated:
            break
    return Trajectory(
        seed=seed,
        host_count=env.host_count,
        config_hash=env.config.config_hash(),
        terminal=terminal,
        steps=steps,
        policy=getattr(policy, "name", type(policy).__name__),
    )


def round_step_limit(mean_length: float) -> int:
    """Ten times the mean episode length, rounded up to the next 1000."""
    return int(math.ceil(10.0 * mean_length / 1000.0) * 1000)


def calibrate_step_limit(
    config: GenerationConfig,
    episodes: int,
    *,
    seed: Optional[int] = None,
    cap: int = 1_000_000,
    backend: str = "auto",
) -> int:
    """Estimate a step limit from random-agent episode lengths.

    Runs the random policy with the configured limit replaced by a large
    cap, then applies :func:`round_step_limit` to the mean episode length.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    base = int(seed if seed is not None else config.seed) & _SEED_MASK
    env = Environment(config, step_limit_override=cap, backend=backend)
    policy_rng = np.random.default_rng(np.random.SeedSequence([base, 0xCA11B]))
    action_count = env.action_count
    total = 0
    for i in range(episodes):
        env.reset(seed=base if i == 0 else None)
        while True:
            result = env.step(int(policy_rng.integers(action_count)))
            if result.terminated or result.truncated:
                break
        total += env.state.step
    return round_step_limit(total / episodes)
