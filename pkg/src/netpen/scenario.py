"""Procedural generation of penetration-testing scenarios.

A scenario is one concrete network: a subnet tree, per-direction firewall
rules, host attribute assignments, and the fixed per-episode action
catalogue. Generation is a pure function of (config, RNG stream): the same
seed produces a byte-identical scenario, which is what makes episodes
replayable.

Subnet ids are fixed: 0 is the internet (attacker foothold, contributes no
host rows), 1 the DMZ, 2 the sensitive zone, and 3.. are user subnets
arranged as a binary tree under the first user subnet.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from enum import IntEnum
from typing import Iterator, Optional, Sequence

import numpy as np

INTERNET = 0
DMZ = 1
SENSITIVE = 2
FIRST_USER = 3

#: (subnet_id, host_index) pair identifying a host.
Address = tuple[int, int]


class AccessLevel(IntEnum):
    """Privilege held on a host; totally ordered."""

    NONE = 0
    USER = 1
    ROOT = 2


class ActionKind(IntEnum):
    """Action types. Values 0..3 match the per-host scan-block order."""

    SERVICE_SCAN = 0
    OS_SCAN = 1
    SUBNET_SCAN = 2
    PROCESS_SCAN = 3
    EXPLOIT = 4
    PRIVESC = 5
    NOOP = 6

    @property
    def wire_name(self) -> str:
        return self.name.lower()


SCAN_KINDS = (
    ActionKind.SERVICE_SCAN,
    ActionKind.OS_SCAN,
    ActionKind.SUBNET_SCAN,
    ActionKind.PROCESS_SCAN,
)

# Access required to run each scan kind.
_SCAN_REQUIRED = {
    ActionKind.SERVICE_SCAN: AccessLevel.NONE,
    ActionKind.OS_SCAN: AccessLevel.NONE,
    ActionKind.SUBNET_SCAN: AccessLevel.ROOT,
    ActionKind.PROCESS_SCAN: AccessLevel.USER,
}


class ConfigError(ValueError):
    """Raised for invalid generation parameters."""


@dataclass(frozen=True)
class GenerationConfig:
    """All tunable environment parameters.

    Defaults correspond to the standard benchmark setting: 5-8 hosts, two
    candidate operating systems, services and processes, one service and
    one process per host, and two sensitive target hosts.
    """

    min_hosts: int = 5
    max_hosts: int = 8
    num_os: int = 2
    num_services: int = 2
    num_processes: int = 2
    num_sensitive: int = 2
    services_per_host: int = 1
    processes_per_host: int = 1
    exploit_cost: float = 3.0
    privesc_cost: float = 3.0
    scan_cost: float = 1.0
    exploit_prob: float = 0.9
    privesc_prob: float = 0.9
    host_value: float = 5.0
    sensitive_value: float = 100.0
    discovery_value: float = 0.0
    step_limit: int | str = 5000  # positive int, or "auto" to calibrate
    hosts_per_user_subnet_max: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.min_hosts <= self.max_hosts:
            raise ConfigError("need 1 <= min_hosts <= max_hosts")
        if not 1 <= self.num_sensitive <= self.min_hosts:
            raise ConfigError("need 1 <= num_sensitive <= min_hosts")
        for name in ("num_os", "num_services", "num_processes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        self._check_subset("services_per_host", self.num_services)
        self._check_subset("processes_per_host", self.num_processes)
        for name in ("exploit_cost", "privesc_cost", "scan_cost"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("exploit_prob", "privesc_prob"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in (0, 1]")
        if self.hosts_per_user_subnet_max < 1:
            raise ConfigError("hosts_per_user_subnet_max must be >= 1")
        if _per40(self.max_hosts) > self.hosts_per_user_subnet_max:
            raise ConfigError("DMZ/sensitive allocation exceeds per-subnet host encoding")
        if isinstance(self.step_limit, str):
            if self.step_limit != "auto":
                raise ConfigError('step_limit must be a positive int or "auto"')
        elif self.step_limit < 1:
            raise ConfigError("step_limit must be >= 1")

    def _check_subset(self, name: str, total: int) -> None:
        # Hosts run a strict subset of the available services/processes so
        # that scanning carries information; with only one available the
        # subset rule degenerates to "run it".
        value = getattr(self, name)
        if total > 1:
            if not 1 <= value < total:
                raise ConfigError(f"need 1 <= {name} < available count")
        elif value != 1:
            raise ConfigError(f"{name} must be 1 when only one is available")

    def with_overrides(self, **overrides) -> "GenerationConfig":
        return replace(self, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(**data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]


def _per40(host_count: int) -> int:
    """DMZ/sensitive allocation: one host each per 40 hosts in the network."""
    return math.ceil(host_count / 40)


@dataclass(frozen=True)
class SubnetLayout:
    """Subnet sizes (indexed by subnet id) and the tree adjacency over them."""

    subnet_sizes: tuple[int, ...]
    adjacency: frozenset[tuple[int, int]]

    @property
    def num_subnets(self) -> int:
        return len(self.subnet_sizes)

    def neighbors(self, subnet: int) -> list[int]:
        out = []
        for a, b in self.adjacency:
            if a == subnet:
                out.append(b)
            elif b == subnet:
                out.append(a)
        return sorted(out)

    def addresses(self) -> Iterator[Address]:
        """Host addresses in canonical order (ascending subnet, then index)."""
        for subnet, size in enumerate(self.subnet_sizes):
            for idx in range(size):
                yield (subnet, idx)


def subnet_layout(host_count: int, config: GenerationConfig) -> SubnetLayout:
    """Allocate ``host_count`` hosts to subnets and wire up the tree.

    One host per 40 goes to the DMZ and one to the sensitive zone; the rest
    fill user subnets greedily up to ``hosts_per_user_subnet_max``. The tree
    spine is internet-DMZ-user0 with the sensitive subnet hanging off user0
    and further user subnets attached breadth-first under user0.
    """
    if not config.min_hosts <= host_count <= config.max_hosts:
        raise ValueError(f"host_count {host_count} outside [{config.min_hosts}, {config.max_hosts}]")
    alloc = _per40(host_count)
    dmz = min(alloc, host_count)
    sens = min(alloc, host_count - dmz)
    remainder = host_count - dmz - sens
    cap = config.hosts_per_user_subnet_max
    user_sizes = []
    while remainder > 0:
        take = min(cap, remainder)
        user_sizes.append(take)
        remainder -= take

    sizes = [0, dmz]
    if sens:
        sizes.append(sens)
    sizes.extend(user_sizes)

    edges = {(INTERNET, DMZ)}
    if user_sizes:
        edges.add((DMZ, FIRST_USER))
        if sens:
            edges.add((SENSITIVE, FIRST_USER))
        # Binary tree over user subnets, breadth-first under user0.
        for j in range(1, len(user_sizes)):
            parent = FIRST_USER + (j - 1) // 2
            edges.add((parent, FIRST_USER + j))
    elif sens:
        edges.add((DMZ, SENSITIVE))
    return SubnetLayout(tuple(sizes), frozenset(edges))


def max_subnet_count(config: GenerationConfig) -> int:
    """Number of subnets in the largest network this config can generate."""
    return subnet_layout(config.max_hosts, config).num_subnets


@dataclass(frozen=True)
class HostConfig:
    """Static attributes of one host."""

    address: Address
    os: int
    services: tuple[int, ...]  # 0/1 flags, length num_services
    processes: tuple[int, ...]  # 0/1 flags, length num_processes
    sensitive: bool
    value: float
    discovery_value: float

    def runs_service(self, service: int) -> bool:
        return bool(self.services[service])

    def runs_process(self, process: int) -> bool:
        return bool(self.processes[process])


@dataclass(frozen=True)
class FirewallRule:
    """Services allowed through one direction of a subnet adjacency."""

    from_subnet: int
    to_subnet: int
    allowed_services: frozenset[int]


@dataclass(frozen=True)
class ActionDef:
    """One entry of the action catalogue.

    ``target`` is absent for NoOp padding entries. Exploits carry the
    (os, service) pair they match, privilege escalations the (os, process)
    pair; scans carry neither.
    """

    kind: ActionKind
    target: Optional[Address]
    cost: float
    prob: float
    required_access: AccessLevel
    granted_access: Optional[AccessLevel]
    os: Optional[int] = None
    service: Optional[int] = None
    process: Optional[int] = None


def per_host_action_count(config: GenerationConfig) -> int:
    """Catalogue entries per host slot: 4 scans plus one exploit per
    (os, service) pair and one privilege escalation per (os, process) pair."""
    return 4 + config.num_os * (config.num_services + config.num_processes)


def action_templates(config: GenerationConfig) -> list[ActionDef]:
    """The per-host action block with no target bound yet.

    Canonical order: ServiceScan, OSScan, SubnetScan, ProcessScan, then
    exploits in (os, service) lexicographic order, then privilege
    escalations in (os, process) lexicographic order.
    """
    block = [
        ActionDef(kind, None, config.scan_cost, 1.0, _SCAN_REQUIRED[kind], None)
        for kind in SCAN_KINDS
    ]
    for os_id in range(config.num_os):
        for svc in range(config.num_services):
            block.append(
                ActionDef(
                    ActionKind.EXPLOIT,
                    None,
                    config.exploit_cost,
                    config.exploit_prob,
                    AccessLevel.NONE,
                    AccessLevel.USER,
                    os=os_id,
                    service=svc,
                )
            )
    for os_id in range(config.num_os):
        for proc in range(config.num_processes):
            block.append(
                ActionDef(
                    ActionKind.PRIVESC,
                    None,
                    config.privesc_cost,
                    config.privesc_prob,
                    AccessLevel.USER,
                    AccessLevel.ROOT,
                    os=os_id,
                    process=proc,
                )
            )
    return block


# NoOp padding entries cost as much as a scan: "do nothing" still burns a
# step, and a zero cost would let policies stall for free.
def _noop(config: GenerationConfig) -> ActionDef:
    return ActionDef(ActionKind.NOOP, None, config.scan_cost, 1.0, AccessLevel.NONE, None)


def build_action_catalogue(config: GenerationConfig, hosts: Sequence[HostConfig]) -> list[ActionDef]:
    """Fixed-size catalogue: one block per host slot, host-major.

    Slots beyond the real host count are padded with NoOp entries so that
    the action space has the same size for every generated network.
    """
    templates = action_templates(config)
    noop = _noop(config)
    catalogue: list[ActionDef] = []
    for slot in range(config.max_hosts):
        if slot < len(hosts):
            target = hosts[slot].address
            catalogue.extend(replace(t, target=target) for t in templates)
        else:
            catalogue.extend([noop] * len(templates))
    return catalogue


def action_space_size(config: GenerationConfig) -> int:
    return config.max_hosts * per_host_action_count(config)


class ActionIndexer:
    """Maps (host slot, action role) to catalogue indices and back."""

    def __init__(self, config: GenerationConfig):
        self.config = config
        self.per_host = per_host_action_count(config)
        self.total = action_space_size(config)
        self._exploit_base = 4
        self._privesc_base = 4 + config.num_os * config.num_services

    def service_scan(self, slot: int) -> int:
        return slot * self.per_host + ActionKind.SERVICE_SCAN

    def os_scan(self, slot: int) -> int:
        return slot * self.per_host + ActionKind.OS_SCAN

    def subnet_scan(self, slot: int) -> int:
        return slot * self.per_host + ActionKind.SUBNET_SCAN

    def process_scan(self, slot: int) -> int:
        return slot * self.per_host + ActionKind.PROCESS_SCAN

    def exploit(self, slot: int, os_id: int, service: int) -> int:
        return slot * self.per_host + self._exploit_base + os_id * self.config.num_services + service

    def privesc(self, slot: int, os_id: int, process: int) -> int:
        return slot * self.per_host + self._privesc_base + os_id * self.config.num_processes + process

    def exploit_offsets(self) -> range:
        return range(self._exploit_base, self._privesc_base)

    def privesc_offsets(self) -> range:
        return range(self._privesc_base, self.per_host)

    def slot_of(self, index: int) -> int:
        return index // self.per_host

    def offset_of(self, index: int) -> int:
        return index % self.per_host


@dataclass(frozen=True)
class Scenario:
    """One fully generated network plus its action catalogue."""

    config: GenerationConfig
    layout: SubnetLayout
    firewall: tuple[FirewallRule, ...]
    hosts: tuple[HostConfig, ...]
    actions: tuple[ActionDef, ...]
    sensitive_addresses: tuple[Address, ...]

    @property
    def host_count(self) -> int:
        return len(self.hosts)

    def slot_of_address(self, address: Address) -> int:
        for i, host in enumerate(self.hosts):
            if host.address == address:
                return i
        raise KeyError(address)

    def firewall_rule(self, from_subnet: int, to_subnet: int) -> Optional[FirewallRule]:
        for rule in self.firewall:
            if rule.from_subnet == from_subnet and rule.to_subnet == to_subnet:
                return rule
        return None

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "config": self.config.to_dict(),
            "layout": {
                "subnet_sizes": list(self.layout.subnet_sizes),
                "adjacency": sorted([list(e) for e in self.layout.adjacency]),
            },
            "firewall": [
                {
                    "from_subnet": r.from_subnet,
                    "to_subnet": r.to_subnet,
                    "allowed_services": sorted(r.allowed_services),
                }
                for r in sorted(self.firewall, key=lambda r: (r.from_subnet, r.to_subnet))
            ],
            "hosts": [
                {
                    "address": list(h.address),
                    "os": h.os,
                    "services": list(h.services),
                    "processes": list(h.processes),
                    "sensitive": h.sensitive,
                    "value": h.value,
                    "discovery_value": h.discovery_value,
                }
                for h in self.hosts
            ],
            "actions": [_action_to_dict(a) for a in self.actions],
            "sensitive_addresses": [list(a) for a in self.sensitive_addresses],
        }

    def to_json(self) -> str:
        """Canonical serialization: byte-equality expresses scenario equality."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        config = GenerationConfig.from_dict(data["config"])
        layout = SubnetLayout(
            tuple(data["layout"]["subnet_sizes"]),
            frozenset(tuple(e) for e in data["layout"]["adjacency"]),
        )
        firewall = tuple(
            FirewallRule(r["from_subnet"], r["to_subnet"], frozenset(r["allowed_services"]))
            for r in data["firewall"]
        )
        hosts = tuple(
            HostConfig(
                tuple(h["address"]),
                h["os"],
                tuple(h["services"]),
                tuple(h["processes"]),
                h["sensitive"],
                h["value"],
                h["discovery_value"],
            )
            for h in data["hosts"]
        )
        actions = tuple(_action_from_dict(a) for a in data["actions"])
        sensitive = tuple(tuple(a) for a in data["sensitive_addresses"])
        return cls(config, layout, firewall, hosts, actions, sensitive)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def _action_to_dict(a: ActionDef) -> dict:
    return {
        "kind": a.kind.wire_name,
        "target": list(a.target) if a.target is not None else None,
        "cost": a.cost,
        "prob": a.prob,
        "required_access": int(a.required_access),
        "granted_access": int(a.granted_access) if a.granted_access is not None else None,
        "os": a.os,
        "service": a.service,
        "process": a.process,
    }


def _action_from_dict(d: dict) -> ActionDef:
    return ActionDef(
        ActionKind[d["kind"].upper()],
        tuple(d["target"]) if d["target"] is not None else None,
        d["cost"],
        d["prob"],
        AccessLevel(d["required_access"]),
        AccessLevel(d["granted_access"]) if d["granted_access"] is not None else None,
        d["os"],
        d["service"],
        d["process"],
    )


def _pick_flags(rng: np.random.Generator, total: int, count: int) -> tuple[int, ...]:
    """0/1 flag vector with exactly ``count`` of ``total`` positions set."""
    chosen = rng.choice(total, size=count, replace=False)
    flags = [0] * total
    for c in chosen:
        flags[int(c)] = 1
    return tuple(flags)


def generate(
    config: GenerationConfig,
    rng: np.random.Generator,
    host_count: Optional[int] = None,
) -> Scenario:
    """Generate one scenario.

    The draw order is fixed (host count, per-host attributes in canonical
    order, firewall sets per directed edge) so the result is a pure function
    of the RNG stream. Passing ``host_count`` skips the host-count draw,
    which is how fixed-size scenario sets are produced.

    The generator guarantees an attack path to every sensitive host: the
    catalogue carries an exploit for every (os, service) pair and an
    escalation for every (os, process) pair, so every host is exploitable
    once reachable; firewall rules are repaired so that each direction of
    every subnet adjacency passes at least one service run on the far side.
    """
    if host_count is None:
        host_count = int(rng.integers(config.min_hosts, config.max_hosts + 1))
    layout = subnet_layout(host_count, config)

    addresses = list(layout.addresses())
    host_os = [int(rng.integers(config.num_os)) for _ in addresses]
    host_services = [_pick_flags(rng, config.num_services, config.services_per_host) for _ in addresses]
    host_processes = [_pick_flags(rng, config.num_processes, config.processes_per_host) for _ in addresses]

    # Sensitive targets: the sensitive-zone hosts first, then the DMZ, then
    # user hosts in canonical order. With the default allocation of one host
    # per zone and two targets this is exactly {sensitive host, DMZ host}.
    order = sorted(range(len(addresses)), key=lambda i: (addresses[i][0] != SENSITIVE, addresses[i][0] != DMZ, addresses[i]))
    sensitive_idx = set(order[: config.num_sensitive])
    sensitive_addresses = tuple(addresses[i] for i in sorted(sensitive_idx))

    hosts = tuple(
        HostConfig(
            address=addresses[i],
            os=host_os[i],
            services=host_services[i],
            processes=host_processes[i],
            sensitive=i in sensitive_idx,
            value=config.sensitive_value if i in sensitive_idx else config.host_value,
            discovery_value=config.discovery_value,
        )
        for i in range(len(addresses))
    )

    # Firewalls: random allowed-set per direction, then repair so that every
    # direction whose far side has hosts passes >= 1 service run there.
    hosts_by_subnet: dict[int, list[HostConfig]] = {}
    for h in hosts:
        hosts_by_subnet.setdefault(h.address[0], []).append(h)
    rules = []
    for a, b in sorted(layout.adjacency):
        for frm, to in ((a, b), (b, a)):
            allowed = {s for s in range(config.num_services) if rng.random() < 0.5}
            far = hosts_by_subnet.get(to, [])
            far_services = {s for h in far for s in range(config.num_services) if h.services[s]}
            if far_services and not (allowed & far_services):
                first = far[0]
                allowed.add(min(s for s in range(config.num_services) if first.services[s]))
            rules.append(FirewallRule(frm, to, frozenset(allowed)))
    rules.sort(key=lambda r: (r.from_subnet, r.to_subnet))

    actions = tuple(build_action_catalogue(config, hosts))
    return Scenario(config, layout, tuple(rules), hosts, actions, sensitive_addresses)
