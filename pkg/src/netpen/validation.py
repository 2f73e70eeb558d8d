"""Scenario validation.

Checks structural invariants plus the generator's three attack-path
guarantees, and produces a witness action sequence proving that, with every
stochastic action succeeding, root access on all sensitive hosts is
reachable from the initial foothold. Violations are data, not exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .scenario import (
    DMZ,
    INTERNET,
    ActionKind,
    Scenario,
    action_templates,
    per_host_action_count,
    subnet_layout,
)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    #: Catalogue indices that, replayed with success forced, reach the goal.
    witness: Optional[list[int]] = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str) -> None:
        self.violations.append(Violation(code, message))

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [{"code": v.code, "message": v.message} for v in self.violations],
            "witness": self.witness,
        }


def _matching_exploit(s: Scenario, slot: int) -> Optional[int]:
    host = s.hosts[slot]
    for i, a in enumerate(s.actions):
        if (
            a.kind is ActionKind.EXPLOIT
            and a.target == host.address
            and a.os == host.os
            and host.services[a.service]
        ):
            return i
    return None


def _matching_privesc(s: Scenario, slot: int) -> Optional[int]:
    host = s.hosts[slot]
    for i, a in enumerate(s.actions):
        if (
            a.kind is ActionKind.PRIVESC
            and a.target == host.address
            and a.os == host.os
            and host.processes[a.process]
        ):
            return i
    return None


def _check_structure(s: Scenario, report: ValidationReport) -> None:
    config = s.config
    if not config.min_hosts <= s.host_count <= config.max_hosts:
        report.add("host-count-range", f"host count {s.host_count} outside configured range")

    try:
        expected_layout = subnet_layout(s.host_count, config)
        if expected_layout != s.layout:
            report.add("layout", "subnet sizes/adjacency differ from the allocation rule")
    except ValueError:
        report.add("layout", "layout not derivable for this host count")

    if s.layout.subnet_sizes and s.layout.subnet_sizes[INTERNET] != 0:
        report.add("internet-hosts", "internet subnet must not contain hosts")

    # Tree shape: connected with |edges| == |subnets| - 1.
    n = s.layout.num_subnets
    if len(s.layout.adjacency) != n - 1:
        report.add("adjacency-tree", "adjacency edge count is not |subnets| - 1")
    else:
        seen = {0}
        frontier = [0]
        while frontier:
            cur = frontier.pop()
            for nb in s.layout.neighbors(cur):
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        if len(seen) != n:
            report.add("adjacency-tree", "adjacency is not connected")

    if list(a.address for a in s.hosts) != sorted(h.address for h in s.hosts):
        report.add("host-order", "hosts are not in canonical (subnet, index) order")

    for h in s.hosts:
        if sum(h.services) != config.services_per_host:
            report.add("service-count", f"host {h.address} runs {sum(h.services)} services")
        if sum(h.processes) != config.processes_per_host:
            report.add("process-count", f"host {h.address} runs {sum(h.processes)} processes")
        expected_value = config.sensitive_value if h.sensitive else config.host_value
        if h.value != expected_value:
            report.add("host-value", f"host {h.address} value {h.value} != {expected_value}")

    sensitive = [h.address for h in s.hosts if h.sensitive]
    if len(sensitive) != config.num_sensitive:
        report.add("sensitive-count", f"{len(sensitive)} sensitive hosts, expected {config.num_sensitive}")
    if tuple(sensitive) != s.sensitive_addresses:
        report.add("sensitive-addresses", "sensitive_addresses does not match host flags")

    _check_catalogue(s, report)

    directed = {(r.from_subnet, r.to_subnet) for r in s.firewall}
    expected = set()
    for a, b in s.layout.adjacency:
        expected.add((a, b))
        expected.add((b, a))
    if directed != expected:
        report.add("firewall-edges", "firewall rules do not cover exactly both directions of each edge")
    for r in s.firewall:
        if any(svc >= config.num_services or svc < 0 for svc in r.allowed_services):
            report.add("firewall-services", f"rule {r.from_subnet}->{r.to_subnet} allows unknown services")


def _check_catalogue(s: Scenario, report: ValidationReport) -> None:
    config = s.config
    per_host = per_host_action_count(config)
    if len(s.actions) != config.max_hosts * per_host:
        report.add("catalogue-size", f"{len(s.actions)} actions, expected {config.max_hosts * per_host}")
        return
    templates = action_templates(config)
    for slot in range(config.max_hosts):
        block = s.actions[slot * per_host : (slot + 1) * per_host]
        if slot < s.host_count:
            target = s.hosts[slot].address
            for t, a in zip(templates, block):
                if (a.kind, a.os, a.service, a.process) != (t.kind, t.os, t.service, t.process):
                    report.add("action-order", f"slot {slot} breaks the canonical kind order")
                    break
                if a.target != target:
                    report.add("action-target", f"slot {slot} action targets {a.target}, host is {target}")
                    break
                if (a.cost, a.prob, a.required_access, a.granted_access) != (
                    t.cost,
                    t.prob,
                    t.required_access,
                    t.granted_access,
                ):
                    report.add("action-attrs", f"slot {slot} action attributes differ from the template")
                    break
        else:
            if any(a.kind is not ActionKind.NOOP or a.target is not None for a in block):
                report.add("catalogue-padding", f"slot {slot} beyond host count is not NoOp padding")


def _reachable(s: Scenario, compromised: set[int]) -> list[bool]:
    """Reachability under the environment's rules for a compromised set."""
    reach = [False] * s.host_count
    comp_subnets = {s.hosts[i].address[0] for i in compromised}
    for j, host in enumerate(s.hosts):
        subnet = host.address[0]
        if subnet == DMZ or subnet in comp_subnets:
            reach[j] = True
            continue
        for cs in comp_subnets:
            if (min(cs, subnet), max(cs, subnet)) not in s.layout.adjacency:
                continue
            rule = s.firewall_rule(cs, subnet)
            if rule and any(host.services[svc] for svc in rule.allowed_services):
                reach[j] = True
                break
    return reach


def _search_witness(s: Scenario, report: ValidationReport) -> None:
    """Forward closure assuming every stochastic action succeeds.

    Emits exploits in discovery rounds, then one escalation per sensitive
    host, so the final action completes the goal.
    """
    compromised: set[int] = set()
    witness: list[int] = []
    while True:
        reach = _reachable(s, compromised)
        progressed = False
        for slot in range(s.host_count):
            if slot in compromised or not reach[slot]:
                continue
            exploit = _matching_exploit(s, slot)
            if exploit is None:
                continue
            witness.append(exploit)
            compromised.add(slot)
            progressed = True
        if not progressed:
            break

    complete = True
    for slot, host in enumerate(s.hosts):
        if not host.sensitive:
            continue
        privesc = _matching_privesc(s, slot)
        if slot not in compromised or privesc is None:
            complete = False
            continue
        witness.append(privesc)
    if complete:
        report.witness = witness
    else:
        report.add("goal-unreachable", "no forced-success action sequence roots every sensitive host")


def validate_scenario(s: Scenario) -> ValidationReport:
    """Check every scenario invariant plus the three attack-path guarantees.

    Guarantee (a): every non-internet subnet holds at least one exploitable
    host. Guarantee (b): every sensitive host is exploitable to user and
    escalatable to root. Guarantee (c): each direction of every adjacency
    whose far side has hosts admits at least one service run by an
    exploitable host there.
    """
    report = ValidationReport()
    _check_structure(s, report)

    exploitable = {slot for slot in range(s.host_count) if _matching_exploit(s, slot) is not None}

    subnets_with_hosts = {h.address[0] for h in s.hosts}
    for subnet in sorted(subnets_with_hosts):
        if not any(s.hosts[i].address[0] == subnet for i in exploitable):
            report.add("mechanism-a", f"subnet {subnet} contains no exploitable host")

    for slot, host in enumerate(s.hosts):
        if not host.sensitive:
            continue
        if slot not in exploitable:
            report.add("mechanism-b", f"sensitive host {host.address} runs no exploitable (os, service)")
        if _matching_privesc(s, slot) is None:
            report.add("mechanism-b", f"sensitive host {host.address} runs no escalatable (os, process)")

    for a, b in sorted(s.layout.adjacency):
        for frm, to in ((a, b), (b, a)):
            far = [i for i in exploitable if s.hosts[i].address[0] == to]
            if not any(h.address[0] == to for h in s.hosts):
                continue  # no hosts on the far side: nothing to require
            rule = s.firewall_rule(frm, to)
            allowed = rule.allowed_services if rule else frozenset()
            if not any(s.hosts[i].services[svc] for i in far for svc in allowed):
                report.add(
                    "mechanism-c",
                    f"firewall {frm}->{to} allows no service of an exploitable far-side host",
                )

    _search_witness(s, report)
    return report
