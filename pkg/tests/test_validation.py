"""Validator and witness-search tests."""

import dataclasses

import numpy as np

from netpen import Environment, generate, validate_scenario
from netpen.scenario import FirewallRule, SENSITIVE


def _rng(seed):
    return np.random.default_rng(seed)


def test_generator_output_is_valid(default_config):
    for seed in range(500):
        report = validate_scenario(generate(default_config, _rng(seed)))
        assert report.ok, report.to_dict()
        assert report.witness


def test_unexploitable_sensitive_host_flags_mechanism_b(default_config):
    scenario = generate(default_config, _rng(1))
    slot = scenario.slot_of_address(scenario.sensitive_addresses[-1])
    hosts = list(scenario.hosts)
    hosts[slot] = dataclasses.replace(hosts[slot], services=(0,) * default_config.num_services)
    broken = dataclasses.replace(scenario, hosts=tuple(hosts))
    report = validate_scenario(broken)
    assert not report.ok
    assert "mechanism-b" in report.codes()


def test_empty_firewall_direction_flags_mechanism_c(default_config):
    scenario = generate(default_config, _rng(2))
    rules = []
    for rule in scenario.firewall:
        if rule.to_subnet == SENSITIVE:
            rule = FirewallRule(rule.from_subnet, rule.to_subnet, frozenset())
        rules.append(rule)
    broken = dataclasses.replace(scenario, firewall=tuple(rules))
    report = validate_scenario(broken)
    assert not report.ok
    assert "mechanism-c" in report.codes()


def test_witness_replay_with_forced_success_terminates(default_config):
    for seed in range(25):
        scenario = generate(default_config, _rng(seed))
        report = validate_scenario(scenario)
        assert report.witness
        env = Environment(default_config, force_success=True)
        env.reset(seed=seed, scenario=scenario)
        result = None
        for action in report.witness:
            result = env.step(action)
            assert result.info["outcome"].success, (seed, action)
        assert result.terminated


def test_witness_is_all_exploits_then_privescs(default_config):
    scenario = generate(default_config, _rng(9))
    report = validate_scenario(scenario)
    kinds = [scenario.actions[i].kind.wire_name for i in report.witness]
    first_privesc = kinds.index("privesc")
    assert all(k == "exploit" for k in kinds[:first_privesc])
    assert all(k == "privesc" for k in kinds[first_privesc:])
    assert kinds.count("privesc") == default_config.num_sensitive
