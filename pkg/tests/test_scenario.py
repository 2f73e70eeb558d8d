"""Layout, catalogue, and generator tests."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netpen import (
    ActionKind,
    GenerationConfig,
    Scenario,
    action_space_size,
    build_action_catalogue,
    generate,
    subnet_layout,
)
from netpen.scenario import DMZ, INTERNET, SENSITIVE, ConfigError, action_templates


def _rng(seed):
    return np.random.default_rng(seed)


class TestSubnetLayout:
    def test_seven_hosts_single_user_subnet(self, default_config):
        layout = subnet_layout(7, default_config)
        assert layout.subnet_sizes == (0, 1, 1, 5)

    def test_eight_hosts_two_user_subnets(self, default_config):
        layout = subnet_layout(8, default_config)
        assert layout.subnet_sizes == (0, 1, 1, 5, 1)
        assert (3, 4) in layout.adjacency

    def test_five_hosts_sizes_and_edges(self, default_config):
        layout = subnet_layout(5, default_config)
        assert layout.subnet_sizes == (0, 1, 1, 3)
        assert layout.adjacency == frozenset({(0, 1), (1, 3), (2, 3)})

    def test_out_of_range_host_count(self, default_config):
        with pytest.raises(ValueError):
            subnet_layout(4, default_config)
        with pytest.raises(ValueError):
            subnet_layout(9, default_config)

    @given(host_count=st.integers(min_value=5, max_value=8))
    def test_sizes_sum_and_tree(self, host_count):
        config = GenerationConfig()
        layout = subnet_layout(host_count, config)
        assert sum(layout.subnet_sizes) == host_count
        assert layout.subnet_sizes[INTERNET] == 0
        assert layout.subnet_sizes[DMZ] == 1
        assert layout.subnet_sizes[SENSITIVE] == 1
        # tree: |E| = |V| - 1 and connected
        n = layout.num_subnets
        assert len(layout.adjacency) == n - 1
        seen, frontier = {0}, [0]
        while frontier:
            for nb in layout.neighbors(frontier.pop()):
                if nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        assert seen == set(range(n))

    def test_user_subnets_capped(self):
        config = GenerationConfig(min_hosts=5, max_hosts=20)
        layout = subnet_layout(20, config)
        user_sizes = layout.subnet_sizes[3:]
        assert all(size <= config.hosts_per_user_subnet_max for size in user_sizes)
        assert sum(user_sizes) == 18


class TestActionCatalogue:
    def test_default_config_size_is_96(self, default_config):
        assert action_space_size(default_config) == 96
        scenario = generate(default_config, _rng(0))
        assert len(scenario.actions) == 96

    def test_minimal_config_size_is_6(self):
        config = GenerationConfig(
            min_hosts=1, max_hosts=1, num_os=1, num_services=1, num_processes=1,
            num_sensitive=1,
        )
        assert action_space_size(config) == 6

    def test_noop_padding_count_for_five_hosts(self, default_config):
        scenario = generate(default_config, _rng(3), host_count=5)
        noops = sum(1 for a in scenario.actions if a.kind is ActionKind.NOOP)
        assert noops == 3 * 12
        assert all(a.target is None for a in scenario.actions if a.kind is ActionKind.NOOP)

    def test_canonical_kind_order_within_block(self, default_config):
        block = action_templates(default_config)
        kinds = [a.kind for a in block]
        assert kinds[:4] == [
            ActionKind.SERVICE_SCAN,
            ActionKind.OS_SCAN,
            ActionKind.SUBNET_SCAN,
            ActionKind.PROCESS_SCAN,
        ]
        exploits = [(a.os, a.service) for a in block[4:8]]
        privescs = [(a.os, a.process) for a in block[8:12]]
        assert exploits == sorted(exploits) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert privescs == sorted(privescs)

    def test_catalogue_stable_across_scenarios(self, default_config):
        """Real-host blocks carry identical attributes at every slot; only
        targets differ. Padding blocks are NoOp."""
        a = generate(default_config, _rng(10))
        b = generate(default_config, _rng(11))
        for x, y in zip(a.actions, b.actions):
            if x.kind is ActionKind.NOOP or y.kind is ActionKind.NOOP:
                continue
            assert (x.kind, x.cost, x.prob, x.required_access, x.granted_access) == (
                y.kind, y.cost, y.prob, y.required_access, y.granted_access,
            )
            assert (x.os, x.service, x.process) == (y.os, y.service, y.process)

    def test_formula_matches_enumeration_random_configs(self):
        rng = _rng(99)
        for _ in range(100):
            config = GenerationConfig(
                min_hosts=1,
                max_hosts=int(rng.integers(1, 7)) + 1,
                num_os=int(rng.integers(1, 4)),
                num_services=int(rng.integers(2, 5)),
                num_processes=int(rng.integers(2, 5)),
                num_sensitive=1,
            )
            assert len(build_action_catalogue(config, [])) == action_space_size(config)


class TestGenerate:
    def test_same_seed_byte_identical(self, default_config):
        a = generate(default_config, _rng(77))
        b = generate(default_config, _rng(77))
        assert a.to_json() == b.to_json()

    def test_different_seeds_differ(self, default_config):
        assert generate(default_config, _rng(1)).to_json() != generate(default_config, _rng(2)).to_json()

    def test_host_count_sweep_covers_range(self, default_config):
        counts = {generate(default_config, _rng(seed)).host_count for seed in range(200)}
        assert counts == {5, 6, 7, 8}

    def test_every_host_runs_configured_subset_sizes(self, default_config):
        for seed in range(50):
            scenario = generate(default_config, _rng(seed))
            for host in scenario.hosts:
                assert sum(host.services) == 1
                assert sum(host.processes) == 1

    def test_sensitive_hosts_are_dmz_and_sensitive_zone(self, default_config):
        for seed in range(50):
            scenario = generate(default_config, _rng(seed))
            subnets = sorted(addr[0] for addr in scenario.sensitive_addresses)
            assert subnets == [DMZ, SENSITIVE]
            for host in scenario.hosts:
                expected = 100.0 if host.sensitive else 5.0
                assert host.value == expected

    def test_canonical_host_order(self, default_config):
        scenario = generate(default_config, _rng(5))
        addresses = [h.address for h in scenario.hosts]
        assert addresses == sorted(addresses)

    def test_json_roundtrip(self, default_config):
        scenario = generate(default_config, _rng(8))
        again = Scenario.from_json(scenario.to_json())
        assert again == scenario
        assert again.to_json() == scenario.to_json()

    def test_forced_host_count(self, default_config):
        for count in range(5, 9):
            assert generate(default_config, _rng(0), host_count=count).host_count == count


class TestConfigValidation:
    def test_rejects_bad_bounds(self):
        with pytest.raises(ConfigError):
            GenerationConfig(min_hosts=9, max_hosts=8)
        with pytest.raises(ConfigError):
            GenerationConfig(num_sensitive=6, min_hosts=5)
        with pytest.raises(ConfigError):
            GenerationConfig(exploit_prob=0.0)
        with pytest.raises(ConfigError):
            GenerationConfig(services_per_host=2)  # not a strict subset of 2
        with pytest.raises(ConfigError):
            GenerationConfig(step_limit="sometimes")

    def test_single_service_degenerate_rule(self):
        config = GenerationConfig(num_services=1, services_per_host=1)
        assert config.num_services == 1

    def test_unknown_override_key(self, default_config):
        with pytest.raises(TypeError):
            default_config.with_overrides(nonsense=3)
