"""Remote-environment adapter tests, including bit parity with the
in-process simulator. The simulator package is imported here only to run
the reference side of the comparisons; the adapter itself talks to it
exclusively over the child-process pipe."""

import numpy as np
import pytest

from netpen_client import RemoteEnv, RemoteEnvError, RemoteEnvPool

# Reference implementation, used by tests only.
from netpen import Environment, GenerationConfig, OraclePolicy, StepResult, run_episode


@pytest.fixture()
def remote():
    with RemoteEnv() as env:
        yield env


class TestSpec:
    def test_shapes_as_advertised(self, remote):
        assert remote.action_space_size == 96
        assert remote.observation_shape == (9, 24)

    def test_augmented_shape(self):
        with RemoteEnv(memory="augmented") as env:
            assert env.observation_shape == (18, 24)
            assert env.reset(seed=1).shape == (18, 24)

    def test_config_overrides_change_spec(self):
        with RemoteEnv(config={"max_hosts": 6, "min_hosts": 5}) as env:
            assert env.action_space_size == 72


class TestResetStep:
    def test_same_seed_identical_across_handles(self):
        with RemoteEnv() as a, RemoteEnv() as b:
            assert (a.reset(seed=11) == b.reset(seed=11)).all()

    def test_reset_matches_in_process(self, remote):
        local = Environment(GenerationConfig())
        assert (remote.reset(seed=5) == local.reset(seed=5)).all()

    def test_step_after_done_requires_reset(self):
        with RemoteEnv(config={"step_limit": 2}) as env:
            env.reset(seed=0)
            env.step(0)
            obs, reward, terminated, truncated, info = env.step(0)
            assert truncated
            with pytest.raises(RemoteEnvError) as err:
                env.step(0)
            assert err.value.code == "episode_over"
            env.reset(seed=1)
            env.step(0)

    def test_bad_action_surfaces_server_code(self, remote):
        remote.reset(seed=0)
        with pytest.raises(RemoteEnvError) as err:
            remote.step(96)
        assert err.value.code == "bad_action"

    def test_rewards_and_flags_pass_through(self, remote):
        local = Environment(GenerationConfig())
        trajectory = run_episode(local, OraclePolicy(local.config), seed=9)
        remote.reset(seed=9)
        for step in trajectory.steps:
            _, reward, terminated, truncated, info = remote.step(step.action_index)
            assert reward == step.reward
            assert info["outcome"]["success"] == step.success

    def test_observations_bit_identical_over_episode(self, remote):
        local = Environment(GenerationConfig())
        local_obs = [local.reset(seed=31)]
        remote_obs = [remote.reset(seed=31)]
        rng = np.random.default_rng(31)
        for _ in range(80):
            action = int(rng.integers(local.action_count))
            result = local.step(action)
            obs, *_ = remote.step(action)
            local_obs.append(result.observation)
            remote_obs.append(obs)
            if result.terminated or result.truncated:
                break
        for mine, theirs in zip(local_obs, remote_obs):
            assert mine.tobytes() == theirs.tobytes()

    def test_forced_sensitive_escalation_pays_97(self):
        local = Environment(GenerationConfig())
        trajectory = run_episode(local, OraclePolicy(local.config), seed=2)
        rewards = [s.reward for s in trajectory.steps if s.kind == "privesc" and s.success]
        assert 97.0 in rewards  # the sensitive-host escalations pay -3 + 100
        with RemoteEnv() as env:
            env.reset(seed=2)
            seen = []
            for step in trajectory.steps:
                _, reward, *_ = env.step(step.action_index)
                seen.append(reward)
            assert 97.0 in seen


def _run_oracle_remotely(env: RemoteEnv, config: GenerationConfig, seed: int):
    """Drive the scripted oracle through the adapter; returns per-step
    (reward, outcome-flags) pairs."""
    policy = OraclePolicy(config)
    obs = env.reset(seed=seed)
    policy.begin_episode(obs)
    steps = []
    while True:
        action = policy.act()
        obs, reward, terminated, truncated, info = env.step(action)
        policy.observe(action, StepResult(obs, reward, terminated, truncated, info))
        steps.append((reward, tuple(sorted(info["outcome"].items()))))
        if terminated or truncated:
            return steps, terminated


class TestRemoteParity:
    def test_hundred_episode_oracle_parity(self):
        """Acceptance: 100 oracle episodes through the adapter match the
        in-process run reward-for-reward and flag-for-flag."""
        config = GenerationConfig()
        local = Environment(config)
        with RemoteEnv() as env:
            for seed in range(100):
                local_trajectory = run_episode(local, OraclePolicy(config), seed=seed)
                remote_steps, remote_terminated = _run_oracle_remotely(env, config, seed)
                local_steps = [
                    (
                        s.reward,
                        tuple(
                            sorted(
                                {
                                    "success": s.success,
                                    "connection_error": s.error == "connection",
                                    "permission_error": s.error == "permission",
                                    "undefined_error": s.error == "undefined",
                                }.items()
                            )
                        ),
                    )
                    for s in local_trajectory.steps
                ]
                assert remote_steps == local_steps, f"divergence at seed {seed}"
                assert remote_terminated == (local_trajectory.terminal == "terminated")


class TestPool:
    def test_parallel_handles_independent(self):
        with RemoteEnvPool(3) as pool:
            observations = pool.reset_all(seeds=[1, 2, 3])
            assert len(observations) == 3
            results = pool.step_all([0, 0, 0])
            assert len(results) == 3
            # handle 0 reseeded to handle 1's seed reproduces its episode
            assert (pool[0].reset(seed=2) == pool[1].reset(seed=2)).all()

    def test_size_mismatch_rejected(self):
        with RemoteEnvPool(2) as pool:
            pool.reset_all(seeds=[1, 2])
            with pytest.raises(ValueError):
                pool.step_all([0])
