"""Line-delimited JSON protocol and episode-log persistence tests."""

import io
import json

import numpy as np

from netpen import Environment, GenerationConfig, OraclePolicy, run_episode
from netpen.protocol import (
    EpisodeLogger,
    log_episode,
    read_trajectories,
    serve,
    trajectory_records,
)


def _session_roundtrip(requests, **kwargs):
    reader = io.StringIO("\n".join(json.dumps(r) if isinstance(r, dict) else r for r in requests) + "\n")
    writer = io.StringIO()
    serve(reader, writer, **kwargs)
    return [json.loads(line) for line in writer.getvalue().splitlines()]


class TestProtocol:
    def test_spec_info_default_config(self):
        responses = _session_roundtrip([{"type": "spec"}])
        assert responses[0]["type"] == "spec_info"
        assert responses[0]["action_space_size"] == 96
        assert responses[0]["observation_shape"] == [9, 24]

    def test_spec_info_augmented_shape(self):
        responses = _session_roundtrip([{"type": "spec"}], memory="augmented")
        assert responses[0]["observation_shape"] == [18, 24]

    def test_one_response_per_request_in_order(self):
        responses = _session_roundtrip(
            [{"type": "spec"}, {"type": "reset", "seed": 1}, {"type": "step", "action": 0}, {"type": "close"}]
        )
        assert [r["type"] for r in responses] == ["spec_info", "transition", "transition", "closed"]

    def test_reset_identical_across_sessions(self):
        a = _session_roundtrip([{"type": "reset", "seed": 7}])
        b = _session_roundtrip([{"type": "reset", "seed": 7}])
        assert a == b
        assert a[0]["shape"] == [9, 24]
        assert len(a[0]["observation"]) == 9 * 24

    def test_observation_payload_matches_local_env(self, default_config):
        env = Environment(default_config)
        local = env.reset(seed=11)
        responses = _session_roundtrip([{"type": "reset", "seed": 11}])
        remote = np.array(responses[0]["observation"]).reshape(responses[0]["shape"])
        assert (remote == local).all()

    def test_step_before_reset_is_error(self):
        responses = _session_roundtrip([{"type": "step", "action": 0}])
        assert responses[0] == {"type": "error", "code": "not_reset", "message": responses[0]["message"]}

    def test_out_of_range_action_keeps_session_alive(self):
        responses = _session_roundtrip(
            [{"type": "reset", "seed": 1}, {"type": "step", "action": 96}, {"type": "step", "action": 0}]
        )
        assert responses[1]["type"] == "error"
        assert responses[1]["code"] == "bad_action"
        assert responses[2]["type"] == "transition"

    def test_malformed_json_keeps_session_alive(self):
        responses = _session_roundtrip(["{nope", {"type": "spec"}])
        assert responses[0]["code"] == "parse"
        assert responses[1]["type"] == "spec_info"

    def test_unknown_type_and_bad_config(self):
        responses = _session_roundtrip(
            [{"type": "warp"}, {"type": "reset", "config": {"exploit_prob": 0.0}}]
        )
        assert responses[0]["code"] == "bad_request"
        assert responses[1]["code"] == "bad_config"

    def test_config_override_changes_spec(self):
        responses = _session_roundtrip(
            [
                {"type": "reset", "seed": 0, "config": {"max_hosts": 6, "min_hosts": 5}},
                {"type": "spec"},
            ]
        )
        # 6 host slots x 12 actions per slot
        assert responses[1]["action_space_size"] == 72

    def test_step_after_episode_over_is_error(self):
        config = GenerationConfig(step_limit=2)
        responses = _session_roundtrip(
            [
                {"type": "reset", "seed": 0},
                {"type": "step", "action": 0},
                {"type": "step", "action": 0},
                {"type": "step", "action": 0},
            ],
            config=config,
        )
        assert responses[2]["truncated"] is True
        assert responses[3]["code"] == "episode_over"

    def test_remote_replay_matches_local_rewards(self, default_config):
        env = Environment(default_config)
        trajectory = run_episode(env, OraclePolicy(default_config), seed=21)
        requests = [{"type": "reset", "seed": 21}] + [
            {"type": "step", "action": s.action_index} for s in trajectory.steps
        ]
        responses = _session_roundtrip(requests)
        for step, response in zip(trajectory.steps, responses[1:]):
            assert response["reward"] == step.reward
            assert response["info"]["outcome"]["success"] == step.success
        assert responses[-1]["terminated"] == (trajectory.terminal == "terminated")

    def test_cycler_memory_cycles_sizes(self):
        requests = [{"type": "reset", "seed": 5, "memory": "cycler"}] + [
            {"type": "reset"} for _ in range(3)
        ]
        responses = _session_roundtrip(requests)
        assert [r["info"]["host_count"] for r in responses] == [5, 6, 7, 8]


class TestEpisodeLog:
    def test_roundtrip_field_identical(self, default_config, tmp_path):
        env = Environment(default_config)
        trajectory = run_episode(env, OraclePolicy(default_config), seed=3)
        path = tmp_path / "log.jsonl"
        with EpisodeLogger(path) as logger:
            record_id = logger.log(trajectory)
        assert record_id == "ep-0"
        restored = read_trajectories(path)
        assert len(restored) == 1
        assert restored[0] == trajectory

    def test_append_across_calls(self, default_config, tmp_path):
        env = Environment(default_config)
        path = tmp_path / "log.jsonl"
        t1 = run_episode(env, OraclePolicy(default_config), seed=1)
        t2 = run_episode(env, OraclePolicy(default_config), seed=2)
        assert log_episode(path, t1) == "ep-0"
        assert log_episode(path, t2) == "ep-1"
        restored = read_trajectories(path)
        assert [t.seed for t in restored] == [1, 2]

    def test_records_are_self_describing(self, default_config):
        env = Environment(default_config)
        trajectory = run_episode(env, OraclePolicy(default_config), seed=9)
        header = trajectory_records(trajectory, "ep-9")[0]
        assert header["config_hash"] == default_config.config_hash()
        assert header["seed"] == 9
        assert header["host_count"] == trajectory.host_count
        assert header["return"] == trajectory.episode_return
        assert header["length"] == trajectory.length

    def test_separate_files_no_interleaving(self, default_config, tmp_path):
        env = Environment(default_config)
        loggers = [EpisodeLogger(tmp_path / f"w{i}.jsonl") for i in range(2)]
        for seed in range(4):
            trajectory = run_episode(env, OraclePolicy(default_config), seed=seed)
            loggers[seed % 2].log(trajectory)
        for i, logger in enumerate(loggers):
            logger.close()
            restored = read_trajectories(tmp_path / f"w{i}.jsonl")
            assert [t.seed for t in restored] == [i, i + 2]


def test_cycler_log_groups_evenly_by_host_count(default_config, tmp_path):
    from netpen import OraclePolicy, ScenarioCyclerEnv, run_episode
    from netpen.analysis import per_size_stats

    env = ScenarioCyclerEnv(default_config, seed=2)
    path = tmp_path / "cycler.jsonl"
    with EpisodeLogger(path) as logger:
        for episode in range(20):
            logger.log(run_episode(env, OraclePolicy(default_config), seed=episode))
    stats = per_size_stats(read_trajectories(path))
    assert sorted(stats) == [5, 6, 7, 8]
    assert all(stats[size].episodes == 5 for size in stats)
