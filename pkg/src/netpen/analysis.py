"""Evaluation statistics over episode logs.

Every statistic here is recomputable from the JSONL episode log alone; the
log is the single source of truth. The normalized score anchors its scale
to scripted agents: the random policy maps to 0 and the oracle policy to 1
on the same episode-seed sequence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .agents import Trajectory, make_policy, run_episode
from .scenario import ActionKind, GenerationConfig
from .wrappers import make_env

ACTION_KIND_NAMES = tuple(kind.wire_name for kind in ActionKind)

_SEED_MASK = (1 << 64) - 1


class AnalysisError(ValueError):
    """Raised for unusable inputs (empty logs, bad baselines)."""


@dataclass
class SizeStats:
    episodes: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "mean": self.mean,
        }


@dataclass
class EvaluationSummary:
    policy: str
    episodes: int
    mean_return: float
    mean_steps: float
    termination_rate: float
    action_type_proportions: dict[str, float]
    per_size: dict[int, SizeStats]
    iqm_normalized_score: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "episodes": self.episodes,
            "mean_return": self.mean_return,
            "mean_steps": self.mean_steps,
            "termination_rate": self.termination_rate,
            "action_type_proportions": self.action_type_proportions,
            "per_size": {str(k): v.to_dict() for k, v in sorted(self.per_size.items())},
            "iqm_normalized_score": self.iqm_normalized_score,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def action_type_distribution(trajectories: Sequence[Trajectory]) -> dict[str, float]:
    """Proportion of steps per action kind over the whole log."""
    counts = {name: 0 for name in ACTION_KIND_NAMES}
    total = 0
    for trajectory in trajectories:
        for step in trajectory.steps:
            counts[step.kind] += 1
            total += 1
    if total == 0:
        raise AnalysisError("log contains no steps")
    return {name: counts[name] / total for name in ACTION_KIND_NAMES}


def iqm(scores: Sequence[float]) -> float:
    """Interquartile mean: mean of the middle half of the sorted sample,
    dropping floor(n / 4) values from each end."""
    n = len(scores)
    if n < 4:
        raise AnalysisError("need at least 4 scores for an interquartile mean")
    trim = n // 4
    middle = sorted(scores)[trim : n - trim]
    return float(sum(middle) / len(middle))


def iqm_normalized(scores: Sequence[float], random_baseline: float, oracle_baseline: float) -> float:
    """IQM of scores normalized so the random baseline maps to 0 and the
    oracle baseline to 1."""
    if not oracle_baseline > random_baseline:
        raise AnalysisError("oracle baseline must exceed random baseline")
    span = oracle_baseline - random_baseline
    return iqm([(s - random_baseline) / span for s in scores])


def _quantiles(values: Sequence[float]) -> SizeStats:
    arr = np.asarray(values, dtype=np.float64)
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0])
    return SizeStats(
        episodes=len(values),
        minimum=float(q[0]),
        q1=float(q[1]),
        median=float(q[2]),
        q3=float(q[3]),
        maximum=float(q[4]),
        mean=float(arr.mean()),
    )


def per_size_stats(trajectories: Sequence[Trajectory]) -> dict[int, SizeStats]:
    """Return-distribution quartiles grouped by network size (box-plot data)."""
    by_size: dict[int, list[float]] = {}
    for trajectory in trajectories:
        by_size.setdefault(trajectory.host_count, []).append(trajectory.episode_return)
    return {size: _quantiles(returns) for size, returns in sorted(by_size.items())}


def sequence_export(trajectory: Trajectory) -> dict:
    """Plot-ready per-step table for one episode's action sequence."""
    return {
        "seed": trajectory.seed,
        "policy": trajectory.policy,
        "host_count": trajectory.host_count,
        "terminal": trajectory.terminal,
        "return": trajectory.episode_return,
        "steps": [
            {
                "t": s.t,
                "kind": s.kind,
                "target": list(s.target) if s.target is not None else None,
                "success": s.success,
                "error": s.error,
                "reward": s.reward,
            }
            for s in trajectory.steps
        ],
    }


def summarize(
    trajectories: Sequence[Trajectory],
    *,
    policy: str = "",
    baselines: Optional[tuple[float, float]] = None,
) -> EvaluationSummary:
    """Compute the full summary from a list of trajectories.

    ``baselines`` is (random_mean_return, oracle_mean_return); when given,
    the normalized score over per-episode returns is included.
    """
    if not trajectories:
        raise AnalysisError("no episodes to summarize")
    returns = [t.episode_return for t in trajectories]
    lengths = [t.length for t in trajectories]
    terminated = sum(1 for t in trajectories if t.terminal == "terminated")
    score = None
    if baselines is not None:
        score = iqm_normalized(returns, baselines[0], baselines[1])
    return EvaluationSummary(
        policy=policy or (trajectories[0].policy if trajectories else ""),
        episodes=len(trajectories),
        mean_return=float(np.mean(returns)),
        mean_steps=float(np.mean(lengths)),
        termination_rate=terminated / len(trajectories),
        action_type_proportions=action_type_distribution(trajectories),
        per_size=per_size_stats(trajectories),
        iqm_normalized_score=score,
    )


def episode_seeds(evaluation_seed: int, episodes: int) -> list[int]:
    """The per-episode seed sequence: a pure function of the evaluation
    seed, shared across policies so runs are paired."""
    ss = np.random.SeedSequence(int(evaluation_seed) & _SEED_MASK)
    return [int(s) for s in ss.generate_state(episodes, dtype=np.uint64)]


def evaluate(
    policy_name: str,
    config: Optional[GenerationConfig] = None,
    episodes: int = 100,
    seed: int = 0,
    *,
    memory: str = "none",
    backend: str = "auto",
    baselines: Optional[tuple[float, float]] = None,
    with_baselines: bool = False,
) -> tuple[EvaluationSummary, list[Trajectory]]:
    """Run a batch evaluation and summarize it.

    Episode seeds derive from the evaluation seed alone, so two policies
    evaluated with the same seed face the same sequence of networks. With
    ``with_baselines`` the random and oracle policies are run on the same
    seeds to anchor the normalized score.
    """
    config = config if config is not None else GenerationConfig()
    trajectories = run_batch(policy_name, config, episodes, seed, memory=memory, backend=backend)
    if with_baselines and baselines is None:
        anchors = {}
        for name in ("random", "oracle"):
            if name == policy_name:
                anchors[name] = float(np.mean([t.episode_return for t in trajectories]))
                continue
            runs = run_batch(name, config, episodes, seed, memory=memory, backend=backend)
            anchors[name] = float(np.mean([t.episode_return for t in runs]))
        baselines = (anchors["random"], anchors["oracle"])
    summary = summarize(trajectories, policy=policy_name, baselines=baselines)
    return summary, trajectories


def run_batch(
    policy_name: str,
    config: GenerationConfig,
    episodes: int,
    seed: int,
    *,
    memory: str = "none",
    backend: str = "auto",
) -> list[Trajectory]:
    env = make_env(config, memory=memory, seed=seed, backend=backend)
    trajectories = []
    for episode_seed in episode_seeds(seed, episodes):
        policy_rng = np.random.default_rng(np.random.SeedSequence([episode_seed, 0x90110]))
        policy = make_policy(policy_name, config, rng=policy_rng)
        # Under the cycler the wrapper picks the network and the episode
        # seed only drives the success draws.
        trajectories.append(run_episode(env, policy, seed=episode_seed))
    return trajectories
