"""netpen: a deterministic, seedable network penetration-testing simulator.

Episodes play out on procedurally generated networks with guaranteed attack
paths; the agent sees fixed-shape partial observations and acts through a
fixed-size catalogue of scans, exploits, and privilege escalations.
"""

from ._engine import available_backends
from .agents import (
    AgentMemory,
    BruteForcePolicy,
    OraclePolicy,
    RandomPolicy,
    Trajectory,
    TrajectoryStep,
    calibrate_step_limit,
    make_policy,
    run_episode,
)
from .env import (
    AccessLevel,
    Environment,
    EnvState,
    ObservationLayout,
    OutcomeFlags,
    StepResult,
    check_preconditions,
    encode_state,
    reward_of,
    update_reachability,
)
from .scenario import (
    ActionDef,
    ActionIndexer,
    ActionKind,
    FirewallRule,
    GenerationConfig,
    HostConfig,
    Scenario,
    SubnetLayout,
    action_space_size,
    build_action_catalogue,
    generate,
    subnet_layout,
)
from .validation import ValidationReport, validate_scenario
from .wrappers import (
    AugmentedObservationEnv,
    FrameStack,
    FrameStackEnv,
    ScenarioCyclerEnv,
    augment,
    make_env,
)

__version__ = "0.1.0"

__all__ = [
    "AccessLevel",
    "ActionDef",
    "ActionIndexer",
    "ActionKind",
    "AgentMemory",
    "AugmentedObservationEnv",
    "BruteForcePolicy",
    "Environment",
    "EnvState",
    "FirewallRule",
    "FrameStack",
    "FrameStackEnv",
    "GenerationConfig",
    "HostConfig",
    "ObservationLayout",
    "OraclePolicy",
    "OutcomeFlags",
    "RandomPolicy",
    "Scenario",
    "ScenarioCyclerEnv",
    "StepResult",
    "SubnetLayout",
    "Trajectory",
    "TrajectoryStep",
    "ValidationReport",
    "action_space_size",
    "augment",
    "available_backends",
    "build_action_catalogue",
    "calibrate_step_limit",
    "check_preconditions",
    "encode_state",
    "generate",
    "make_env",
    "make_policy",
    "reward_of",
    "run_episode",
    "subnet_layout",
    "update_reachability",
    "validate_scenario",
]
