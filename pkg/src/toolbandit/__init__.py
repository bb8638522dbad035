"""Online contextual-bandit decision layer for sequential action selection."""

from .bandit import (
    ActionId,
    ArmState,
    BanditPolicy,
    DimensionMismatchError,
    NoValidActionError,
    StatisticsCorruptionError,
    UnknownActionError,
    init_arm,
)
from .baselines import EpsilonGreedyPolicy, RandomPolicy, Ucb1Policy, make_policy
from .episodes import (
    ContextSourceError,
    Episode,
    EpisodeProtocolError,
    EpisodeResult,
    EpisodeState,
    RewardMode,
    StreamResult,
    begin_episode,
    make_episode,
    run_episode,
    run_stream,
)
from .metrics import MultisetMetrics, macro_average, multiset_match, optimal_rate, running_average
from .synthetic import (
    SyntheticConfig,
    cumulative_regret,
    deceptive_instance,
    default_config,
    estimation_error,
    generate_round,
    make_episode_set,
    optimal_action,
    run_rounds,
)
from .trace import (
    CheckpointError,
    TraceFormatError,
    checkpoint_policy,
    load_trace,
    restore_policy,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ActionId",
    "ArmState",
    "BanditPolicy",
    "CheckpointError",
    "ContextSourceError",
    "DimensionMismatchError",
    "Episode",
    "EpisodeProtocolError",
    "EpisodeResult",
    "EpisodeState",
    "EpsilonGreedyPolicy",
    "MultisetMetrics",
    "NoValidActionError",
    "RandomPolicy",
    "RewardMode",
    "StatisticsCorruptionError",
    "StreamResult",
    "SyntheticConfig",
    "TraceFormatError",
    "Ucb1Policy",
    "UnknownActionError",
    "begin_episode",
    "checkpoint_policy",
    "cumulative_regret",
    "deceptive_instance",
    "default_config",
    "estimation_error",
    "generate_round",
    "init_arm",
    "load_trace",
    "macro_average",
    "make_episode",
    "make_episode_set",
    "make_policy",
    "multiset_match",
    "optimal_action",
    "optimal_rate",
    "restore_policy",
    "run_episode",
    "run_rounds",
    "run_stream",
    "running_average",
    "write_trace",
]
