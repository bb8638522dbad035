"""Episode state machine and stream runner for sequential action selection.

An episode grants a step budget of |ground truth| + s selections. Every step
the policy picks from the still-valid action set, earns a binary reward (1 iff
the pick matches a not-yet-matched ground-truth occurrence), and the pick
counts against a per-episode cap of m selections per action; an action hitting
the cap leaves the valid set. The episode ends when the budget is spent or no
valid action remains.

Reward modes control when the policy learns: "step" updates immediately with
the binary reward, "final" replays every selected step's context at episode
end with reward final_weight * terminal signal (episode F1 by default), and
"both" does both.

A stream run is strictly sequential (policy state is causal); independent
stream runs with their own policy and context source may run in parallel.
"""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .bandit import ActionId
from .metrics import MultisetMetrics, macro_average, multiset_match, running_average

REWARD_MODES = ("step", "final", "both")


class EpisodeProtocolError(RuntimeError):
    """An action outside the valid set was played against the state machine."""


class ContextSourceError(RuntimeError):
    """A context source could not serve the requested step."""


@dataclass(frozen=True)
class RewardMode:
    kind: str = "step"
    final_weight: float = 1.0

    def __post_init__(self):
        if self.kind not in REWARD_MODES:
            raise ValueError(f"reward mode {self.kind!r} not in {REWARD_MODES}")
        if self.final_weight < 0:
            raise ValueError("final_weight must be non-negative")

    @property
    def uses_step(self) -> bool:
        return self.kind in ("step", "both")

    @property
    def uses_final(self) -> bool:
        return self.kind in ("final", "both")


@dataclass(frozen=True)
class Episode:
    task_id: str
    candidates: frozenset
    ground_truth: tuple
    context_key: str = ""

    def __post_init__(self):
        if not self.candidates:
            raise ValueError(f"episode {self.task_id!r} has no candidate actions")
        support = set(self.ground_truth)
        if not support.issubset(self.candidates):
            extra = sorted(support - set(self.candidates))
            raise ValueError(
                f"episode {self.task_id!r}: ground truth uses non-candidate actions {extra}"
            )
        if not self.context_key:
            object.__setattr__(self, "context_key", self.task_id)

    @property
    def gt_counter(self) -> Counter:
        return Counter(self.ground_truth)


def make_episode(task_id, candidates, ground_truth, context_key="") -> Episode:
    return Episode(
        task_id=str(task_id),
        candidates=frozenset(candidates),
        ground_truth=tuple(ground_truth),
        context_key=context_key,
    )


@dataclass
class StepRecord:
    step: int
    action: ActionId
    reward: float
    context_digest: str
    ucb_scores: dict


@dataclass
class EpisodeState:
    valid: set
    remaining: Counter
    budget: int
    step: int = 1
    per_arm_counts: Counter = field(default_factory=Counter)
    log: list = field(default_factory=list)


@dataclass
class EpisodeResult:
    task_id: str
    precision: float
    recall: float
    f1: float
    steps_taken: int
    rewards: list
    terminated_by: str  # "budget" or "exhausted"
    selected: list
    matched: int
    gt_size: int
    opportunities: int  # steps where some remaining ground truth was matchable
    missed_matches: int  # opportunities not converted; the stream's regret unit
    degenerate: bool = False  # empty ground truth
    log: list = field(default_factory=list)


def begin_episode(episode: Episode, s: int, m: int) -> EpisodeState:
    if s < 0:
        raise ValueError("extra step allowance s must be >= 0")
    if m < 1:
        raise ValueError("per-arm cap m must be >= 1")
    return EpisodeState(
        valid=set(episode.candidates),
        remaining=episode.gt_counter.copy(),
        budget=len(episode.ground_truth) + s,
    )


def step_reward(state: EpisodeState, action: ActionId) -> int:
    """1 iff the action matches remaining ground truth; consumes one occurrence."""
    if action not in state.valid:
        raise EpisodeProtocolError(f"action {action!r} is not in the valid set")
    if state.remaining.get(action, 0) > 0:
        state.remaining[action] -= 1
        if state.remaining[action] == 0:
            del state.remaining[action]
        return 1
    return 0


def apply_selection(state: EpisodeState, action: ActionId, m: int) -> None:
    """Count the selection; an action reaching the cap leaves the valid set."""
    if action not in state.valid:
        raise EpisodeProtocolError(f"action {action!r} is not in the valid set")
    state.per_arm_counts[action] += 1
    if state.per_arm_counts[action] >= m:
        state.valid.discard(action)


def _digest(ctx: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(ctx).tobytes()).hexdigest()[:16]


def run_episode(
    policy,
    episode: Episode,
    ctx_source,
    mode: RewardMode,
    s: int = 3,
    m: int = 3,
    terminal_signal: Callable[[MultisetMetrics], float] | None = None,
) -> EpisodeResult:
    """Run one episode to termination and return its multiset metrics.

    Context-source failures propagate as ContextSourceError; the stream
    runner converts them into aborted records.
    """
    state = begin_episode(episode, s, m)
    selected: list[ActionId] = []
    rewards: list[float] = []
    pending: list[tuple[np.ndarray, ActionId]] = []  # for final-mode replay
    opportunities = 0
    missed = 0
    terminated_by = "budget"

    while state.step <= state.budget:
        if not state.valid:
            terminated_by = "exhausted"
            break
        ctx = ctx_source.context_for(episode, state.step)
        action, scores = policy.select_with_scores(ctx, state.valid)
        matchable = any(a in state.remaining for a in state.valid)
        r = step_reward(state, action)
        if matchable:
            opportunities += 1
            missed += 1 - r
        if mode.uses_step:
            policy.update(action, ctx, float(r))
        if mode.uses_final:
            pending.append((ctx, action))
        apply_selection(state, action, m)
        state.log.append(
            StepRecord(
                step=state.step,
                action=action,
                reward=float(r),
                context_digest=_digest(ctx),
                ucb_scores=scores,
            )
        )
        selected.append(action)
        rewards.append(float(r))
        ctx_source.notify_action(episode, state.step, action)
        state.step += 1

    metrics = multiset_match(selected, episode.ground_truth)
    if mode.uses_final:
        signal = terminal_signal(metrics) if terminal_signal else metrics.f1
        for ctx, action in pending:
            policy.update(action, ctx, mode.final_weight * signal)

    try:
        ctx_source.notify_episode_end(episode, terminated_by)
    except ContextSourceError:
        # the episode itself completed; a dead channel resurfaces on the
        # next episode's first context fetch
        pass
    return EpisodeResult(
        task_id=episode.task_id,
        precision=metrics.precision,
        recall=metrics.recall,
        f1=metrics.f1,
        steps_taken=len(selected),
        rewards=rewards,
        terminated_by=terminated_by,
        selected=selected,
        matched=metrics.matched,
        gt_size=len(episode.ground_truth),
        opportunities=opportunities,
        missed_matches=missed,
        degenerate=len(episode.ground_truth) == 0,
        log=state.log,
    )


@dataclass
class EpisodeRecord:
    index: int
    task_id: str
    result: EpisodeResult | None = None
    aborted: bool = False
    abort_reason: str = ""


@dataclass
class StreamResult:
    records: list
    running_avg_f1: list
    cumulative_regret: float  # total missed matches over completed episodes
    aborted_count: int
    order: list  # task ids in the shuffled run order

    @property
    def completed(self) -> list:
        return [r.result for r in self.records if not r.aborted]

    def macro(self) -> MultisetMetrics:
        return macro_average(
            [
                MultisetMetrics(
                    res.precision,
                    res.recall,
                    res.f1,
                    res.matched,
                    len(res.selected),
                    res.gt_size,
                )
                for res in self.completed
            ]
        )

    @property
    def final_running_avg_f1(self) -> float:
        if not self.running_avg_f1:
            return 0.0
        return self.running_avg_f1[-1]

    def opportunity_rate(self) -> float:
        """Fraction of match opportunities converted across the stream."""
        opps = sum(r.opportunities for r in self.completed)
        if opps == 0:
            return 0.0
        return sum(r.opportunities - r.missed_matches for r in self.completed) / opps


def shuffle_order(n: int, shuffle_seed: int) -> list[int]:
    rng = np.random.default_rng(shuffle_seed)
    return list(rng.permutation(n))


def run_stream(
    policy,
    episodes: Sequence[Episode],
    ctx_source,
    mode: RewardMode,
    s: int = 3,
    m: int = 3,
    shuffle_seed: int = 0,
    priors: Mapping[ActionId, np.ndarray] | None = None,
    start_index: int = 0,
    stop_index: int | None = None,
    terminal_signal: Callable[[MultisetMetrics], float] | None = None,
) -> StreamResult:
    """Run episodes in shuffled order with policy state persisting throughout.

    ``start_index``/``stop_index`` bound the run to a window of the shuffled
    order; combined with checkpointing this gives exact split-run resume.
    """
    if ctx_source.dimension != policy.dimension:
        raise ValueError(
            f"policy dimension {policy.dimension} != context source dimension "
            f"{ctx_source.dimension}"
        )
    order = shuffle_order(len(episodes), shuffle_seed)
    records: list[EpisodeRecord] = []
    f1_series: list[float] = []
    regret = 0.0
    aborted = 0
    stop = len(order) if stop_index is None else min(stop_index, len(order))

    for position in range(start_index, stop):
        episode = episodes[order[position]]
        for action in sorted(episode.candidates):
            prior = priors.get(action) if priors else None
            policy.ensure_arm(action, prior)
        try:
            result = run_episode(
                policy, episode, ctx_source, mode, s, m, terminal_signal
            )
        except ContextSourceError as exc:
            aborted += 1
            records.append(
                EpisodeRecord(
                    index=position,
                    task_id=episode.task_id,
                    aborted=True,
                    abort_reason=str(exc),
                )
            )
            continue
        records.append(
            EpisodeRecord(index=position, task_id=episode.task_id, result=result)
        )
        f1_series.append(result.f1)
        regret += result.missed_matches

    return StreamResult(
        records=records,
        running_avg_f1=running_average(f1_series),
        cumulative_regret=regret,
        aborted_count=aborted,
        order=[episodes[i].task_id for i in order],
    )
