"""Synthetic linear-reward streams with known per-arm parameters.

Two stream shapes share one config:

* Round streams: every round draws a context, all arms are selectable, the
  chosen arm pays theta_star' x plus Gaussian noise (partial feedback). Used
  for cumulative-regret and parameter-recovery validation.
* Episode streams: episodes built on top of the same arms, where the ground
  truth is the top-g arms for the episode's context and the engine's binary
  matching reward applies. Used for the reward-design ablation, alpha sweeps,
  and learnable replay traces.

Generators are pure functions of (config, seed); replicas with distinct seeds
are safe to run in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bandit import ActionId
from .episodes import Episode, make_episode

CONTEXT_DISTS = ("unit_sphere_uniform", "gaussian_isotropic", "cone_first_axis")

UNIT_NORM_TOLERANCE = 1e-9


@dataclass
class SyntheticConfig:
    dimension: int
    num_arms: int
    noise_sigma: float
    horizon: int
    theta_star: dict
    context_dist: str = "unit_sphere_uniform"
    seed: int = 0
    cone_width: float = 0.5  # jitter radius for cone_first_axis

    def __post_init__(self):
        if self.context_dist not in CONTEXT_DISTS:
            raise ValueError(
                f"context_dist {self.context_dist!r} not in {CONTEXT_DISTS}"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if len(self.theta_star) != self.num_arms:
            raise ValueError("theta_star must define one vector per arm")
        for action, theta in self.theta_star.items():
            theta = np.asarray(theta, dtype=np.float64)
            if theta.shape != (self.dimension,):
                raise ValueError(f"theta_star[{action!r}] has wrong dimension")
            if abs(np.linalg.norm(theta) - 1.0) > UNIT_NORM_TOLERANCE:
                raise ValueError(f"theta_star[{action!r}] is not unit norm")
            self.theta_star[action] = theta

    @property
    def actions(self) -> list:
        return sorted(self.theta_star)


def default_config(
    dimension: int = 8,
    num_arms: int = 10,
    noise_sigma: float = 0.1,
    horizon: int = 2000,
    context_dist: str = "unit_sphere_uniform",
    seed: int = 0,
) -> SyntheticConfig:
    """Standard desk-scale config with random unit theta_star per arm."""
    rng = np.random.default_rng(seed)
    theta_star = {}
    for k in range(num_arms):
        v = rng.normal(size=dimension)
        theta_star[k] = v / np.linalg.norm(v)
    return SyntheticConfig(
        dimension=dimension,
        num_arms=num_arms,
        noise_sigma=noise_sigma,
        horizon=horizon,
        theta_star=theta_star,
        context_dist=context_dist,
        seed=seed,
    )


def draw_context(cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.context_dist == "gaussian_isotropic":
        return rng.normal(size=cfg.dimension)
    u = rng.normal(size=cfg.dimension)
    u = u / np.linalg.norm(u)
    if cfg.context_dist == "unit_sphere_uniform":
        return u
    # cone_first_axis: jitter around e1, renormalized; every context keeps a
    # first coordinate of at least (1 - w) / (1 + w).
    x = np.zeros(cfg.dimension)
    x[0] = 1.0
    x = x + cfg.cone_width * u
    return x / np.linalg.norm(x)


@dataclass
class SyntheticRound:
    context: np.ndarray
    expected_rewards: dict
    noise_sigma: float

    def realized(self, action: ActionId, rng: np.random.Generator) -> float:
        """Reward for the chosen arm only; noise is drawn at query time."""
        base = self.expected_rewards[action]
        if self.noise_sigma == 0:
            return float(base)
        return float(base + self.noise_sigma * rng.normal())


def generate_round(cfg: SyntheticConfig, rng: np.random.Generator) -> SyntheticRound:
    x = draw_context(cfg, rng)
    expected = {a: float(cfg.theta_star[a] @ x) for a in cfg.actions}
    return SyntheticRound(context=x, expected_rewards=expected, noise_sigma=cfg.noise_sigma)


def optimal_action(round_: SyntheticRound) -> ActionId:
    best = None
    best_value = -np.inf
    for action in sorted(round_.expected_rewards):
        value = round_.expected_rewards[action]
        if value > best_value:
            best_value = value
            best = action
    return best


def cumulative_regret(history: Sequence[tuple]) -> list[float]:
    """Prefix sums of expected-reward gaps for (round, chosen) pairs."""
    gaps = []
    for round_, chosen in history:
        opt = round_.expected_rewards[optimal_action(round_)]
        gaps.append(opt - round_.expected_rewards[chosen])
    return list(np.cumsum(gaps)) if gaps else []


def per_arm_estimation_errors(policy, cfg: SyntheticConfig) -> dict:
    """Squared distance between each arm's estimate and its true parameter.

    Defined for policies with a linear layer (theta_estimate); unregistered
    arms count as a zero estimate.
    """
    errors = {}
    for action in cfg.actions:
        theta_hat = (
            policy.theta_estimate(action)
            if action in getattr(policy, "arms", {})
            else np.zeros(cfg.dimension)
        )
        diff = theta_hat - cfg.theta_star[action]
        errors[action] = float(diff @ diff)
    return errors


def estimation_error(policy, cfg: SyntheticConfig) -> float:
    """Sum over arms of ||theta_hat - theta_star||^2."""
    return float(sum(per_arm_estimation_errors(policy, cfg).values()))


@dataclass
class RoundsResult:
    chosen: list
    optimal: list
    regret_curve: list
    pulls: dict
    error_checkpoints: dict  # t -> {action: squared error}
    error_curve: list  # summed error at every checkpoint interval

    @property
    def final_regret(self) -> float:
        return self.regret_curve[-1] if self.regret_curve else 0.0

    def optimal_rate(self) -> float:
        if not self.chosen:
            return 0.0
        hits = sum(1 for c, o in zip(self.chosen, self.optimal) if c == o)
        return hits / len(self.chosen)


def run_rounds(
    policy,
    cfg: SyntheticConfig,
    priors: Mapping[ActionId, np.ndarray] | None = None,
    checkpoints: Sequence[int] = (),
    error_every: int = 0,
) -> RoundsResult:
    """Play cfg.horizon rounds of the linear-reward stream with one policy.

    Only the chosen arm's realized reward reaches the policy. Regret is the
    expected gap to the per-round optimal arm, not the realized one.
    """
    rng = np.random.default_rng(cfg.seed)
    for action in cfg.actions:
        prior = priors.get(action) if priors else None
        policy.ensure_arm(action, prior)

    chosen_log: list[ActionId] = []
    optimal_log: list[ActionId] = []
    gaps: list[float] = []
    pulls: dict[ActionId, int] = {a: 0 for a in cfg.actions}
    error_checkpoints: dict[int, dict] = {}
    error_curve: list[tuple[int, float]] = []
    checkpoint_set = set(checkpoints)
    # estimation error is defined only for policies with a linear layer
    track_errors = hasattr(policy, "theta_estimate")

    for t in range(1, cfg.horizon + 1):
        round_ = generate_round(cfg, rng)
        action, _ = policy.select_with_scores(round_.context, cfg.actions)
        reward = round_.realized(action, rng)
        policy.update(action, round_.context, reward)

        opt = optimal_action(round_)
        chosen_log.append(action)
        optimal_log.append(opt)
        gaps.append(round_.expected_rewards[opt] - round_.expected_rewards[action])
        pulls[action] += 1
        if t in checkpoint_set:
            error_checkpoints[t] = {
                "errors": per_arm_estimation_errors(policy, cfg) if track_errors else {},
                "pulls": dict(pulls),
            }
        if track_errors and error_every and t % error_every == 0:
            error_curve.append((t, estimation_error(policy, cfg)))

    return RoundsResult(
        chosen=chosen_log,
        optimal=optimal_log,
        regret_curve=list(np.cumsum(gaps)),
        pulls=pulls,
        error_checkpoints=error_checkpoints,
        error_curve=error_curve,
    )


def deceptive_instance(noise_sigma: float = 0.1, horizon: int = 600, seed: int = 0):
    """Instance where the arm with the dominant prior is the worse one.

    Contexts live in a cone around e1. The trap arm's true parameter points
    50 degrees away from e1, so its score after convergence stays positive on
    every cone context (cos 50 > the cone's first-coordinate floor) but well
    below the good arm's. A greedy policy seeded with the trap prior never
    samples the good arm; a positive exploration coefficient forces discovery.

    Returns (config, priors) where priors warm-start arm 0 with 3 * e1.
    """
    d = 4
    angle = np.deg2rad(50.0)
    trap = np.zeros(d)
    trap[0] = np.cos(angle)
    trap[1] = np.sin(angle)
    good = np.zeros(d)
    good[0] = 1.0
    cfg = SyntheticConfig(
        dimension=d,
        num_arms=2,
        noise_sigma=noise_sigma,
        horizon=horizon,
        theta_star={0: trap, 1: good},
        context_dist="cone_first_axis",
        seed=seed,
        cone_width=0.5,
    )
    prior = np.zeros(d)
    prior[0] = 3.0
    priors = {0: prior, 1: np.zeros(d)}
    return cfg, priors


class FixedEpisodeContextSource:
    """Serves one fixed vector per episode for any step index."""

    def __init__(self, contexts: Mapping[str, np.ndarray], dimension: int):
        self.contexts = dict(contexts)
        self.dimension = dimension

    def context_for(self, episode: Episode, step: int) -> np.ndarray:
        del step
        return self.contexts[episode.context_key]

    def notify_action(self, episode, step, action) -> None:
        pass

    def notify_episode_end(self, episode, reason) -> None:
        pass

    def close(self) -> None:
        pass


def make_episode_set(
    cfg: SyntheticConfig,
    num_episodes: int,
    gt_size: int = 3,
    seed: int = 0,
    gt_pattern: Sequence[int] | None = None,
    margin: float = 0.0,
) -> tuple[list[Episode], FixedEpisodeContextSource]:
    """Episodes whose ground truth is built from the top-ranked arms for
    their context.

    Every episode offers all arms as candidates and serves the same context
    vector at each step, which makes the stream learnable from binary match
    rewards alone. ``gt_pattern`` gives the multiplicity of each ranked arm
    (default: gt_size arms once each); repeats exercise the per-arm cap and
    reward exploit pressure, since harvesting a multiplicity means re-picking
    a known arm instead of rotating. ``margin`` rejection-samples contexts
    until the score gap at the ground-truth boundary is at least that wide,
    which controls stream difficulty.
    """
    pattern = tuple(gt_pattern) if gt_pattern else tuple([1] * gt_size)
    if any(mult < 1 for mult in pattern):
        raise ValueError("gt_pattern multiplicities must be >= 1")
    ranks_used = len(pattern)
    if ranks_used > cfg.num_arms:
        raise ValueError("gt_pattern uses more ranks than there are arms")
    rng = np.random.default_rng(seed)
    episodes = []
    contexts = {}
    index = 0
    while len(episodes) < num_episodes:
        z = draw_context(cfg, rng)
        scores = {a: float(cfg.theta_star[a] @ z) for a in cfg.actions}
        ranked = sorted(cfg.actions, key=lambda a: (-scores[a], str(a)))
        if margin > 0.0 and ranks_used < cfg.num_arms:
            boundary = scores[ranked[ranks_used - 1]] - scores[ranked[ranks_used]]
            if boundary < margin:
                continue
        ground_truth = []
        for rank, mult in enumerate(pattern):
            ground_truth.extend([ranked[rank]] * mult)
        task_id = f"synth-{index:05d}"
        index += 1
        episodes.append(
            make_episode(
                task_id=task_id,
                candidates=cfg.actions,
                ground_truth=ground_truth,
            )
        )
        contexts[task_id] = z
    return episodes, FixedEpisodeContextSource(contexts, cfg.dimension)
