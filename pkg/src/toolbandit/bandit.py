"""Disjoint linear-UCB decision layer with rank-one inverse maintenance.

Each arm (candidate action) keeps ridge statistics for the linear reward model
r = theta' x: the inverse covariance A^-1 with A = I + sum of x x' over the
contexts the arm was updated on, and the reward accumulator b. The inverse is
never recomputed from A; updates apply the Sherman-Morrison correction
directly, so selection costs O(d^2) per arm and updates O(d^2) total.

Warm start: an arm initialized with a prior vector p has A^-1 = I and b = p,
hence theta_hat = p exactly, so initial scores reproduce whatever semantic
prior the embedding of the action name encodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

ActionId = Union[str, int]

DEFAULT_ALPHA = 0.1

# Radicands in [-RADICAND_TOLERANCE, 0) are rounding noise and clamp to zero;
# anything lower means the maintained inverse lost positive definiteness.
RADICAND_TOLERANCE = 1e-9
DENOMINATOR_FLOOR = 1e-12


class DimensionMismatchError(ValueError):
    """Context or prior vector length differs from the policy dimension."""


class UnknownActionError(KeyError):
    """Action id has no arm registered in this policy."""


class StatisticsCorruptionError(RuntimeError):
    """Maintained inverse covariance is no longer positive definite."""


class NoValidActionError(RuntimeError):
    """Selection was requested over an empty valid set (arms exhausted)."""


def as_context(values, dimension: int | None = None) -> np.ndarray:
    """Validate and return a context as a float64 1-D array."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    if dimension is not None and x.shape[0] != dimension:
        raise DimensionMismatchError(
            f"context has dimension {x.shape[0]}, policy expects {dimension}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("context contains non-finite entries")
    return x


@dataclass
class ArmState:
    """Per-action sufficient statistics with a maintained inverse covariance."""

    inv_covariance: np.ndarray
    reward_vector: np.ndarray
    selection_count: int = 0
    _theta: np.ndarray | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.reward_vector.shape[0]

    def theta(self) -> np.ndarray:
        """Current estimate A^-1 b, cached until the next update."""
        if self._theta is None:
            self._theta = self.inv_covariance @ self.reward_vector
        return self._theta

    def base_score(self, ctx: np.ndarray) -> float:
        return float(self.theta() @ ctx)

    def exploration_width(self, ctx: np.ndarray) -> float:
        """sqrt(x' A^-1 x), the confidence width along ctx."""
        radicand = float(ctx @ self.inv_covariance @ ctx)
        if radicand < -RADICAND_TOLERANCE:
            raise StatisticsCorruptionError(
                f"negative radicand {radicand:.3e} in exploration width"
            )
        return float(np.sqrt(max(radicand, 0.0)))

    def ucb_score(self, ctx: np.ndarray, alpha: float) -> float:
        return self.base_score(ctx) + alpha * self.exploration_width(ctx)

    def update(self, ctx: np.ndarray, reward: float) -> None:
        """Rank-one update: A += x x', b += r x, applied to the inverse.

        Sherman-Morrison: A^-1 <- A^-1 - (k k') / (1 + x' k) with k = A^-1 x.
        The result is re-symmetrized to stop floating-point drift over long
        streams.
        """
        k = self.inv_covariance @ ctx
        denom = 1.0 + float(ctx @ k)
        if denom <= DENOMINATOR_FLOOR:
            raise StatisticsCorruptionError(
                f"Sherman-Morrison denominator {denom:.3e} is not positive"
            )
        updated = self.inv_covariance - np.outer(k, k) / denom
        self.inv_covariance = (updated + updated.T) / 2.0
        self.reward_vector = self.reward_vector + reward * ctx
        self.selection_count += 1
        self._theta = None


def init_arm(prior, dimension: int | None = None) -> ArmState:
    """Fresh arm: A^-1 = I and b = prior, so theta equals the prior bitwise."""
    p = as_context(prior, dimension)
    d = p.shape[0]
    arm = ArmState(inv_covariance=np.eye(d), reward_vector=p.copy())
    arm._theta = p.copy()
    return arm


class BanditPolicy:
    """LinUCB policy over a map of arms sharing one context dimension.

    Single-writer: callers serialize select/update on an instance. Tie-breaks
    in selection are deterministic (ascending action id), so runs replay
    exactly. ``rng_seed`` is recorded for provenance and reserved for
    stochastic tie-breaking, which is disabled by design.
    """

    kind = "linucb"

    def __init__(
        self,
        dimension: int,
        alpha: float = DEFAULT_ALPHA,
        rng_seed: int = 0,
        normalize_context: bool = False,
    ):
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        self.dimension = int(dimension)
        self.alpha = float(alpha)
        self.rng_seed = int(rng_seed)
        self.normalize_context = bool(normalize_context)
        self.arms: dict[ActionId, ArmState] = {}

    def _ctx(self, ctx) -> np.ndarray:
        x = as_context(ctx, self.dimension)
        if self.normalize_context:
            norm = float(np.linalg.norm(x))
            if norm > 0:
                x = x / norm
        return x

    def add_arm(self, action: ActionId, prior=None) -> ArmState:
        if action in self.arms:
            raise ValueError(f"arm {action!r} already exists")
        if prior is None:
            prior = np.zeros(self.dimension)
        arm = init_arm(prior, self.dimension)
        self.arms[action] = arm
        return arm

    def ensure_arm(self, action: ActionId, prior=None) -> ArmState:
        if action not in self.arms:
            self.add_arm(action, prior)
        return self.arms[action]

    def _arm(self, action: ActionId) -> ArmState:
        try:
            return self.arms[action]
        except KeyError:
            raise UnknownActionError(action) from None

    def theta_estimate(self, action: ActionId) -> np.ndarray:
        return self._arm(action).theta()

    def score_base(self, action: ActionId, ctx) -> float:
        return self._arm(action).base_score(self._ctx(ctx))

    def score_ucb(self, action: ActionId, ctx, alpha: float | None = None) -> float:
        a = self.alpha if alpha is None else alpha
        return self._arm(action).ucb_score(self._ctx(ctx), a)

    def scores(self, ctx, valid: Iterable[ActionId]) -> dict[ActionId, float]:
        x = self._ctx(ctx)
        return {a: self._arm(a).ucb_score(x, self.alpha) for a in sorted(valid)}

    def select_with_scores(
        self, ctx, valid: Iterable[ActionId]
    ) -> tuple[ActionId, dict[ActionId, float]]:
        """Argmax of the UCB score over the valid set.

        Iterates in ascending action-id order with a strict comparison, so
        exact ties resolve to the smallest id.
        """
        ordered = sorted(valid)
        if not ordered:
            raise NoValidActionError("arms exhausted: valid set is empty")
        x = self._ctx(ctx)
        scored: dict[ActionId, float] = {}
        best_action = None
        best_score = -np.inf
        for action in ordered:
            s = self._arm(action).ucb_score(x, self.alpha)
            scored[action] = s
            if s > best_score:
                best_score = s
                best_action = action
        return best_action, scored

    def select(self, ctx, valid: Iterable[ActionId]) -> ActionId:
        return self.select_with_scores(ctx, valid)[0]

    def update(self, action: ActionId, ctx, reward: float) -> None:
        """Update exactly one arm with (ctx, reward); all others untouched."""
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        self._arm(action).update(self._ctx(ctx), float(reward))

    # Serialization hooks used by the checkpoint layer.
    def state_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "alpha": self.alpha,
            "rng_seed": self.rng_seed,
            "normalize_context": self.normalize_context,
            "arms": {
                str(a): {
                    "id_type": "int" if isinstance(a, int) else "str",
                    "inv_covariance": arm.inv_covariance,
                    "reward_vector": arm.reward_vector,
                    "selection_count": arm.selection_count,
                }
                for a, arm in self.arms.items()
            },
        }

    @classmethod
    def from_state_dict(cls, state: Mapping) -> "BanditPolicy":
        policy = cls(
            dimension=state["dimension"],
            alpha=state["alpha"],
            rng_seed=state["rng_seed"],
            normalize_context=state["normalize_context"],
        )
        for key, arm_state in state["arms"].items():
            action: ActionId = int(key) if arm_state["id_type"] == "int" else key
            arm = ArmState(
                inv_covariance=np.array(arm_state["inv_covariance"], dtype=np.float64),
                reward_vector=np.array(arm_state["reward_vector"], dtype=np.float64),
                selection_count=int(arm_state["selection_count"]),
            )
            policy.arms[action] = arm
        return policy
