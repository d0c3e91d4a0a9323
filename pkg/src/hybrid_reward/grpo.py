"""Reward aggregation, group-relative advantages and GRPO objective terms.

Only objective *values* are computed here, from sequence-level
log-probabilities supplied by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .utils.validation import check_non_negative


class KLEstimator(str, Enum):
    EXACT_RATIO = "exact"
    UNBIASED_K3 = "k3"

    @classmethod
    def coerce(cls, value: "KLEstimator | str") -> "KLEstimator":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class RewardWeights:
    lambda_srar: float = 0.1
    lambda_rpcr: float = 0.7
    lambda_evol: float = 0.2

    def __post_init__(self):
        for name in ("lambda_srar", "lambda_rpcr", "lambda_evol"):
            object.__setattr__(self, name, check_non_negative(getattr(self, name), name))

    @classmethod
    def parse(cls, text: str) -> "RewardWeights":
        """Build from ``"a,b,c"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"weights need three comma-separated numbers, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda_srar, self.lambda_rpcr, self.lambda_evol)


@dataclass(frozen=True)
class GrpoConfig:
    epsilon_clip: float = 0.2
    beta_kl: float = 0.04
    kl_estimator: KLEstimator = KLEstimator.UNBIASED_K3
    epsilon_std: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.epsilon_clip < 1.0:
            raise ValueError(f"epsilon_clip must lie in (0, 1), got {self.epsilon_clip}")
        check_non_negative(self.beta_kl, "beta_kl")
        if not self.epsilon_std > 0:
            raise ValueError("epsilon_std must be positive")
        object.__setattr__(self, "kl_estimator", KLEstimator.coerce(self.kl_estimator))


@dataclass(frozen=True)
class PolicyLogProbs:
    logp_new: float
    logp_old: float
    logp_ref: float


@dataclass(frozen=True)
class RewardBreakdown:
    r_srar: float
    r_rpcr: float
    r_evol: float
    total: float


@dataclass
class GroupScore:
    rewards: list[float]
    advantages: list[float]
    group_mean: float
    group_std: float

    @property
    def G(self) -> int:
        return len(self.rewards)


def aggregate_reward(r_srar: float, r_rpcr: float, r_evol: float, weights: RewardWeights = RewardWeights()) -> RewardBreakdown:
    total = weights.lambda_srar * r_srar + weights.lambda_rpcr * r_rpcr + weights.lambda_evol * r_evol
    return RewardBreakdown(float(r_srar), float(r_rpcr), float(r_evol), float(total))


def group_advantages(rewards: Sequence[float], cfg: GrpoConfig = GrpoConfig()) -> np.ndarray:
    """Standardise rewards within the group using the population std.

    Groups whose std is at most ``cfg.epsilon_std`` get all-zero advantages.
    """
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rewards must be a non-empty 1-D sequence")
    centred = r - r.mean()
    std = float(np.sqrt(np.mean(centred**2)))
    if std <= cfg.epsilon_std:
        return np.zeros_like(r)
    return centred / std


def score_group(rewards: Sequence[float], cfg: GrpoConfig = GrpoConfig()) -> GroupScore:
    r = np.asarray(rewards, dtype=float)
    adv = group_advantages(r, cfg)
    return GroupScore(r.tolist(), adv.tolist(), float(r.mean()), float(r.std()))


def surrogate_term(lp: PolicyLogProbs, advantage: float, cfg: GrpoConfig = GrpoConfig()) -> float:
    ratio = math.exp(lp.logp_new - lp.logp_old)
    clipped = min(max(ratio, 1.0 - cfg.epsilon_clip), 1.0 + cfg.epsilon_clip)
    return min(ratio * advantage, clipped * advantage)


def kl_penalty(lp: PolicyLogProbs, cfg: GrpoConfig = GrpoConfig()) -> float:
    """Per-sample KL estimate between the current and reference policies.

    ``exact`` is the signed log-ratio ``logp_new - logp_ref``; ``k3`` is
    ``r - log r - 1`` with ``r = p_ref / p_new``, non-negative pointwise.
    """
    if cfg.kl_estimator is KLEstimator.EXACT_RATIO:
        return lp.logp_new - lp.logp_ref
    log_r = lp.logp_ref - lp.logp_new
    # expm1 keeps precision when the policies are close
    return math.expm1(log_r) - log_r


def grpo_objective(group: Sequence[tuple[PolicyLogProbs, float]], cfg: GrpoConfig = GrpoConfig()) -> float:
    if len(group) == 0:
        raise ValueError("group must be non-empty")
    terms = [surrogate_term(lp, adv, cfg) - cfg.beta_kl * kl_penalty(lp, cfg) for lp, adv in group]
    return math.fsum(terms) / len(terms)
