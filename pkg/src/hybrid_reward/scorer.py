"""End-to-end group scoring: raw rollouts in, reward breakdowns and advantages out."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .boxes import TaskType
from .evolution import RPCR_GATE, SRAR_GATE, HashingEmbedder, eligible_mask, evolution_rewards
from .grpo import GrpoConfig, RewardWeights, aggregate_reward, group_advantages
from .parsing import RolloutRecord, parse_answer
from .task_rewards import MatchingPolicy, RewardParams, route_reward


@dataclass
class RolloutScore:
    format_valid: bool
    r_srar: float
    r_rpcr: float
    r_evol: float
    total: float
    advantage: float
    eligible: bool
    parsed: Any = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "format_valid": self.format_valid,
            "r_srar": self.r_srar,
            "r_rpcr": self.r_rpcr,
            "r_evol": self.r_evol,
            "total": self.total,
            "advantage": self.advantage,
            "eligible": self.eligible,
        }


@dataclass
class GroupResult:
    rollouts: list[RolloutScore]
    mean: float
    std: float
    eligible_count: int

    @property
    def totals(self) -> np.ndarray:
        return np.array([r.total for r in self.rollouts])

    @property
    def advantages(self) -> np.ndarray:
        return np.array([r.advantage for r in self.rollouts])


class HybridRewardScorer(BaseEstimator):
    """Score a group of sampled rollouts against one ground truth.

    Each rollout gets a format reward, a task-routed correctness reward
    (computed only when the format is valid), and a group-level diversity
    reward over the reasoning sections of rollouts passing both gates. The
    weighted total is standardised within the group to give advantages.

    The scorer holds no learned state; ``fit`` validates the parameters and
    builds the helper objects, and ``score_group`` fits lazily.

    Parameters
    ----------
    lambda_srar, lambda_rpcr, lambda_evol : float
        Component weights of the total reward.
    matching : {"one_to_one", "greedy", "literal"}
        OVD matching policy.
    strict_format : bool
        Reject non-whitespace text outside the tag pairs.
    iou_high, iou_low, rec_partial_factor, soft_match_score : float
        Thresholds of the REC and OVD correctness rewards.
    srar_gate, rpcr_gate : float
        Eligibility thresholds for the diversity reward (strict ``>``).
    epsilon_std : float
        Groups with reward std at or below this get zero advantages.
    embedder : object with ``transform(texts) -> ndarray``, optional
        Defaults to ``HashingEmbedder(n_features, embed_seed)``.
    n_features, embed_seed : int
        Settings of the default embedder.
    """

    def __init__(
        self,
        lambda_srar: float = 0.1,
        lambda_rpcr: float = 0.7,
        lambda_evol: float = 0.2,
        matching: str = "one_to_one",
        strict_format: bool = True,
        iou_high: float = 0.5,
        iou_low: float = 0.3,
        rec_partial_factor: float = 0.8,
        soft_match_score: float = 0.5,
        srar_gate: float = SRAR_GATE,
        rpcr_gate: float = RPCR_GATE,
        epsilon_std: float = 1e-8,
        embedder=None,
        n_features: int = 256,
        embed_seed: int = 0,
    ):
        self.lambda_srar = lambda_srar
        self.lambda_rpcr = lambda_rpcr
        self.lambda_evol = lambda_evol
        self.matching = matching
        self.strict_format = strict_format
        self.iou_high = iou_high
        self.iou_low = iou_low
        self.rec_partial_factor = rec_partial_factor
        self.soft_match_score = soft_match_score
        self.srar_gate = srar_gate
        self.rpcr_gate = rpcr_gate
        self.epsilon_std = epsilon_std
        self.embedder = embedder
        self.n_features = n_features
        self.embed_seed = embed_seed

    def fit(self, X=None, y=None):
        self.weights_ = RewardWeights(self.lambda_srar, self.lambda_rpcr, self.lambda_evol)
        self.params_ = RewardParams(
            iou_high=self.iou_high,
            iou_low=self.iou_low,
            rec_partial_factor=self.rec_partial_factor,
            soft_match_score=self.soft_match_score,
            matching=MatchingPolicy.coerce(self.matching),
        )
        self.grpo_ = GrpoConfig(epsilon_std=self.epsilon_std)
        self.embedder_ = self.embedder if self.embedder is not None else HashingEmbedder(self.n_features, self.embed_seed).fit()
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            self.fit()

    def score_group(self, rollouts: Sequence[str], task, ground_truth) -> GroupResult:
        """Score one group; raises ``TaskMismatchError`` for a bad ground truth."""
        self._check_fitted()
        if len(rollouts) == 0:
            raise ValueError("rollouts must be non-empty")
        task = TaskType.coerce(task)
        records = [RolloutRecord.from_text(t, strict=self.strict_format) for t in rollouts]

        srar = [1.0 if r.format_valid else 0.0 for r in records]
        parsed = [parse_answer(task, r.answer_text) if r.format_valid else None for r in records]
        rpcr = [route_reward(task, p, ground_truth, self.params_) if ok else 0.0 for p, ok in zip(parsed, srar)]
        if not any(srar):
            # validates the ground truth even when nothing was routed
            route_reward(task, None, ground_truth, self.params_)
        evol = evolution_rewards(
            [(r.think_text, s, c) for r, s, c in zip(records, srar, rpcr)],
            self.embedder_,
            srar_gate=self.srar_gate,
            rpcr_gate=self.rpcr_gate,
        )
        eligible = eligible_mask(srar, rpcr, self.srar_gate, self.rpcr_gate)

        breakdowns = [aggregate_reward(s, c, float(e), self.weights_) for s, c, e in zip(srar, rpcr, evol)]
        totals = np.array([b.total for b in breakdowns])
        adv = group_advantages(totals, self.grpo_)
        scores = [
            RolloutScore(
                format_valid=rec.format_valid,
                r_srar=b.r_srar,
                r_rpcr=float(b.r_rpcr),
                r_evol=b.r_evol,
                total=b.total,
                advantage=float(a),
                eligible=bool(el),
                parsed=p,
            )
            for rec, b, a, el, p in zip(records, breakdowns, adv, eligible, parsed)
        ]
        return GroupResult(scores, float(totals.mean()), float(totals.std()), int(eligible.sum()))

    def score_many(self, groups) -> list[GroupResult]:
        """Score ``(rollouts, task, ground_truth)`` triples."""
        return [self.score_group(r, t, g) for r, t, g in groups]
