"""Hybrid verifiable rewards, group-relative advantages and evaluation metrics."""

__version__ = "0.1.0"

from .boxes import BoundingBox, Detection, TaskType, iou
from .evolution import HashingEmbedder, evolution_rewards, similarity_matrix
from .grpo import (
    GrpoConfig,
    KLEstimator,
    PolicyLogProbs,
    RewardWeights,
    aggregate_reward,
    group_advantages,
    grpo_objective,
    kl_penalty,
    surrogate_term,
)
from .metrics import EvalRecord, MetricReport, acc_at_t, coco_map, evaluate, load_eval_file, pass_at_1
from .parsing import RolloutRecord, extract_sections, format_reward, parse_ovd_answer, parse_rec_answer
from .scorer import HybridRewardScorer
from .simulate import SimConfig, TemplatePolicySimulator, TemplateWorld, policy_entropy, simulate
from .task_rewards import (
    MatchingPolicy,
    match_score,
    match_sets,
    normalize_answer,
    ovd_reward,
    rec_reward,
    route_reward,
    vqa_reward,
)

__all__ = [
    "BoundingBox",
    "Detection",
    "EvalRecord",
    "GrpoConfig",
    "HashingEmbedder",
    "HybridRewardScorer",
    "KLEstimator",
    "MatchingPolicy",
    "MetricReport",
    "PolicyLogProbs",
    "RewardWeights",
    "RolloutRecord",
    "SimConfig",
    "TaskType",
    "TemplatePolicySimulator",
    "TemplateWorld",
    "acc_at_t",
    "aggregate_reward",
    "coco_map",
    "evaluate",
    "evolution_rewards",
    "extract_sections",
    "format_reward",
    "group_advantages",
    "grpo_objective",
    "iou",
    "kl_penalty",
    "load_eval_file",
    "match_score",
    "match_sets",
    "normalize_answer",
    "ovd_reward",
    "parse_ovd_answer",
    "parse_rec_answer",
    "pass_at_1",
    "policy_entropy",
    "rec_reward",
    "route_reward",
    "similarity_matrix",
    "simulate",
    "surrogate_term",
    "vqa_reward",
]
