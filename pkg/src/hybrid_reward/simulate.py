"""Toy GRPO run on a softmax policy over fixed reasoning templates.

Each template is a reasoning text with its own vocabulary and a fixed
correctness. One "salient" template is slightly more correct than the rest.
With correctness alone the group-relative update drives the policy onto the
salient template; the diversity reward holds probability on the others.
Policy entropy and the top template's probability track the collapse.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .evolution import HashingEmbedder, evolution_rewards, token_bucket
from .grpo import GrpoConfig, KLEstimator, RewardWeights, group_advantages


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = np.exp(z - z.max())
    return z / z.sum()


def policy_entropy(logits) -> float:
    """Shannon entropy (nats) of ``softmax(logits)``."""
    p = softmax(logits)
    nz = p > 0
    h = -float(np.sum(p[nz] * np.log(p[nz])))
    return min(max(h, 0.0), math.log(len(p)))


@dataclass(frozen=True)
class Template:
    think_text: str
    embedding: np.ndarray = field(repr=False, compare=False)
    correctness: float


@dataclass(frozen=True)
class TemplateWorld:
    templates: tuple[Template, ...]
    require_salient: bool = field(default=True, compare=False)

    def __post_init__(self):
        if len(self.templates) < 2:
            raise ValueError("a world needs at least two templates")
        c = self.correctness
        if np.any(c <= 0.80) or np.any(c > 1.0):
            raise ValueError("template correctness must lie in (0.80, 1]")
        if self.require_salient and np.sum(c == c.max()) != 1:
            raise ValueError("exactly one template must have strictly maximal correctness")

    @property
    def M(self) -> int:
        return len(self.templates)

    @property
    def correctness(self) -> np.ndarray:
        return np.array([t.correctness for t in self.templates])

    @property
    def salient(self) -> int:
        return int(np.argmax(self.correctness))

    @classmethod
    def build(
        cls,
        correctness: Sequence[float],
        words_per_template: int = 6,
        embedder: Optional[HashingEmbedder] = None,
        require_salient: bool = True,
    ) -> "TemplateWorld":
        """Templates whose tokens occupy pairwise disjoint embedding buckets.

        ``require_salient=False`` admits ties for the top correctness, for
        control runs without a salient template.
        """
        embedder = embedder if embedder is not None else HashingEmbedder()
        dim, seed = int(embedder.n_features), int(embedder.seed)
        if len(correctness) * words_per_template > dim:
            raise ValueError("not enough embedding buckets for disjoint template vocabularies")
        used: set[int] = set()
        texts = []
        candidate = 0
        for m in range(len(correctness)):
            words = []
            while len(words) < words_per_template:
                word = f"cue{m}w{candidate}"
                candidate += 1
                bucket = token_bucket(word, dim, seed)
                if bucket not in used:
                    used.add(bucket)
                    words.append(word)
            texts.append(" ".join(words))
        vectors = embedder.transform(texts)
        return cls(tuple(Template(t, v, float(c)) for t, v, c in zip(texts, vectors, correctness)), require_salient)

    @classmethod
    def default(cls, M: int = 8, salient: float = 0.95, others: float = 0.90, **kwargs) -> "TemplateWorld":
        return cls.build([salient] + [others] * (M - 1), **kwargs)


class _LookupEmbedder:
    def __init__(self, world: TemplateWorld):
        self._table = {t.think_text: t.embedding for t in world.templates}

    def transform(self, texts):
        return np.array([self._table[t] for t in texts])


@dataclass(frozen=True)
class SimConfig:
    group_size: int = 15
    steps: int = 300
    learning_rate: float = 0.1
    weights: RewardWeights = RewardWeights()
    seed: int = 0
    stochastic_correctness: bool = False
    clipped: bool = False
    epsilon_clip: float = 0.2
    beta_kl: float = 0.04
    kl_estimator: KLEstimator = KLEstimator.UNBIASED_K3
    epsilon_std: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "kl_estimator", KLEstimator.coerce(self.kl_estimator))
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class SimTrajectory:
    entropy: np.ndarray
    mean_reward: np.ndarray
    mean_evol: np.ndarray
    top_template_prob: np.ndarray
    visits: np.ndarray  # (steps, M) counts of sampled templates
    final_logits: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.entropy)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "entropy", "mean_reward", "mean_evol", "top_template_prob"])
            for i in range(self.steps):
                writer.writerow(
                    [i + 1, repr(float(self.entropy[i])), repr(float(self.mean_reward[i])),
                     repr(float(self.mean_evol[i])), repr(float(self.top_template_prob[i]))]
                )

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "final_entropy": float(self.entropy[-1]),
            "final_top_template_prob": float(self.top_template_prob[-1]),
            "first_mean_reward": float(self.mean_reward[0]),
            "last_mean_reward": float(self.mean_reward[-1]),
            "total_visits": self.visits.sum(axis=0).tolist(),
        }


def simulate(world: TemplateWorld, cfg: SimConfig = SimConfig()) -> SimTrajectory:
    """Run ``cfg.steps`` group-relative policy-gradient updates from uniform logits."""
    rng = np.random.default_rng(cfg.seed)
    M, G = world.M, cfg.group_size
    correctness = world.correctness
    texts = [t.think_text for t in world.templates]
    embedder = _LookupEmbedder(world)
    grpo = GrpoConfig(epsilon_clip=cfg.epsilon_clip, beta_kl=cfg.beta_kl, epsilon_std=cfg.epsilon_std)
    w = cfg.weights
    ref = np.full(M, 1.0 / M)

    logits = np.zeros(M)
    entropy = np.empty(cfg.steps)
    mean_reward = np.empty(cfg.steps)
    mean_evol = np.empty(cfg.steps)
    top = np.empty(cfg.steps)
    visits = np.zeros((cfg.steps, M), dtype=int)

    for step in range(cfg.steps):
        p = softmax(logits)
        choice = rng.choice(M, size=G, p=p)
        if cfg.stochastic_correctness:
            rpcr = (rng.random(G) < correctness[choice]).astype(float)
        else:
            rpcr = correctness[choice]
        srar = np.ones(G)
        evol = evolution_rewards([(texts[c], 1.0, r) for c, r in zip(choice, rpcr)], embedder)
        totals = w.lambda_srar * srar + w.lambda_rpcr * rpcr + w.lambda_evol * evol
        adv = group_advantages(totals, grpo)

        coef = adv
        if cfg.clipped:
            # old == current policy within a step, so the clip never binds.
            # KL gradients w.r.t. the uniform reference, as multiples of grad log p:
            # exact log-ratio -> 1, k3 -> 1 - ref/p
            if cfg.kl_estimator is KLEstimator.EXACT_RATIO:
                kl_coef = np.ones(G)
            else:
                kl_coef = 1.0 - ref[choice] / p[choice]
            coef = adv - grpo.beta_kl * kl_coef
        grad = np.bincount(choice, weights=coef, minlength=M) - p * coef.sum()
        logits = logits + cfg.learning_rate * grad

        p_new = softmax(logits)
        entropy[step] = policy_entropy(logits)
        mean_reward[step] = totals.mean()
        mean_evol[step] = evol.mean()
        top[step] = p_new.max()
        visits[step] = np.bincount(choice, minlength=M)

    return SimTrajectory(entropy, mean_reward, mean_evol, top, visits, logits)


def without_evolution(cfg: SimConfig) -> SimConfig:
    w = cfg.weights
    return replace(cfg, weights=RewardWeights(w.lambda_srar, w.lambda_rpcr, 0.0))


def _run_one(args):
    world, cfg = args
    return simulate(world, cfg)


def sweep(world: TemplateWorld, cfg: SimConfig, seeds: Sequence[int], parallel: int = 1) -> list[SimTrajectory]:
    """Run one simulation per seed, optionally in worker processes."""
    jobs = [(world, replace(cfg, seed=int(s))) for s in seeds]
    if parallel <= 1:
        return [_run_one(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_run_one, jobs))


def compare_evolution(world: TemplateWorld, cfg: SimConfig, seeds: Sequence[int], parallel: int = 1) -> dict:
    """Paired runs with and without the diversity reward on identical seeds."""
    with_evol = sweep(world, cfg, seeds, parallel)
    no_evol = sweep(world, without_evolution(cfg), seeds, parallel)
    h_with = np.array([t.entropy[-1] for t in with_evol])
    h_without = np.array([t.entropy[-1] for t in no_evol])
    return {
        "seeds": [int(s) for s in seeds],
        "weights": list(cfg.weights.as_tuple()),
        "final_entropy_with_evol": h_with.tolist(),
        "final_entropy_without_evol": h_without.tolist(),
        "median_with_evol": float(np.median(h_with)),
        "median_without_evol": float(np.median(h_without)),
        "paired_win_fraction": float(np.mean(h_with > h_without)),
        "median_entropy_gap": float(np.median(h_with - h_without)),
    }


class TemplatePolicySimulator(BaseEstimator):
    """Estimator wrapper around :func:`simulate`.

    ``fit(world)`` runs the simulation and stores ``trajectory_`` and
    ``logits_``; with no world the default eight-template world is used.
    """

    def __init__(
        self,
        group_size: int = 15,
        steps: int = 300,
        learning_rate: float = 0.1,
        lambda_srar: float = 0.1,
        lambda_rpcr: float = 0.7,
        lambda_evol: float = 0.2,
        seed: int = 0,
        stochastic_correctness: bool = False,
        clipped: bool = False,
    ):
        self.group_size = group_size
        self.steps = steps
        self.learning_rate = learning_rate
        self.lambda_srar = lambda_srar
        self.lambda_rpcr = lambda_rpcr
        self.lambda_evol = lambda_evol
        self.seed = seed
        self.stochastic_correctness = stochastic_correctness
        self.clipped = clipped

    def config(self) -> SimConfig:
        return SimConfig(
            group_size=self.group_size,
            steps=self.steps,
            learning_rate=self.learning_rate,
            weights=RewardWeights(self.lambda_srar, self.lambda_rpcr, self.lambda_evol),
            seed=self.seed,
            stochastic_correctness=self.stochastic_correctness,
            clipped=self.clipped,
        )

    def fit(self, world: Optional[TemplateWorld] = None, y=None):
        self.world_ = world if world is not None else TemplateWorld.default()
        self.trajectory_ = simulate(self.world_, self.config())
        self.logits_ = self.trajectory_.final_logits
        return self

    def predict_proba(self, X=None) -> np.ndarray:
        """Final policy over templates."""
        return softmax(self.logits_)


def config_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["weights"] = list(cfg.weights.as_tuple())
    d["kl_estimator"] = cfg.kl_estimator.value
    return d
