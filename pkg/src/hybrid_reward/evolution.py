"""Path-evolution reward: penalise reasoning texts that resemble their group peers.

Reasoning texts of the eligible rollouts in a group are embedded, compared by
cosine similarity, and each eligible rollout is rewarded with one minus its
mean similarity to the other eligible rollouts.
"""

from __future__ import annotations

import hashlib
import re
from typing import Optional, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

SRAR_GATE = 0.99
RPCR_GATE = 0.80

_TOKEN_RE = re.compile(r"[^\W_]+")


class Embedder(Protocol):
    def transform(self, texts: Sequence[str]) -> np.ndarray: ...


def token_bucket(token: str, n_features: int, seed: int = 0) -> int:
    """Bucket index of a token.

    The hash is BLAKE2b with an 8-byte digest over the UTF-8 bytes of
    ``f"{seed}:{token}"``, read as a big-endian unsigned integer, modulo
    ``n_features``. It does not depend on the interpreter's hash seed.
    """
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % n_features


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


class HashingEmbedder(TransformerMixin, BaseEstimator):
    """Bag-of-tokens embedder with hashed buckets, scaled to unit norm.

    Stateless: ``fit`` only validates parameters. Texts with no tokens map to
    the zero vector.

    Parameters
    ----------
    n_features : int, default=256
        Embedding dimension.
    seed : int, default=0
        Mixed into the token hash; changes the bucket layout.
    """

    def __init__(self, n_features: int = 256, seed: int = 0):
        self.n_features = n_features
        self.seed = seed

    def fit(self, X=None, y=None):
        if int(self.n_features) < 1:
            raise ValueError(f"n_features must be positive, got {self.n_features}")
        return self

    def transform(self, X: Sequence[str]) -> np.ndarray:
        self.fit()
        if isinstance(X, str):
            raise TypeError("transform expects a sequence of texts, not a single string")
        out = np.zeros((len(X), int(self.n_features)))
        for row, text in enumerate(X):
            for tok in tokenize(text or ""):
                out[row, token_bucket(tok, int(self.n_features), int(self.seed))] += 1.0
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        np.divide(out, norms, out=out, where=norms > 0)
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.transform([text])[0]


def similarity_matrix(vectors) -> np.ndarray:
    """Cosine similarities with a zeroed diagonal; zero vectors have similarity 0."""
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2:
        raise ValueError("vectors must form a 2-D array of equal-length rows")
    norms = np.linalg.norm(v, axis=1)
    unit = np.zeros_like(v)
    nz = norms > 0
    unit[nz] = v[nz] / norms[nz, None]
    sim = np.clip(unit @ unit.T, -1.0, 1.0)
    # identical non-zero vectors are exactly parallel; keep rounding out of it
    same = (unit[:, None, :] == unit[None, :, :]).all(axis=-1) & nz[:, None] & nz[None, :]
    sim[same] = 1.0
    np.fill_diagonal(sim, 0.0)
    return sim


def eligible_mask(srar, rpcr, srar_gate: float = SRAR_GATE, rpcr_gate: float = RPCR_GATE) -> np.ndarray:
    return (np.asarray(srar, dtype=float) > srar_gate) & (np.asarray(rpcr, dtype=float) > rpcr_gate)


def evolution_rewards(
    group: Sequence[tuple[Optional[str], float, float]],
    embedder: Optional[Embedder] = None,
    srar_gate: float = SRAR_GATE,
    rpcr_gate: float = RPCR_GATE,
    gate: bool = True,
) -> np.ndarray:
    """Diversity reward per rollout from ``(think_text, r_srar, r_rpcr)`` triples.

    Only rollouts passing both gates take part; the rest score 0. A lone
    eligible rollout scores 1. Otherwise rollout ``i`` scores
    ``clip(1 - mean_j S_ij, 0, 1)`` over the other eligible ``j``.
    ``gate=False`` treats every rollout as eligible (testing only).
    """
    if len(group) == 0:
        raise ValueError("group must be non-empty")
    texts = [t or "" for t, _, _ in group]
    if gate:
        mask = eligible_mask([s for _, s, _ in group], [r for _, _, r in group], srar_gate, rpcr_gate)
    else:
        mask = np.ones(len(group), dtype=bool)

    rewards = np.zeros(len(group))
    idx = np.flatnonzero(mask)
    k = idx.size
    if k == 0:
        return rewards
    if k == 1:
        rewards[idx] = 1.0
        return rewards

    embedder = embedder if embedder is not None else HashingEmbedder()
    sim = similarity_matrix(embedder.transform([texts[i] for i in idx]))
    mean_sim = sim.sum(axis=1) / (k - 1)
    rewards[idx] = np.clip(1.0 - mean_sim, 0.0, 1.0)
    return rewards
