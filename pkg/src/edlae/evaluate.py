"""Fold-in scoring of held-out users and ranking metrics with standard errors.

Scoring feeds each held-out user's fold-in items through the model and masks
those items to -inf so they can never be recommended back.  Rankings break
score ties by ascending item index (stable sort), which keeps every metric
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_form import FullRankModel, LowRankModel
from .dataset import InteractionMatrix
from .errors import DimensionMismatch, EmptyHoldout


@dataclass(frozen=True)
class MetricResult:
    """Per-user ranking metric with its mean and standard error."""

    metric: str
    cutoff: int
    mean: float
    stderr: float
    per_user: np.ndarray


def score_users(model, foldin: InteractionMatrix) -> np.ndarray:
    """Score all items for each held-out user from their fold-in row.

    ``model`` may be a LowRankModel, a FullRankModel, or a dense item-item
    matrix.  Fold-in positions are masked to -inf afterwards.
    """
    if isinstance(model, LowRankModel):
        item_dim = model.u.shape[0]
    elif isinstance(model, FullRankModel):
        item_dim = model.b.shape[0]
    else:
        model = np.asarray(model, dtype=np.float64)
        item_dim = model.shape[0]
    if item_dim != foldin.num_items:
        raise DimensionMismatch(
            f"model covers {item_dim} items, fold-in matrix has {foldin.num_items}"
        )
    xf = foldin.to_csr()
    if isinstance(model, LowRankModel):
        scores = model.predict(xf)
    elif isinstance(model, FullRankModel):
        scores = np.asarray(xf @ model.b)
    else:
        scores = np.asarray(xf @ model)
    scores = scores.astype(np.float64, copy=False)
    scores[foldin.users, foldin.items] = -np.inf
    return scores


def _check_eval_inputs(scores, holdout):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise DimensionMismatch("scores must be 2-d (users x items)")
    if (holdout.num_users, holdout.num_items) != scores.shape:
        raise DimensionMismatch(
            f"scores shape {scores.shape} does not match holdout "
            f"({holdout.num_users}, {holdout.num_items})"
        )
    counts = holdout.user_counts()
    if scores.shape[0] == 0 or counts.min(initial=1) == 0:
        raise EmptyHoldout("every scored user needs at least one holdout item")
    return scores, counts


def _top_lists(scores, cutoff):
    width = min(cutoff, scores.shape[1])
    # Stable sort of -scores ranks by descending score, ties by item index.
    return np.argsort(-scores, axis=1, kind="stable")[:, :width]


def _aggregate(name, cutoff, per_user):
    num = per_user.size
    stderr = float(per_user.std(ddof=1) / np.sqrt(num)) if num > 1 else 0.0
    return MetricResult(name, cutoff, float(per_user.mean()), stderr, per_user)


def ndcg_at_k(scores: np.ndarray, holdout: InteractionMatrix, cutoff: int = 100) -> MetricResult:
    """Binary-relevance nDCG truncated at ``cutoff``.

    DCG discounts a hit at rank r by 1/log2(r + 1); the ideal DCG places one
    hit at each of the first min(cutoff, #holdout) ranks.
    """
    scores, counts = _check_eval_inputs(scores, holdout)
    num_users = scores.shape[0]
    top = _top_lists(scores, cutoff)
    rel = np.zeros(scores.shape, dtype=bool)
    rel[holdout.users, holdout.items] = True
    gains = rel[np.arange(num_users)[:, None], top]
    discounts = 1.0 / np.log2(np.arange(2, top.shape[1] + 2))
    dcg = gains @ discounts
    ideal_hits = np.minimum(counts, top.shape[1])
    idcg = np.concatenate([[0.0], np.cumsum(discounts)])[ideal_hits]
    return _aggregate("ndcg", cutoff, dcg / idcg)


def recall_at_k(scores: np.ndarray, holdout: InteractionMatrix, cutoff: int) -> MetricResult:
    """Fraction of holdout items retrieved in the top ``cutoff``, normalized
    by min(cutoff, #holdout) so a full retrieval scores 1."""
    scores, counts = _check_eval_inputs(scores, holdout)
    num_users = scores.shape[0]
    top = _top_lists(scores, cutoff)
    rel = np.zeros(scores.shape, dtype=bool)
    rel[holdout.users, holdout.items] = True
    hits = rel[np.arange(num_users)[:, None], top].sum(axis=1)
    denom = np.minimum(counts, cutoff)
    return _aggregate("recall", cutoff, hits / denom)
