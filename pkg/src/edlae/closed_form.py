"""Closed-form training of the low-rank zero-diagonal denoising linear AE.

Training is a two-step teacher-student pipeline over the item-item Gram
matrix G = X^T X:

1. Teacher: the full-rank least-squares optimum with its diagonal removed
   from the fit, B = I - C @ diagM(1 / diag(C)) with C = (G + Lambda)^-1.
   Its diagonal is exactly zero, which stops the model from scoring an item
   by its own presence.
2. Student: the best rank-k factorization of the teacher's predictions,
   obtained from the top-k eigenvectors Q of B^T (G + Lambda) B as V = Q,
   U = B @ Q.  The diagonal of U V^T is left free, which is what makes the
   projection a (highly accurate) approximation rather than exact.

The student Gram B^T (G + Lambda) B is evaluated through the identity
B^T (G + Lambda) B = (G + Lambda) - diagM(1 / diag(C)) @ (I + B), which
avoids one dense product; the direct triple product stays available behind
a debug flag since the identity itself is worth validating.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import InteractionMatrix
from .errors import DimensionMismatch, InvalidDropout
from .linalg import SymEigResult, sym_inverse, top_k_eig


@dataclass(frozen=True)
class EdlaeConfig:
    """Hyperparameters of one training run.

    ``beta_diagonal`` is the surrogate value assumed for diag(U V^T) during
    the student projection; it is fixed to zero (any reasonable value works
    when the item count is large, and zero keeps the solver closed-form).
    """

    lam: float
    dropout_p: float
    rank: int
    beta_diagonal: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidDropout(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.beta_diagonal != 0.0:
            raise ValueError("only beta_diagonal == 0 is supported")


@dataclass(frozen=True)
class FullRankModel:
    """Full-rank teacher: dense item-item weights with exactly zero diagonal.

    ``c_diag`` keeps diag((G + Lambda)^-1), needed by the fast student-Gram
    identity.
    """

    b: np.ndarray
    c_diag: np.ndarray


@dataclass(frozen=True)
class LowRankModel:
    """Rank-k factor pair; predictions are x @ u @ v.T per user row x."""

    u: np.ndarray
    v: np.ndarray
    rank: int
    config: EdlaeConfig | None = None
    kind: str = "edlae"

    def matrix(self) -> np.ndarray:
        return self.u @ self.v.T

    def predict(self, x_rows) -> np.ndarray:
        return np.asarray((x_rows @ self.u) @ self.v.T)


def regularizer(gram_diag: np.ndarray, lam: float, p: float) -> np.ndarray:
    """Per-item ridge diagonal lam + (p / (1 - p)) * diag(G).

    The dropout-derived term scales with each item's popularity; at p = 0 it
    collapses to a uniform ridge.
    """
    if not 0.0 <= p < 1.0:
        raise InvalidDropout(f"dropout probability must be in [0, 1), got {p}")
    if lam < 0.0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    gram_diag = np.asarray(gram_diag, dtype=np.float64)
    if gram_diag.ndim != 1:
        raise DimensionMismatch("gram_diag must be 1-d")
    if gram_diag.size and gram_diag.min() < 0:
        raise ValueError("gram_diag must be non-negative")
    return lam + (p / (1.0 - p)) * gram_diag


def _check_square_match(g, lam_diag):
    g = np.asarray(g, dtype=np.float64)
    lam_diag = np.asarray(lam_diag, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionMismatch(f"Gram matrix must be square, got shape {g.shape}")
    if lam_diag.shape != (g.shape[0],):
        raise DimensionMismatch(
            f"regularizer diagonal has length {lam_diag.shape}, expected {g.shape[0]}"
        )
    return g, lam_diag


def full_rank_teacher(g: np.ndarray, lam_diag: np.ndarray) -> FullRankModel:
    """Exact full-rank solution with the diagonal constrained to zero.

    Raises NotPositiveDefinite when G + Lambda cannot be factorized, which
    signals the regularizer is too small.
    """
    g, lam_diag = _check_square_match(g, lam_diag)
    c = sym_inverse(g + np.diag(lam_diag))
    c_diag = np.diag(c).copy()
    b = -c * (1.0 / c_diag)[None, :]
    np.fill_diagonal(b, 0.0)
    return FullRankModel(b=b, c_diag=c_diag)


def student_gram(model: FullRankModel, g: np.ndarray, lam_diag: np.ndarray,
                 direct: bool = False) -> np.ndarray:
    """Regularized Gram of the teacher's predictions, B^T (G + Lambda) B.

    Computed via the cheap diagonal-cancellation identity by default;
    ``direct=True`` forms the triple product instead (debug / validation
    path).  The result is symmetrized since the identity's right-hand side
    is symmetric only analytically.
    """
    g, lam_diag = _check_square_match(g, lam_diag)
    n = g.shape[0]
    if model.b.shape != (n, n):
        raise DimensionMismatch(f"teacher has shape {model.b.shape}, Gram has {g.shape}")
    zz = g + np.diag(lam_diag)
    if direct:
        m = model.b.T @ zz @ model.b
    else:
        d = 1.0 / model.c_diag
        m = zz - d[:, None] * (np.eye(n) + model.b)
    return 0.5 * (m + m.T)


def student_projection(model: FullRankModel, m_student: np.ndarray, k: int) -> LowRankModel:
    """Project the teacher onto rank k: V = top-k eigenvectors of the student
    Gram, U = B @ V, so U V^T = B Q_k Q_k^T."""
    n = model.b.shape[0]
    if not 1 <= k <= n:
        raise DimensionMismatch(f"rank must be in [1, {n}], got {k}")
    eig: SymEigResult = top_k_eig(m_student, k)
    v = eig.eigenvectors
    u = model.b @ v
    return LowRankModel(u=u, v=v, rank=k, config=None, kind="edlae")


def train_closed_form(g: np.ndarray, cfg: EdlaeConfig) -> LowRankModel:
    """Train a rank-k model from the Gram matrix alone.

    Composition: regularizer -> full-rank teacher -> student Gram -> top-k
    projection.  Raw interactions are never needed past the Gram matrix.
    """
    lam_diag = regularizer(np.diag(g), cfg.lam, cfg.dropout_p)
    teacher = full_rank_teacher(g, lam_diag)
    m = student_gram(teacher, g, lam_diag)
    model = student_projection(teacher, m, cfg.rank)
    return replace(model, config=cfg)


def _model_matrix(model):
    if isinstance(model, LowRankModel):
        return model.matrix()
    if isinstance(model, FullRankModel):
        return model.b
    return np.asarray(model, dtype=np.float64)


def _as_dense_rows(x):
    if isinstance(x, InteractionMatrix):
        return x.to_dense()
    return np.asarray(x, dtype=np.float64)


def edlae_objective(x, lam_diag: np.ndarray, model) -> float:
    """Exact training objective with the model's diagonal removed before
    scoring:

        || X - X (B - diagM(diag B)) ||_F^2
            + || Lambda^(1/2) (B - diagM(diag B)) ||_F^2

    where B is the model's dense matrix (U V^T for low-rank models).
    """
    x = _as_dense_rows(x)
    lam_diag = np.asarray(lam_diag, dtype=np.float64)
    b = _model_matrix(model)
    n = b.shape[0]
    if x.shape[1] != n or lam_diag.shape != (n,):
        raise DimensionMismatch(
            f"inconsistent shapes: X {x.shape}, model {b.shape}, Lambda {lam_diag.shape}"
        )
    d = b - np.diag(np.diag(b))
    resid = x - x @ d
    penalty = np.sqrt(lam_diag)[:, None] * d
    return float(np.sum(resid * resid) + np.sum(penalty * penalty))


def objective_from_gram(g: np.ndarray, lam_diag: np.ndarray, model) -> float:
    """Same objective evaluated from the Gram matrix (no raw X needed):

        tr(G) - 2 tr(G D) + tr(D^T (G + Lambda) D),  D = B - diagM(diag B).
    """
    g, lam_diag = _check_square_match(g, lam_diag)
    b = _model_matrix(model)
    if b.shape != g.shape:
        raise DimensionMismatch(f"model has shape {b.shape}, Gram has {g.shape}")
    d = b - np.diag(np.diag(b))
    zz = g + np.diag(lam_diag)
    return float(np.trace(g) - 2.0 * np.sum(g * d.T) + np.sum(d * (zz @ d)))
