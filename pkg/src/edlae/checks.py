"""Numerical self-checks over random instances, run by the `verify` command.

Each check exercises an identity the closed-form trainer relies on: the
teacher's zero diagonal, the vanishing cross-term and additive objective
decomposition, optimality of the eigenvector projection against a dense SVD
oracle, and the fast student-Gram identity against the direct triple
product.  Checks return results; they never raise on a failed bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_form import (
    edlae_objective,
    full_rank_teacher,
    regularizer,
    student_gram,
    student_projection,
)
from .linalg import dense_svd, truncate_svd


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    bound: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: worst {self.worst:.3e} (bound {self.bound:.3e})"


def _random_instance(rng, m, n, lam=1.0, p=0.25, density=0.3):
    x = (rng.random((m, n)) < density).astype(np.float64)
    raw = x.T @ x
    upper = np.triu(raw, 1)
    g = upper + upper.T + np.diag(np.diag(raw))
    lam_diag = regularizer(np.diag(g), lam, p)
    return x, g, lam_diag


def _stacked(x, lam_diag):
    """Y = [X; 0] and Z = [X; Lambda^(1/2)] stacked over users and items."""
    n = lam_diag.size
    y = np.vstack([x, np.zeros((n, n))])
    z = np.vstack([x, np.diag(np.sqrt(lam_diag))])
    return y, z


def check_zero_diagonal(trials: int = 50, sizes=(10, 50, 200), lams=(0.1, 1.0, 10.0),
                        seed: int = 0) -> CheckResult:
    """diag(teacher) must vanish for random Gram matrices and ridge levels."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(trials):
        n = int(sizes[trial % len(sizes)])
        lam = float(lams[(trial // len(sizes)) % len(lams)])
        _, g, _ = _random_instance(rng, 2 * n, n, lam=lam, p=0.0)
        lam_diag = regularizer(np.diag(g), lam, 0.0)
        teacher = full_rank_teacher(g, lam_diag)
        worst = max(worst, float(np.abs(np.diag(teacher.b)).max()))
    return CheckResult("zero-diagonal teacher", worst <= 1e-12, worst, 1e-12)


def check_efficiency_identity(trials: int = 20, n: int = 30, seed: int = 1) -> CheckResult:
    """Fast student-Gram identity vs the direct triple product."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        _, g, lam_diag = _random_instance(rng, 3 * n, n)
        teacher = full_rank_teacher(g, lam_diag)
        fast = student_gram(teacher, g, lam_diag)
        direct = student_gram(teacher, g, lam_diag, direct=True)
        rel = float(np.linalg.norm(fast - direct) / max(np.linalg.norm(direct), 1e-300))
        worst = max(worst, rel)
    return CheckResult("student-gram identity", worst <= 1e-10, worst, 1e-10)


def check_projection_optimality(trials: int = 20, n: int = 24, seed: int = 2) -> CheckResult:
    """Z B Q_k Q_k^T must match the rank-k truncated SVD of Z B."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, g, lam_diag = _random_instance(rng, 3 * n, n)
        teacher = full_rank_teacher(g, lam_diag)
        m_student = student_gram(teacher, g, lam_diag)
        _, z = _stacked(x, lam_diag)
        zb = z @ teacher.b
        svd = dense_svd(zb)
        scale = float(np.linalg.norm(zb))
        for k in sorted({1, n // 4, n // 2}):
            model = student_projection(teacher, m_student, k)
            diff = np.linalg.norm(z @ model.matrix() - truncate_svd(svd, k))
            worst = max(worst, float(diff / scale))
    return CheckResult("projection optimality", worst <= 1e-8, worst, 1e-8)


def check_cross_term(trials: int = 20, n: int = 24, k: int = 6, seed: int = 3) -> CheckResult:
    """Residuals of the teacher are orthogonal to corrections toward the
    student, so the objective splits additively."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, g, lam_diag = _random_instance(rng, 3 * n, n)
        teacher = full_rank_teacher(g, lam_diag)
        m_student = student_gram(teacher, g, lam_diag)
        model = student_projection(teacher, m_student, k)
        y, z = _stacked(x, lam_diag)
        b = teacher.b
        uv = model.matrix()
        d_uv = uv - np.diag(np.diag(uv))
        cross = float(np.trace((y - z @ b).T @ z @ (b - d_uv)))
        y_norm2 = float(np.sum(y * y))
        worst = max(worst, abs(cross) / y_norm2)
    return CheckResult("cross-term elimination", worst <= 1e-8, worst, 1e-8)


def check_objective_decomposition(trials: int = 10, n: int = 20, k: int = 5,
                                  seed: int = 4) -> CheckResult:
    """Full objective == teacher residual + projection residual."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x, g, lam_diag = _random_instance(rng, 3 * n, n)
        teacher = full_rank_teacher(g, lam_diag)
        m_student = student_gram(teacher, g, lam_diag)
        model = student_projection(teacher, m_student, k)
        y, z = _stacked(x, lam_diag)
        uv = model.matrix()
        d_uv = uv - np.diag(np.diag(uv))
        teacher_resid = float(np.sum((y - z @ teacher.b) ** 2))
        projection_resid = float(np.sum((z @ teacher.b - z @ d_uv) ** 2))
        objective = edlae_objective(x, lam_diag, model)
        rel = abs(objective - (teacher_resid + projection_resid)) / objective
        worst = max(worst, rel)
    return CheckResult("objective decomposition", worst <= 1e-6, worst, 1e-6)


def run_invariant_checks(seed: int = 0) -> list[CheckResult]:
    return [
        check_zero_diagonal(seed=seed),
        check_efficiency_identity(seed=seed + 1),
        check_projection_optimality(seed=seed + 2),
        check_cross_term(seed=seed + 3),
        check_objective_decomposition(seed=seed + 4),
    ]
