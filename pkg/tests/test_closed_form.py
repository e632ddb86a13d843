"""Tests for the closed-form teacher-student trainer and its objective."""

import numpy as np
import pytest

from edlae.closed_form import (
    EdlaeConfig,
    FullRankModel,
    LowRankModel,
    edlae_objective,
    full_rank_teacher,
    objective_from_gram,
    regularizer,
    student_gram,
    student_projection,
    train_closed_form,
)
from edlae.errors import DimensionMismatch, InvalidDropout, NotPositiveDefinite
from edlae.linalg import dense_svd, truncate_svd

from oracles import binary_instance, exact_gram, gd_min_uv


class TestRegularizer:
    def test_zero_dropout_is_uniform(self):
        np.testing.assert_array_equal(regularizer(np.array([3.0, 7.0]), 0.5, 0.0), [0.5, 0.5])

    def test_half_dropout(self):
        # p/(1-p) = 1 at p = 0.5
        np.testing.assert_array_equal(regularizer(np.array([4.0, 9.0]), 1.0, 0.5), [5.0, 10.0])

    def test_all_zero(self):
        np.testing.assert_array_equal(regularizer(np.array([1.0, 1.0]), 0.0, 0.0), [0.0, 0.0])

    def test_invalid_dropout(self):
        with pytest.raises(InvalidDropout):
            regularizer(np.ones(2), 1.0, 1.0)
        with pytest.raises(InvalidDropout):
            regularizer(np.ones(2), 1.0, -0.1)

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            regularizer(np.ones(2), -1.0, 0.0)


class TestFullRankTeacher:
    def test_zero_gram(self):
        teacher = full_rank_teacher(np.zeros((2, 2)), np.ones(2))
        np.testing.assert_allclose(teacher.b, 0.0, atol=1e-14)
        np.testing.assert_allclose(teacher.c_diag, 1.0, atol=1e-14)

    def test_hand_2x2(self):
        g = np.array([[2.0, 1.0], [1.0, 2.0]])
        teacher = full_rank_teacher(g, np.ones(2))
        expected = np.array([[0.0, 1.0 / 3.0], [1.0 / 3.0, 0.0]])
        assert np.abs(teacher.b - expected).max() <= 1e-12
        np.testing.assert_allclose(teacher.c_diag, [3.0 / 8.0, 3.0 / 8.0], atol=1e-14)

    def test_diagonal_gram_gives_zero_teacher(self):
        teacher = full_rank_teacher(np.diag([4.0, 9.0, 1.0]), np.full(3, 0.5))
        np.testing.assert_allclose(teacher.b, 0.0, atol=1e-14)

    def test_diagonal_exactly_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = (rng.random((50, 12)) < 0.4).astype(float)
            g = exact_gram(x)
            teacher = full_rank_teacher(g, regularizer(np.diag(g), 1.0, 0.5))
            assert np.abs(np.diag(teacher.b)).max() == 0.0

    def test_zero_regularization_fails(self):
        with pytest.raises(NotPositiveDefinite):
            full_rank_teacher(np.zeros((2, 2)), np.zeros(2))

    def test_positive_c_diag(self):
        x = binary_instance(1, m=30, n=6)
        g = exact_gram(x)
        teacher = full_rank_teacher(g, regularizer(np.diag(g), 0.5, 0.25))
        assert (teacher.c_diag > 0).all()


class TestStudentGram:
    def test_zero_teacher_gives_zero(self):
        g = np.diag([3.0, 5.0, 2.0])
        lam = np.full(3, 0.5)
        teacher = full_rank_teacher(g, lam)
        m = student_gram(teacher, g, lam)
        assert np.abs(m).max() <= 1e-12 * np.abs(g).max()

    def test_hand_2x2_matches_triple_product(self):
        g = np.array([[2.0, 1.0], [1.0, 2.0]])
        lam = np.ones(2)
        teacher = full_rank_teacher(g, lam)
        fast = student_gram(teacher, g, lam)
        direct = teacher.b.T @ (g + np.diag(lam)) @ teacher.b
        assert np.abs(fast - direct).max() <= 1e-12

    def test_identity_matches_direct_random(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = (rng.random((80, 20)) < 0.3).astype(float)
            g = exact_gram(x)
            lam = regularizer(np.diag(g), 2.0, 0.25)
            teacher = full_rank_teacher(g, lam)
            fast = student_gram(teacher, g, lam)
            direct = student_gram(teacher, g, lam, direct=True)
            rel = np.linalg.norm(fast - direct) / np.linalg.norm(direct)
            assert rel <= 1e-10

    def test_output_symmetric(self):
        x = binary_instance(3, m=50, n=10)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.0, 0.5)
        m = student_gram(full_rank_teacher(g, lam), g, lam)
        assert np.array_equal(m, m.T)

    def test_dimension_mismatch(self):
        g = np.eye(3)
        teacher = full_rank_teacher(g, np.ones(3))
        with pytest.raises(DimensionMismatch):
            student_gram(teacher, np.eye(4), np.ones(4))


class TestStudentProjection:
    def test_full_rank_reproduces_teacher(self):
        x = binary_instance(4, m=40, n=8)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.0, 0.25)
        teacher = full_rank_teacher(g, lam)
        m = student_gram(teacher, g, lam)
        model = student_projection(teacher, m, 8)
        assert np.abs(model.matrix() - teacher.b).max() <= 1e-10

    def test_zero_teacher(self):
        g = np.diag([2.0, 3.0, 4.0])
        lam = np.ones(3)
        teacher = full_rank_teacher(g, lam)
        model = student_projection(teacher, student_gram(teacher, g, lam), 2)
        np.testing.assert_allclose(model.u, 0.0, atol=1e-12)

    def test_matches_truncated_svd_of_predictions(self):
        # rank-k student must equal the best rank-k fit to Z @ B
        rng = np.random.default_rng(5)
        x = (rng.random((30, 6)) < 0.5).astype(float)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.0, 0.25)
        teacher = full_rank_teacher(g, lam)
        m = student_gram(teacher, g, lam)
        z = np.vstack([x, np.diag(np.sqrt(lam))])
        zb = z @ teacher.b
        svd = dense_svd(zb)
        for k in (1, 2, 3):
            model = student_projection(teacher, m, k)
            diff = np.linalg.norm(z @ model.matrix() - truncate_svd(svd, k))
            assert diff <= 1e-8 * np.linalg.norm(zb)

    def test_v_columns_orthonormal(self):
        x = binary_instance(6, m=40, n=10)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.0, 0.5)
        teacher = full_rank_teacher(g, lam)
        model = student_projection(teacher, student_gram(teacher, g, lam), 4)
        np.testing.assert_allclose(model.v.T @ model.v, np.eye(4), atol=1e-8)


class TestTrainClosedForm:
    def test_diagonal_gram_zero_model(self):
        g = np.diag([5.0, 2.0, 8.0])
        for k in (1, 2, 3):
            model = train_closed_form(g, EdlaeConfig(lam=1.0, dropout_p=0.0, rank=k))
            np.testing.assert_allclose(model.u, 0.0, atol=1e-12)

    def test_config_attached(self):
        g = exact_gram(binary_instance(7))
        cfg = EdlaeConfig(lam=2.0, dropout_p=0.5, rank=3)
        model = train_closed_form(g, cfg)
        assert model.config == cfg and model.kind == "edlae" and model.rank == 3

    def test_full_rank_objective_equals_teacher(self):
        x = binary_instance(8, m=40, n=8)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.0, 0.25)
        teacher = full_rank_teacher(g, lam)
        model = train_closed_form(g, EdlaeConfig(lam=1.0, dropout_p=0.25, rank=8))
        obj_model = edlae_objective(x, lam, model)
        obj_teacher = edlae_objective(x, lam, teacher)
        assert abs(obj_model - obj_teacher) <= 1e-8 * obj_teacher

    def test_objective_monotone_in_rank(self):
        rng = np.random.default_rng(9)
        for _ in range(3):
            x = (rng.random((60, 16)) < 0.35).astype(float)
            g = exact_gram(x)
            lam = regularizer(np.diag(g), 1.0, 0.25)
            objs = [
                edlae_objective(x, lam, train_closed_form(g, EdlaeConfig(1.0, 0.25, k)))
                for k in (1, 2, 4, 8)
            ]
            assert all(b <= a * (1 + 1e-12) for a, b in zip(objs, objs[1:]))

    def test_near_optimal_versus_gradient_descent(self):
        # smoke version of the acceptance criterion (fewer restarts)
        for seed in (0, 1):
            x = binary_instance(seed, m=40, n=8, density=0.3)
            g = exact_gram(x)
            cfg = EdlaeConfig(lam=5.0, dropout_p=0.5, rank=2)
            lam = regularizer(np.diag(g), cfg.lam, cfg.dropout_p)
            obj_cf = edlae_objective(x, lam, train_closed_form(g, cfg))
            obj_gd = gd_min_uv(x, lam, 2, restarts=10, steps=2000, seed=seed)
            assert abs(obj_cf - obj_gd) <= 0.02 * obj_gd


class TestObjective:
    def test_zero_model(self):
        x = binary_instance(10, m=20, n=5)
        model = LowRankModel(u=np.zeros((5, 2)), v=np.zeros((5, 2)), rank=2)
        assert edlae_objective(x, np.ones(5), model) == pytest.approx(float(np.sum(x * x)))

    def test_identity_model_fully_cancelled(self):
        # U V^T = I has only diagonal mass, all removed before scoring
        x = binary_instance(11, m=20, n=4)
        model = LowRankModel(u=np.eye(4), v=np.eye(4), rank=4)
        assert edlae_objective(x, np.ones(4), model) == pytest.approx(float(np.sum(x * x)))

    def test_hand_2x2_value(self):
        # X = [[1,1],[0,1]], lambda = 1, p = 0: teacher [[0,1/2],[1/3,0]],
        # objective = ||X - X B||^2 + ||B||^2 = 65/36 + 13/36 = 13/6
        x = np.array([[1.0, 1.0], [0.0, 1.0]])
        b = np.array([[0.0, 0.5], [1.0 / 3.0, 0.0]])
        model = LowRankModel(u=b, v=np.eye(2), rank=2)
        assert edlae_objective(x, np.ones(2), model) == pytest.approx(13.0 / 6.0, abs=1e-12)

    def test_teacher_matches_hand_value(self):
        x = np.array([[1.0, 1.0], [0.0, 1.0]])
        g = exact_gram(x)
        teacher = full_rank_teacher(g, np.ones(2))
        expected = np.array([[0.0, 0.5], [1.0 / 3.0, 0.0]])
        assert np.abs(teacher.b - expected).max() <= 1e-12

    def test_cross_term_vanishes(self):
        rng = np.random.default_rng(12)
        for _ in range(4):
            x = (rng.random((60, 14)) < 0.3).astype(float)
            g = exact_gram(x)
            lam = regularizer(np.diag(g), 1.0, 0.25)
            teacher = full_rank_teacher(g, lam)
            model = student_projection(teacher, student_gram(teacher, g, lam), 4)
            n = g.shape[0]
            y = np.vstack([x, np.zeros((n, n))])
            z = np.vstack([x, np.diag(np.sqrt(lam))])
            uv = model.matrix()
            d_uv = uv - np.diag(np.diag(uv))
            cross = np.trace((y - z @ teacher.b).T @ z @ (teacher.b - d_uv))
            assert abs(cross) <= 1e-8 * np.sum(y * y)

    def test_additive_decomposition(self):
        rng = np.random.default_rng(13)
        x = (rng.random((50, 12)) < 0.35).astype(float)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.0, 0.25)
        teacher = full_rank_teacher(g, lam)
        model = student_projection(teacher, student_gram(teacher, g, lam), 3)
        n = g.shape[0]
        y = np.vstack([x, np.zeros((n, n))])
        z = np.vstack([x, np.diag(np.sqrt(lam))])
        uv = model.matrix()
        d_uv = uv - np.diag(np.diag(uv))
        teacher_resid = float(np.sum((y - z @ teacher.b) ** 2))
        projection_resid = float(np.sum((z @ (teacher.b - d_uv)) ** 2))
        obj = edlae_objective(x, lam, model)
        assert abs(obj - (teacher_resid + projection_resid)) <= 1e-6 * obj

    def test_gram_form_matches_dense_form(self):
        x = binary_instance(14, m=50, n=10)
        g = exact_gram(x)
        lam = regularizer(np.diag(g), 1.5, 0.25)
        model = train_closed_form(g, EdlaeConfig(lam=1.5, dropout_p=0.25, rank=4))
        dense = edlae_objective(x, lam, model)
        from_gram = objective_from_gram(g, lam, model)
        assert abs(dense - from_gram) <= 1e-9 * dense

    def test_dimension_mismatch(self):
        model = LowRankModel(u=np.zeros((3, 1)), v=np.zeros((3, 1)), rank=1)
        with pytest.raises(DimensionMismatch):
            edlae_objective(np.ones((2, 4)), np.ones(3), model)
