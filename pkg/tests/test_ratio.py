import math

import numpy as np
import pytest

from aosr.dataio import gen_gaussian_blob
from aosr.errors import InvalidArgument
from aosr.ratio import (
    average_path_length,
    gaussian_gram,
    iforest_anomaly_score,
    iforest_fit,
    kulsif_fit,
    kulsif_objective,
    median_bandwidth,
    ratio_predict,
    weights_from_iforest,
)
from aosr.rng import Rng


class TestGaussianGram:
    def test_identical_point(self):
        g = gaussian_gram(np.array([[1.0, 2.0]]), np.array([[1.0, 2.0]]), 0.7)
        assert g[0, 0] == 1.0

    def test_distance_sigma_sqrt2(self):
        a = np.array([[0.0, 0.0]])
        b = np.array([[math.sqrt(2.0), 0.0]])
        assert gaussian_gram(a, b, 1.0)[0, 0] == pytest.approx(math.exp(-1.0))

    def test_transpose_symmetry(self):
        rng = Rng(1)
        a = rng.standard_normal((4, 3))
        b = rng.standard_normal((6, 3))
        assert np.allclose(gaussian_gram(a, b, 0.9), gaussian_gram(b, a, 0.9).T)

    def test_rejects_bad_sigma(self):
        with pytest.raises(InvalidArgument):
            gaussian_gram(np.zeros((1, 2)), np.zeros((1, 2)), 0.0)


class TestMedianBandwidth:
    def test_single_pair(self):
        assert median_bandwidth(np.array([[0.0], [3.0]])) == 3.0

    def test_identical_points_fall_back(self):
        assert median_bandwidth(np.zeros((5, 2))) == 1.0

    def test_collinear_triple(self):
        # pairwise distances {1, 1, 2} -> median 1
        assert median_bandwidth(np.array([[0.0], [1.0], [2.0]])) == 1.0

    def test_needs_two_points(self):
        with pytest.raises(InvalidArgument):
            median_bandwidth(np.array([[1.0]]))


class TestKulsif:
    def test_single_identical_center(self):
        s = np.array([[0.0, 0.0]])
        model = kulsif_fit(s, s, lam=0.25, sigma=1.0)
        assert ratio_predict(model, s)[0] == pytest.approx(0.8, abs=1e-8)
        assert kulsif_objective(model, s, s) == pytest.approx(-0.8, abs=1e-8)

    def test_zero_coefficients_objective(self):
        s = Rng(0).standard_normal((5, 2))
        t = Rng(1).standard_normal((7, 2))
        model = kulsif_fit(s, t, lam=0.1, sigma=1.0)
        zero = np.zeros(model.coefficients.shape)
        assert kulsif_objective(model, s, t, coefficients=zero) == 0.0

    def test_identity_ratio_fixture(self):
        rng = Rng(1000)
        s = gen_gaussian_blob(500, np.zeros(2), 1.0, rng.derive("s"))
        t = gen_gaussian_blob(500, np.zeros(2), 1.0, rng.derive("t"))
        model = kulsif_fit(s, t, lam=1e-2)
        w = ratio_predict(model, t)
        assert np.mean(np.abs(w - 1.0)) <= 0.15

    def test_fit_is_minimizer_against_perturbations(self):
        rng = Rng(7)
        s = rng.standard_normal((40, 2))
        t = rng.standard_normal((60, 2))
        model = kulsif_fit(s, t, lam=0.05)
        base = kulsif_objective(model, s, t)
        for i in range(100):
            delta = Rng(i).standard_normal(model.coefficients.shape)
            delta *= 1e-3 / np.linalg.norm(delta)
            perturbed = kulsif_objective(
                model, s, t, coefficients=model.coefficients + delta
            )
            assert perturbed >= base - 1e-12

    def test_objective_monotone_along_segment_to_minimizer(self):
        rng = Rng(8)
        s = rng.standard_normal((30, 2))
        t = rng.standard_normal((30, 2))
        model = kulsif_fit(s, t, lam=0.05)
        vals = [
            kulsif_objective(model, s, t, coefficients=frac * model.coefficients)
            for frac in (0.25, 0.5, 0.75, 1.0)
        ]
        assert all(b < a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_reduced_gradient_vanishes_at_solution(self):
        rng = Rng(9)
        s = rng.standard_normal((25, 2))
        t = rng.standard_normal((35, 2))
        model = kulsif_fit(s, t, lam=0.05)
        k_zz = gaussian_gram(model.centers, model.centers, model.sigma)
        k_zt = k_zz[:, 25:]
        k_zs = k_zz[:, :25]
        grad = (
            2.0 * (k_zt @ (k_zt.T @ model.coefficients)) / 35
            - 2.0 * k_zs.sum(axis=1) / 25
            + 2.0 * model.lam * (k_zz @ model.coefficients)
        )
        assert np.linalg.norm(grad) <= 1e-6

    def test_predictions_clamped_nonnegative(self):
        rng = Rng(10)
        s = rng.standard_normal((30, 2))
        t = rng.standard_normal((30, 2)) + 4.0
        model = kulsif_fit(s, t, lam=1e-3)
        queries = rng.standard_normal((200, 2)) * 3.0
        assert np.all(ratio_predict(model, queries) >= 0.0)

    def test_far_from_centers_is_tiny(self):
        s = np.zeros((3, 2))
        t = np.ones((3, 2))
        model = kulsif_fit(s, t, lam=0.1, sigma=0.5)
        far = np.array([[100.0, 100.0]])
        assert ratio_predict(model, far)[0] <= 1e-6

    def test_dimension_mismatch(self):
        model = kulsif_fit(np.zeros((2, 2)), np.ones((2, 2)), 0.1, 1.0)
        with pytest.raises(InvalidArgument):
            ratio_predict(model, np.zeros((1, 3)))

    @pytest.mark.slow
    def test_identity_error_decreases_with_n(self):
        # median L2-style error over 10 seeds shrinks as n=m grows,
        # with the regularization decaying like n^-0.9
        sizes = (100, 400, 1600)
        medians = []
        for n in sizes:
            errs = []
            for seed in range(10):
                rng = Rng(seed).derive("rate", n)
                s = gen_gaussian_blob(n, np.zeros(2), 1.0, rng.derive("s"))
                t = gen_gaussian_blob(n, np.zeros(2), 1.0, rng.derive("t"))
                model = kulsif_fit(s, t, lam=float(n) ** -0.9)
                w = ratio_predict(model, t)
                errs.append(float(np.sum((w - 1.0) ** 2) / n))
            medians.append(float(np.median(errs)))
        assert medians[1] < medians[0] and medians[2] < medians[1]


class TestIsolationForest:
    def test_c2_normalization_constant(self):
        assert average_path_length(2) == pytest.approx(0.1544313, abs=1e-6)
        assert average_path_length(1) == 0.0

    def test_midpoint_score(self):
        # a query whose mean path length equals c(psi) scores exactly 0.5
        psi = 64
        assert 2.0 ** (-average_path_length(psi) / average_path_length(psi)) == 0.5

    def test_single_point_reference_gives_leaf_trees(self):
        model = iforest_fit(np.array([[1.0, 2.0]]), n_trees=10, rng=Rng(0))
        assert all(tree.split_dim is None for tree in model.trees)

    def test_determinism(self):
        ref = Rng(3).standard_normal((200, 2))
        q = Rng(4).standard_normal((50, 2))
        a = iforest_anomaly_score(iforest_fit(ref, rng=Rng(5)), q)
        b = iforest_anomaly_score(iforest_fit(ref, rng=Rng(5)), q)
        assert np.array_equal(a, b)

    def test_rejects_zero_trees(self):
        with pytest.raises(InvalidArgument):
            iforest_fit(np.zeros((3, 2)), n_trees=0, rng=Rng(0))

    def test_depth_limit(self):
        ref = Rng(6).standard_normal((512, 2))
        model = iforest_fit(ref, n_trees=20, subsample=256, rng=Rng(7))
        limit = math.ceil(math.log2(256))

        def max_depth(node):
            if node.split_dim is None:
                return node.depth
            return max(max_depth(node.left), max_depth(node.right))

        assert all(max_depth(tree) <= limit for tree in model.trees)

    def test_center_scores_below_far_point_20_seeds(self):
        hits = 0
        for seed in range(20):
            rng = Rng(seed)
            ref = gen_gaussian_blob(400, np.zeros(2), 1.0, rng.derive("ref"))
            model = iforest_fit(ref, rng=rng.derive("fit"))
            scores = iforest_anomaly_score(model, np.array([[0.0, 0.0], [10.0, 0.0]]))
            hits += scores[0] < scores[1]
        assert hits == 20

    def test_scores_in_unit_interval_and_weights_complement(self):
        rng = Rng(8)
        ref = rng.standard_normal((300, 3))
        model = iforest_fit(ref, rng=rng.derive("fit"))
        q = rng.standard_normal((100, 3)) * 5.0
        scores = iforest_anomaly_score(model, q)
        weights = weights_from_iforest(model, q)
        assert np.all((scores >= 0) & (scores <= 1))
        assert np.allclose(weights, 1.0 - scores)

    def test_row_permutation_invariance(self):
        rng = Rng(9)
        ref = rng.standard_normal((200, 2))
        model = iforest_fit(ref, rng=rng.derive("fit"))
        q = rng.standard_normal((40, 2))
        perm = Rng(10).permutation(40)
        assert np.array_equal(
            iforest_anomaly_score(model, q)[perm],
            iforest_anomaly_score(model, q[perm]),
        )

    def test_split_values_inside_node_range(self):
        # each tree's subsample is a subset of the reference, so a split value
        # inside the subsample's range must lie inside the range of the full
        # reference restricted along the same path
        ref = Rng(11).standard_normal((256, 2))
        model = iforest_fit(ref, n_trees=5, subsample=256, rng=Rng(12))

        def check(node, data):
            if node.split_dim is None:
                assert node.size >= 0
                return
            col = data[:, node.split_dim]
            assert col.min() <= node.split_value <= col.max()
            mask = col < node.split_value
            check(node.left, data[mask])
            check(node.right, data[~mask])

        for tree in model.trees:
            check(tree, ref)
