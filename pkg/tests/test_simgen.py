import numpy as np
import pytest
from scipy.stats import chi2, norm

from sampleplan.rng import RngSeed
from sampleplan.simgen import (
    GaussianClassSpec,
    LabeledDataset,
    estimate_class_moments,
    growing_sequence,
    load_csv,
    load_npz,
    make_problem,
    matrix_root,
    sample_mvn,
    sample_problem,
    save_csv,
    save_npz,
    stratified_draw,
)

CELL_SIZES = {"rbc": 372, "leu": 569, "mcf": 558, "bt": 532, "oci": 518}


def random_spd(rng, d):
    basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eigvals = rng.uniform(0.1, 3.0, size=d)
    return (basis * eigvals) @ basis.T


class TestMatrixRoot:
    def test_identity(self):
        np.testing.assert_allclose(matrix_root(np.eye(4)), np.eye(4), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(
            matrix_root(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14
        )

    def test_reconstruction_on_random_spd(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            d = int(rng.integers(2, 51))
            cov = random_spd(rng, d)
            root = matrix_root(cov)
            resid = np.linalg.norm(root @ root.T - cov) / np.linalg.norm(cov)
            assert resid <= 1e-8

    def test_rank_deficient_is_clipped(self):
        # outer product has one positive eigenvalue, rest ~0 (some slightly
        # negative numerically)
        v = np.arange(1.0, 6.0)
        cov = np.outer(v, v)
        root = matrix_root(cov)
        np.testing.assert_allclose(root @ root.T, cov, atol=1e-10)

    def test_asymmetric_rejected(self):
        cov = np.eye(3)
        cov[0, 1] = 1e-6
        with pytest.raises(ValueError, match="symmetric"):
            matrix_root(cov)

    def test_negative_eigenvalue_rejected(self):
        cov = np.diag([1.0, -0.5])
        with pytest.raises(ValueError, match="positive semidefinite"):
            matrix_root(cov)


class TestSampleMvn:
    def test_moments_recovered(self):
        spec = GaussianClassSpec("a", np.zeros(4), np.eye(4))
        data = sample_mvn(spec, 100_000, RngSeed(5))
        bound = 4.0 / np.sqrt(100_000)
        assert np.abs(data.features.mean(axis=0)).max() < bound
        cov = np.cov(data.features, rowvar=False)
        assert np.abs(cov - np.eye(4)).max() < 0.05

    def test_zero_covariance_returns_means(self):
        spec = GaussianClassSpec("a", np.array([1.0, -2.0]), np.zeros((2, 2)))
        data = sample_mvn(spec, 50, RngSeed(1))
        np.testing.assert_allclose(data.features, np.tile([1.0, -2.0], (50, 1)))

    def test_same_seed_identical(self):
        spec = GaussianClassSpec("a", np.zeros(3), np.eye(3))
        a = sample_mvn(spec, 100, RngSeed(9))
        b = sample_mvn(spec, 100, RngSeed(9))
        np.testing.assert_array_equal(a.features, b.features)

    def test_different_streams_differ(self):
        spec = GaussianClassSpec("a", np.zeros(3), np.eye(3))
        a = sample_mvn(spec, 100, RngSeed(9, (0,)))
        b = sample_mvn(spec, 100, RngSeed(9, (1,)))
        assert not np.array_equal(a.features, b.features)

    def test_mardia_normality_not_rejected(self):
        # skewness and kurtosis tests at alpha = 0.01 on 1e4 draws, 5 dims
        rng = np.random.default_rng(21)
        cov = random_spd(rng, 5)
        mean = rng.standard_normal(5)
        spec = GaussianClassSpec("a", mean, cov)
        data = sample_mvn(spec, 10_000, RngSeed(12))
        X = data.features
        n, d = X.shape
        centered = X - X.mean(axis=0)
        sample_cov = centered.T @ centered / n
        solve = np.linalg.solve(sample_cov, centered.T)  # (d, n)
        # skewness: mean over pairs of (x_i' S^-1 x_j)^3, in blocks
        b1 = 0.0
        block = 1000
        for start in range(0, n, block):
            g = centered[start : start + block] @ solve
            b1 += float((g**3).sum())
        b1 /= n * n
        skew_stat = n * b1 / 6.0
        df = d * (d + 1) * (d + 2) / 6.0
        assert skew_stat < chi2.ppf(0.995, df)
        # kurtosis: mean squared Mahalanobis norm
        m2 = np.einsum("ij,ji->i", centered, solve)
        b2 = float((m2**2).mean())
        kurt_z = (b2 - d * (d + 2)) / np.sqrt(8.0 * d * (d + 2) / n)
        assert abs(kurt_z) < norm.ppf(0.995)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            GaussianClassSpec("a", np.zeros(3), np.eye(2))


class TestMoments:
    def test_two_point_hand_computation(self):
        data = LabeledDataset(np.array([[0.0, 0.0], [2.0, 2.0]]), np.array(["a", "a"]))
        (spec,) = estimate_class_moments(data)
        np.testing.assert_allclose(spec.mean, [1.0, 1.0])
        np.testing.assert_allclose(spec.covariance, [[2.0, 2.0], [2.0, 2.0]])

    def test_round_trip_from_sampler(self):
        true = GaussianClassSpec("a", np.array([3.0, -1.0]), np.array([[2.0, 0.6], [0.6, 1.0]]))
        data = sample_mvn(true, 100_000, RngSeed(3))
        (est,) = estimate_class_moments(data)
        np.testing.assert_allclose(est.mean, true.mean, atol=0.03)
        np.testing.assert_allclose(est.covariance, true.covariance, atol=0.05)

    def test_constant_data_zero_covariance(self):
        data = LabeledDataset(np.ones((5, 2)), np.repeat("a", 5))
        (spec,) = estimate_class_moments(data)
        np.testing.assert_allclose(spec.covariance, np.zeros((2, 2)))

    def test_singleton_class_rejected(self):
        data = LabeledDataset(np.ones((1, 2)), np.array(["a"]))
        with pytest.raises(ValueError, match="at least 2"):
            estimate_class_moments(data)


class TestMakeProblem:
    def test_pairwise_separation(self):
        specs = make_problem(5, 10, separation=3.0)
        means = np.array([s.mean for s in specs])
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(means[i] - means[j]) == pytest.approx(3.0)

    def test_zero_separation_collapses_means(self):
        specs = make_problem(3, 4, separation=0.0)
        means = np.array([s.mean for s in specs])
        np.testing.assert_allclose(means, 0.0, atol=1e-12)

    def test_shared_unit_covariance(self):
        specs = make_problem(2, 6, separation=2.0, shared_cov=True)
        for s in specs:
            np.testing.assert_array_equal(s.covariance, np.eye(6))

    def test_unshared_covariances_differ(self):
        specs = make_problem(2, 6, separation=2.0, shared_cov=False, rng=4)
        assert not np.allclose(specs[0].covariance, specs[1].covariance)
        for s in specs:
            matrix_root(s.covariance)  # must be valid PSD

    def test_dim_too_small(self):
        with pytest.raises(ValueError, match="simplex"):
            make_problem(5, 3, separation=1.0)


class TestStratifiedDraw:
    def make_pool(self):
        rng = np.random.default_rng(0)
        labels = np.concatenate([np.repeat(c, n) for c, n in CELL_SIZES.items()])
        feats = rng.standard_normal((labels.size, 3))
        return LabeledDataset(feats, labels)

    def test_remainder_sizes_match_table(self):
        pool = self.make_pool()
        small, rest = stratified_draw(pool, 25, RngSeed(2))
        assert small.class_counts() == {c: 25 for c in CELL_SIZES}
        assert rest.class_counts() == {c: n - 25 for c, n in CELL_SIZES.items()}
        assert rest.class_counts() == {
            "rbc": 347, "leu": 544, "mcf": 533, "bt": 507, "oci": 493,
        }

    def test_full_class_leaves_empty_remainder(self):
        pool = LabeledDataset(np.arange(8.0).reshape(4, 2), np.array(["a"] * 2 + ["b"] * 2))
        small, rest = stratified_draw(pool, 2, RngSeed(0))
        assert len(rest) == 0

    def test_same_seed_same_split(self):
        pool = self.make_pool()
        a, _ = stratified_draw(pool, 10, RngSeed(42))
        b, _ = stratified_draw(pool, 10, RngSeed(42))
        np.testing.assert_array_equal(a.features, b.features)

    def test_insufficient_class(self):
        pool = LabeledDataset(np.zeros((3, 1)), np.array(["a", "a", "b"]))
        with pytest.raises(ValueError, match="cannot draw"):
            stratified_draw(pool, 2, RngSeed(0))

    def test_draw_plus_remainder_is_pool(self):
        pool = self.make_pool()
        small, rest = stratified_draw(pool, 25, RngSeed(2))
        combined = np.vstack([small.features, rest.features])
        assert combined.shape == pool.features.shape
        # as multisets of rows
        key = lambda arr: np.lexsort(arr.T)
        np.testing.assert_array_equal(
            combined[key(combined)], pool.features[key(pool.features)]
        )


class TestGrowingSequence:
    def test_nested_prefixes_from_generator(self):
        specs = make_problem(5, 6, separation=2.0)
        sizes = list(range(2, 26))
        sets = growing_sequence(specs, sizes, RngSeed(8))
        assert len(sets) == 24
        for smaller, larger in zip(sets, sets[1:]):
            rows_small = {tuple(r) for r in smaller.features}
            rows_large = {tuple(r) for r in larger.features}
            assert rows_small < rows_large

    def test_union_of_increments_is_largest(self):
        specs = make_problem(2, 3, separation=1.0)
        sets = growing_sequence(specs, [2, 5, 9], RngSeed(1))
        rows_last = {tuple(r) for r in sets[-1].features}
        union = set()
        for s in sets:
            union |= {tuple(r) for r in s.features}
        assert union == rows_last

    def test_single_size(self):
        specs = make_problem(2, 3, separation=1.0)
        sets = growing_sequence(specs, [7], RngSeed(1))
        assert len(sets) == 1
        assert sets[0].class_counts() == {"c1": 7, "c2": 7}

    def test_non_ascending_rejected(self):
        specs = make_problem(2, 3, separation=1.0)
        with pytest.raises(ValueError, match="ascending"):
            growing_sequence(specs, [5, 5], RngSeed(1))

    def test_growing_from_pool(self):
        rng = np.random.default_rng(3)
        labels = np.repeat(["a", "b"], 30)
        pool = LabeledDataset(rng.standard_normal((60, 2)), labels)
        sets = growing_sequence(pool, [3, 10, 30], RngSeed(4))
        for smaller, larger in zip(sets, sets[1:]):
            rows_small = {tuple(r) for r in smaller.features}
            rows_large = {tuple(r) for r in larger.features}
            assert rows_small < rows_large
        assert sets[-1].class_counts() == {"a": 30, "b": 30}


class TestPersistence:
    def test_csv_round_trip(self, tmp_path):
        specs = make_problem(2, 3, separation=1.5)
        data = sample_problem(specs, 10, RngSeed(6))
        path = tmp_path / "data.csv"
        save_csv(data, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.features, data.features)
        assert back.labels.tolist() == data.labels.tolist()

    def test_csv_header(self, tmp_path):
        data = LabeledDataset(np.zeros((1, 2)), np.array(["a"]))
        path = tmp_path / "d.csv"
        save_csv(data, path)
        assert path.read_text().splitlines()[0] == "label,f1,f2"

    def test_npz_round_trip_with_provenance(self, tmp_path):
        specs = make_problem(3, 4, separation=2.0)
        data = sample_problem(specs, 5, RngSeed(13))
        path = tmp_path / "data.npz"
        save_npz(data, path)
        back = load_npz(path)
        np.testing.assert_array_equal(back.features, data.features)
        assert back.labels.tolist() == data.labels.tolist()
        assert back.provenance == data.provenance
        assert back.provenance["generator"] == "gaussian-problem"
        assert "spec_hash" in back.provenance
