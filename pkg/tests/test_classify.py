import numpy as np
import pytest

from sampleplan.classify import (
    LdaModel,
    effective_latent_count,
    fit_lda,
    fit_pls,
    fit_pls_lda,
    load_model,
    predict,
    predict_lda,
    save_model,
)
from sampleplan.errors import SolverError
from sampleplan.rng import RngSeed
from sampleplan.simgen import (
    GaussianClassSpec,
    LabeledDataset,
    make_problem,
    sample_problem,
)
from sampleplan.special import norm_cdf


def accuracy(model, data):
    pred = model.predict(data.features)
    return float(np.mean(pred == data.labels))


class TestFitLda:
    def test_symmetric_two_class_threshold_near_zero(self):
        rng = np.random.default_rng(0)
        n = 20_000
        x = np.concatenate([rng.normal(-1, 1, n), rng.normal(1, 1, n)])[:, None]
        y = np.repeat(["neg", "pos"], n)
        model = fit_lda(LabeledDataset(x, y))
        # decision threshold: score_neg(x) == score_pos(x)
        w = model.weights
        b = model.biases
        threshold = (b[0] - b[1]) / (w[0, 1] - w[0, 0])
        assert threshold == pytest.approx(0.0, abs=0.05)

    def test_accuracy_near_bayes_limit(self):
        delta = 2.0
        specs = make_problem(2, 5, separation=delta)
        train = sample_problem(specs, 5000, RngSeed(1))
        test = sample_problem(specs, 20_000, RngSeed(2))
        model = fit_lda(train)
        assert accuracy(model, test) == pytest.approx(norm_cdf(delta / 2), abs=0.01)

    def test_five_class_difficulty_ordering(self):
        # two far-away easy classes, a middling pair, and one class wedged
        # between two neighbours: sensitivities must order easy > mid > hard
        d = 8
        means = {
            "easy1": np.r_[8.0, 0, 0, np.zeros(d - 3)],
            "easy2": np.r_[0, 8.0, 0, np.zeros(d - 3)],
            "mid1": np.r_[0, 0, 0.0, np.zeros(d - 3)],
            "hard": np.r_[0, 0, 2.2, np.zeros(d - 3)],
            "mid2": np.r_[0, 0, 4.4, np.zeros(d - 3)],
        }
        specs = [GaussianClassSpec(c, m, np.eye(d)) for c, m in means.items()]
        train = sample_problem(specs, 10_000, RngSeed(3))
        test = sample_problem(specs, 20_000, RngSeed(4))
        model = fit_lda(train)
        pred = model.predict(test.features)
        sens = {
            c: float(np.mean(pred[test.labels == c] == c)) for c in means
        }
        assert sens["easy1"] > 0.99 and sens["easy2"] > 0.99
        assert sens["easy1"] > sens["mid1"] > sens["hard"]
        assert sens["easy2"] > sens["mid2"] > sens["hard"]

    def test_singular_without_ridge(self):
        # 3 samples in 5 dims: pooled covariance is rank deficient
        data = LabeledDataset(np.eye(3, 5), np.array(["a", "a", "b"]))
        with pytest.raises(SolverError, match="singular"):
            fit_lda(data, ridge=0.0)
        fit_lda(data, ridge=1e-8)  # regularized fit succeeds

    def test_needs_two_classes(self):
        data = LabeledDataset(np.zeros((4, 2)), np.repeat("a", 4))
        with pytest.raises(ValueError, match="2 classes"):
            fit_lda(data)


class TestPredictLda:
    def test_class_mean_maps_to_class(self):
        specs = make_problem(3, 4, separation=6.0)
        train = sample_problem(specs, 500, RngSeed(5))
        model = fit_lda(train)
        means = np.array([s.mean for s in specs])
        labels, _ = predict_lda(model, means)
        assert labels.tolist() == [s.label for s in specs]

    def test_tie_breaks_by_declaration_order(self):
        # equidistant point between two equal-prior classes
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        data = LabeledDataset(np.vstack([x, x]), np.array(["b", "a", "b", "a"]))
        model = fit_lda(data, ridge=1e-6)
        label, _ = predict_lda(model, np.array([[0.5, 0.5]]))
        assert label[0] == "b"  # first appearance in training data

    def test_dimension_mismatch(self):
        data = LabeledDataset(np.eye(4), np.array(["a", "a", "b", "b"]))
        model = fit_lda(data, ridge=1e-6)
        with pytest.raises(ValueError, match="dimension"):
            model.predict(np.zeros((2, 3)))

    def test_label_permutation_invariance(self):
        specs = make_problem(3, 4, separation=3.0)
        train = sample_problem(specs, 200, RngSeed(6))
        test = sample_problem(specs, 500, RngSeed(7))
        model = fit_lda(train)
        # reorder training rows so classes appear in a different order
        order = np.argsort(train.labels.astype(str), kind="stable")[::-1]
        model_perm = fit_lda(train.take(order))
        np.testing.assert_array_equal(
            model.predict(test.features), model_perm.predict(test.features)
        )


class TestFitPls:
    def test_univariate_first_weight_is_covariance_direction(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((200, 1))
        y = 2.0 * x[:, 0] + 0.1 * rng.standard_normal(200)
        proj = fit_pls(x, y, 1)
        assert abs(proj.weights[0, 0]) == pytest.approx(1.0)

    def test_training_scores_orthogonal(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((60, 12))
        Y = np.zeros((60, 3))
        Y[np.arange(60), rng.integers(0, 3, 60)] = 1.0
        proj = fit_pls(X, Y, 5)
        scores = proj.transform(X)
        gram = scores.T @ scores
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() / np.abs(np.diag(gram)).max() < 1e-8

    def test_projecting_training_mean_gives_zero(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((40, 6)) + 3.0
        Y = np.zeros((40, 2))
        Y[:20, 0] = 1.0
        Y[20:, 1] = 1.0
        proj = fit_pls(X, Y, 3)
        np.testing.assert_allclose(
            proj.transform(X.mean(axis=0)[None, :]), 0.0, atol=1e-10
        )

    def test_component_limit(self):
        X = np.random.default_rng(0).standard_normal((10, 4))
        Y = np.zeros((10, 2))
        Y[:5, 0] = Y[5:, 1] = 1.0
        with pytest.raises(ValueError, match="n_components"):
            fit_pls(X, Y, 5)

    def test_constant_features_rejected(self):
        X = np.ones((10, 3))
        Y = np.zeros((10, 2))
        Y[:5, 0] = Y[5:, 1] = 1.0
        with pytest.raises(SolverError):
            fit_pls(X, Y, 1)


class TestPipeline:
    def test_latent_cap_half_total(self):
        assert effective_latent_count(10, 10, 20) == 5
        assert effective_latent_count(10, 20, 20) == 10
        assert effective_latent_count(10, 25, 20) == 10
        assert effective_latent_count(10, 3, 20) == 1

    def test_latent_cap_errors(self):
        with pytest.raises(ValueError):
            effective_latent_count(0, 10, 20)
        with pytest.raises(ValueError):
            effective_latent_count(10, 1, 20)

    def test_full_rank_projection_matches_plain_lda(self):
        specs = make_problem(3, 4, separation=2.0)
        train = sample_problem(specs, 300, RngSeed(11))
        test = sample_problem(specs, 2000, RngSeed(12))
        plain = fit_lda(train)
        piped = fit_pls_lda(train, requested_latent=4)
        acc_plain = accuracy(plain, test)
        acc_piped = float(np.mean(predict(piped, test.features) == test.labels))
        assert abs(acc_plain - acc_piped) < 0.01

    def test_training_accuracy_perfect_when_separated(self):
        specs = make_problem(3, 4, separation=12.0)
        train = sample_problem(specs, 20, RngSeed(13))
        model = fit_pls_lda(train)
        assert float(np.mean(predict(model, train.features) == train.labels)) == 1.0

    def test_prediction_deterministic(self):
        specs = make_problem(2, 5, separation=1.0)
        train = sample_problem(specs, 30, RngSeed(14))
        test = sample_problem(specs, 100, RngSeed(15))
        model = fit_pls_lda(train)
        a = predict(model, test.features)
        b = predict(model, test.features)
        np.testing.assert_array_equal(a, b)

    def test_affine_invariance_of_predictions(self):
        specs = make_problem(2, 4, separation=2.0)
        train = sample_problem(specs, 200, RngSeed(16))
        test = sample_problem(specs, 500, RngSeed(17))
        model = fit_lda(train)
        scaled_train = LabeledDataset(train.features * 3.7, train.labels)
        model_scaled = fit_lda(scaled_train)
        np.testing.assert_array_equal(
            model.predict(test.features), model_scaled.predict(test.features * 3.7)
        )

    def test_monotone_difficulty(self):
        # test accuracy grows with class separation
        prev = 0.0
        for delta in [0.5, 1.0, 2.0, 3.5, 5.0]:
            specs = make_problem(2, 4, separation=delta)
            train = sample_problem(specs, 2000, RngSeed(18))
            test = sample_problem(specs, 10_000, RngSeed(19))
            acc = accuracy(fit_lda(train), test)
            mc_se = np.sqrt(0.25 / 20_000)
            assert acc >= prev - mc_se
            prev = acc


class TestSerialization:
    def test_lda_round_trip(self, tmp_path):
        specs = make_problem(3, 5, separation=1.5)
        train = sample_problem(specs, 100, RngSeed(20))
        test = sample_problem(specs, 400, RngSeed(21))
        model = fit_lda(train)
        path = tmp_path / "model.npz"
        save_model(model, path)
        loaded = load_model(path)
        assert isinstance(loaded, LdaModel)
        np.testing.assert_array_equal(
            model.predict(test.features), loaded.predict(test.features)
        )
        scores_orig = model.scores(test.features)
        scores_back = loaded.scores(test.features)
        np.testing.assert_array_equal(scores_orig, scores_back)

    def test_pipeline_round_trip(self, tmp_path):
        specs = make_problem(3, 6, separation=1.5)
        train = sample_problem(specs, 50, RngSeed(22))
        test = sample_problem(specs, 200, RngSeed(23))
        model = fit_pls_lda(train)
        path = tmp_path / "pipe.npz"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(
            predict(model, test.features), predict(loaded, test.features)
        )
