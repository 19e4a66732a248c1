import numpy as np
import pytest

from axeseval import probes as pr
from axeseval.errors import DegenerateError, NonFiniteError, ShapeError, SingularError
from axeseval.metrics import metric_accuracy, metric_mse
from axeseval.numerics import Rng


def make_blobs(n=200, margin=1.0, seed=0):
    """Two separable 2-D blobs around (-1,-1) and (1,1)."""
    rng = Rng(seed)
    half = n // 2
    x0 = rng.normal((half, 2), 0.25) - (1.0 + margin / 2)
    x1 = rng.normal((n - half, 2), 0.25) + (1.0 + margin / 2)
    x = np.concatenate([x0, x1])
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    perm = rng.permutation(n)
    return x[perm], y[perm]


def split(x, y, frac=0.7):
    k = int(len(x) * frac)
    return (x[:k], y[:k]), (x[k:], y[k:])


class TestTrainClassifier:
    def test_separable_blobs(self):
        x, y = make_blobs()
        # oracle first: the hand-set hyperplane x1 + x2 = 0 separates them
        hand = (x.sum(axis=1) > 0).astype(int)
        assert metric_accuracy(hand, y) == 1.0
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=0)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        assert metric_accuracy(pr.predict(probe, xv), yv) >= 0.99

    def test_random_labels_stay_at_chance(self):
        rng = Rng(1)
        x = rng.normal((400, 6))
        y = np.arange(400) % 4
        y = y[rng.permutation(400)]
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 6, 4, seed=0)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        acc = metric_accuracy(pr.predict(probe, xv), yv)
        assert 0.15 <= acc <= 0.35

    def test_single_class_is_degenerate(self):
        x = Rng(0).normal((20, 3))
        y = np.zeros(20, dtype=int)
        spec = pr.ProbeSpec("linear_classifier", 3, 2, seed=0)
        with pytest.raises(DegenerateError):
            pr.train_probe(spec, x, y, x, y)

    def test_empty_split_is_degenerate(self):
        spec = pr.ProbeSpec("linear_classifier", 3, 2, seed=0)
        x = Rng(0).normal((20, 3))
        y = (np.arange(20) % 2)
        with pytest.raises(DegenerateError):
            pr.train_probe(spec, x, y, np.empty((0, 3)), np.empty(0, dtype=int))

    def test_nonfinite_input_raises(self):
        x = Rng(0).normal((20, 3))
        x[0, 0] = np.inf
        y = (np.arange(20) % 2)
        spec = pr.ProbeSpec("linear_classifier", 3, 2, seed=0, batch_size=20)
        with pytest.raises(NonFiniteError):
            pr.train_probe(spec, x, y, x, y)


class TestTrainRegressor:
    def test_constant_target(self):
        x = Rng(2).normal((100, 4))
        y = np.full(100, 3.5)
        spec = pr.ProbeSpec("linear_regressor", 4, 1, seed=0)
        probe = pr.train_probe(spec, x[:70], y[:70], x[70:], y[70:])
        assert probe.best_val_loss <= 1e-3
        assert np.allclose(pr.predict(probe, x[70:]), 3.5, atol=0.05)

    def test_matches_ridge_oracle(self):
        rng = Rng(3)
        x = rng.normal((600, 6))
        w_true = rng.normal(6) * 0.25
        y = x @ w_true + 0.05 * rng.normal(600)
        xt, yt = x[:360], y[:360]
        xv, yv = x[360:480], y[360:480]
        xe, ye = x[480:], y[480:]
        spec = pr.ProbeSpec("linear_regressor", 6, 1, seed=0)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        grad_mse = metric_mse(pr.predict(probe, xe), ye)

        mu, sd = xt.mean(axis=0), xt.std(axis=0)
        xs = np.hstack([(xt - mu) / sd, np.ones((len(xt), 1))])
        w = pr.closed_form_ridge(xs, yt, 1e-8)
        xe_s = np.hstack([(xe - mu) / sd, np.ones((len(xe), 1))])
        ridge_mse = metric_mse(xe_s @ w, ye)
        assert abs(grad_mse - ridge_mse) <= 1e-3


class TestLinearMap:
    def test_exact_linear_target(self):
        rng = Rng(4)
        x = rng.normal((2000, 5))
        a = rng.normal((5, 3)) * 0.3
        y = x @ a
        spec = pr.ProbeSpec("linear_map", 5, 3, seed=0)
        probe = pr.train_probe(spec, x[:1400], y[:1400], x[1400:], y[1400:])
        assert probe.best_val_loss <= 1e-4


class TestRidge:
    def test_identity_design(self):
        y = np.array([1.0, -2.0, 0.5])
        w = pr.closed_form_ridge(np.eye(3), y, 0.0)
        assert np.allclose(w, y)

    def test_recovers_planted_weights(self):
        rng = Rng(5)
        x = rng.normal((100, 7))
        w_true = rng.normal(7)
        w = pr.closed_form_ridge(x, x @ w_true, 1e-8)
        assert np.max(np.abs(w - w_true)) < 1e-4

    def test_singular_without_regularization(self):
        x = np.ones((5, 2))  # duplicate columns
        with pytest.raises(SingularError):
            pr.closed_form_ridge(x, np.ones(5), 0.0)


def _trained_mlp(n=40, d=6, seed=0):
    rng = Rng(seed)
    x = rng.normal((n, d))
    rolls = (rng.uniform(0, 1, (n, 128)) < 0.1).astype(np.uint8)
    spec = pr.ProbeSpec("mlp_multilabel", d, 128, hidden_dim=16,
                        max_epochs=20, patience=5, seed=seed)
    probe = pr.train_probe(spec, x[: n // 2], rolls[: n // 2],
                           x[n // 2:], rolls[n // 2:])
    return probe, x, rolls


class TestThresholdTuning:
    @staticmethod
    def _probe_with_scores(scores):
        """Wrap fixed scores as if a probe produced them."""
        class Fixed:
            spec = pr.ProbeSpec("mlp_multilabel", 1, scores.shape[1],
                                hidden_dim=1)
        return scores

    def _tune(self, scores, rolls):
        # drive the grid directly through a real probe object whose forward
        # pass is replaced by an identity on prestandardized scores
        spec = pr.ProbeSpec("mlp_multilabel", scores.shape[1], scores.shape[1],
                            hidden_dim=1)
        probe = pr.TrainedProbe(
            spec=spec,
            weights=[np.zeros((scores.shape[1], 1)), np.zeros(1),
                     np.zeros((1, scores.shape[1])), np.zeros(scores.shape[1])],
            mean=np.zeros(scores.shape[1]), std=np.ones(scores.shape[1]),
            best_val_loss=0.0, epochs_run=0,
        )
        grid = pr.THRESHOLD_GRID
        best = None
        for t in grid:
            f1 = pr._frame_f1((scores >= t).astype(np.uint8), rolls)
            key = (-f1, abs(t - 0.5), t)
            if best is None or key < best[0]:
                best = (key, t)
        return best[1]

    def test_perfect_predictor_ties_to_half(self):
        probe, x, rolls = _trained_mlp()
        scores = rolls.astype(np.float64)
        assert self._tune(scores, rolls) == 0.5

    def test_constant_scores_select_all_positive_baseline(self):
        rng = Rng(1)
        rolls = (rng.uniform(0, 1, (30, 128)) < 0.05).astype(np.uint8)
        scores = np.full((30, 128), 0.3)
        t = self._tune(scores, rolls)
        assert t <= 0.3
        # oracle: F1 of the all-positive prediction
        all_pos = np.ones_like(rolls)
        assert pr._frame_f1(all_pos, rolls) == pr._frame_f1(
            (scores >= t).astype(np.uint8), rolls)

    def test_shift_moves_threshold(self):
        rng = Rng(2)
        rolls = (rng.uniform(0, 1, (50, 128)) < 0.2).astype(np.uint8)
        scores = np.clip(rng.uniform(0, 0.6, (50, 128)) + 0.2 * rolls, 0, 0.79)
        t0 = self._tune(scores, rolls)
        t1 = self._tune(scores + 0.2, rolls)
        assert t1 == pytest.approx(t0 + 0.2)

    def test_public_api_on_trained_probe(self):
        probe, x, rolls = _trained_mlp()
        t = pr.tune_threshold(probe, x, rolls)
        assert t in pr.THRESHOLD_GRID
        assert probe.threshold in pr.THRESHOLD_GRID

    def test_no_positives_degenerate(self):
        probe, x, _ = _trained_mlp()
        with pytest.raises(DegenerateError):
            pr.tune_threshold(probe, x, np.zeros((len(x), 128), dtype=np.uint8))


class TestPredict:
    def test_training_labels_reproduced_on_blobs(self):
        x, y = make_blobs()
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=0)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        assert metric_accuracy(pr.predict(probe, xt), yt) == 1.0

    def test_prestandardized_equivalence(self):
        x, y = make_blobs()
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=0)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        manual = (xv - probe.mean) / probe.std
        assert np.array_equal(pr.predict(probe, xv),
                              pr.predict(probe, manual, prestandardized=True))

    def test_mlp_scores_in_open_interval(self):
        probe, x, _ = _trained_mlp()
        scores, binary = pr.predict(probe, x)
        assert np.all((scores > 0.0) & (scores < 1.0))
        assert set(np.unique(binary)) <= {0, 1}

    def test_shape_error(self):
        probe, x, _ = _trained_mlp()
        with pytest.raises(ShapeError):
            pr.predict(probe, x[:, :3])


class TestGradientCheck:
    def test_small_instance(self):
        rng = Rng(0)
        x = rng.normal((6, 5))
        y = (rng.uniform(0, 1, (6, 128)) < 0.2).astype(np.float64)
        spec = pr.ProbeSpec("mlp_multilabel", 5, 128, hidden_dim=4, seed=0)
        assert pr.mlp_gradient_check(spec, x, y) <= 1e-4

    def test_zero_weights_give_log2_loss(self):
        # sigmoid(0) = 0.5 puts ln 2 in every cell regardless of the label
        rng = Rng(1)
        x = rng.normal((8, 3))
        y = (rng.uniform(0, 1, (8, 16)) < 0.5).astype(np.float64)
        spec = pr.ProbeSpec("mlp_multilabel", 3, 16, hidden_dim=4, seed=0)
        params = [np.zeros((3, 4)), np.zeros(4), np.zeros((4, 16)), np.zeros(16)]
        loss, _ = pr._loss_and_grads(spec, params, x, y)
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    def test_gradients_deterministic(self):
        rng = Rng(2)
        x = rng.normal((4, 3))
        y = (rng.uniform(0, 1, (4, 8)) < 0.3).astype(np.float64)
        spec = pr.ProbeSpec("mlp_multilabel", 3, 8, hidden_dim=4, seed=7)
        params = pr._init_params(spec)
        _, g1 = pr._loss_and_grads(spec, params, x, y)
        _, g2 = pr._loss_and_grads(spec, params, x, y)
        for a, b in zip(g1, g2):
            assert np.array_equal(a, b)


class TestTrainingInvariants:
    def test_determinism_bit_identical(self):
        x, y = make_blobs(seed=4)
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=3)
        p1 = pr.train_probe(spec, xt, yt, xv, yv)
        p2 = pr.train_probe(spec, xt, yt, xv, yv)
        for a, b in zip(p1.weights, p2.weights):
            assert np.array_equal(a, b)
        assert p1.best_val_loss == p2.best_val_loss
        assert p1.epochs_run == p2.epochs_run

    def test_early_stopping_invariants(self):
        x, y = make_blobs(seed=5)
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=0, max_epochs=50,
                            patience=5)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        assert probe.epochs_run <= spec.max_epochs
        assert probe.best_val_loss == min(probe.val_losses)

    def test_standardization_from_train_only(self):
        x, y = make_blobs(seed=6)
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=0, max_epochs=11)
        p1 = pr.train_probe(spec, xt, yt, xv, yv)
        perm = Rng(9).permutation(len(xv))
        p2 = pr.train_probe(spec, xt, yt, xv[perm], yv[perm])
        assert np.array_equal(p1.mean, p2.mean)
        assert np.array_equal(p1.std, p2.std)

    def test_rescaling_absorbed_by_standardization(self):
        x, y = make_blobs(seed=7)
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 2, 2, seed=0)
        acc1 = metric_accuracy(
            pr.predict(pr.train_probe(spec, xt, yt, xv, yv), xv), yv)
        acc2 = metric_accuracy(
            pr.predict(pr.train_probe(spec, xt * 10, yt, xv * 10, yv), xv * 10),
            yv)
        assert abs(acc1 - acc2) <= 0.02

    def test_zero_variance_dims_get_unit_std(self):
        x, y = make_blobs(seed=8)
        x = np.hstack([x, np.full((len(x), 1), 2.0)])
        (xt, yt), (xv, yv) = split(x, y)
        spec = pr.ProbeSpec("linear_classifier", 3, 2, seed=0, max_epochs=11)
        probe = pr.train_probe(spec, xt, yt, xv, yv)
        assert probe.std[2] == 1.0


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        probe, x, rolls = _trained_mlp()
        p1 = tmp_path / "probe.bin"
        pr.save_probe(probe, p1)
        loaded = pr.load_probe(p1)
        for a, b in zip(probe.weights, loaded.weights):
            assert np.array_equal(a, b) and a.dtype == b.dtype
        assert np.array_equal(probe.mean, loaded.mean)
        assert loaded.threshold == probe.threshold
        assert loaded.best_val_loss == probe.best_val_loss
        p2 = tmp_path / "probe2.bin"
        pr.save_probe(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_loaded_probe_predicts_identically(self, tmp_path):
        probe, x, _ = _trained_mlp()
        pr.save_probe(probe, tmp_path / "p.bin")
        loaded = pr.load_probe(tmp_path / "p.bin")
        s1, b1 = pr.predict(probe, x)
        s2, b2 = pr.predict(loaded, x)
        assert np.array_equal(s1, s2) and np.array_equal(b1, b2)
