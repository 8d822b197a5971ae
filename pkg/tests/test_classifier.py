"""AUClassifier: gradients, training dynamics, inference contract, artifacts."""

import csv

import numpy as np
import pytest
import torch
from sklearn.exceptions import NotFittedError

from equicascade.models.classifier import AUClassifier, _f1_and_acc
from equicascade.models.networks import build_network


def make_crops(n, seed, separable=True, side=64):
    """Balanced noise crops; positives carry a bright centered square."""
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 256, (n, side, side, 3)).astype(np.uint8)
    y = np.tile([0, 1], n // 2 + 1)[:n].copy()
    if separable:
        for i in range(n):
            if y[i]:
                lo, hi = side // 2 - 8, side // 2 + 8
                X[i, lo:hi, lo:hi] = 255
    return X, y


def _fd_probe(net, x, y, probes, eps=1e-5, tol=1e-3):
    """Central finite differences on 5 parameters per probed tensor.

    The net is nudged off its symmetric init with a few SGD steps first
    and probes are drawn from the largest-gradient entries, so the true
    derivative sits far above float64 cancellation noise.
    """
    loss_fn = torch.nn.BCEWithLogitsLoss()
    opt = torch.optim.SGD(net.parameters(), lr=0.05)
    for _ in range(5):
        loss = loss_fn(net(x), y)
        opt.zero_grad()
        loss.backward()
        opt.step()

    def value():
        return float(loss_fn(net(x), y).detach())

    loss = loss_fn(net(x), y)
    net.zero_grad()
    loss.backward()
    rng = np.random.default_rng(0)
    for tensor in probes:
        flat = tensor.detach().view(-1)
        grad = tensor.grad.view(-1)
        candidates = torch.topk(grad.abs(), min(20, len(flat))).indices.numpy()
        for index in rng.choice(candidates, size=5, replace=False):
            analytic = float(grad[index])
            with torch.no_grad():
                original = float(flat[index])
                flat[index] = original + eps
                up = value()
                flat[index] = original - eps
                down = value()
                flat[index] = original
            numeric = (up - down) / (2 * eps)
            denom = max(abs(analytic), abs(numeric), 1e-8)
            assert abs(analytic - numeric) / denom < tol, (tensor.shape, int(index))


class TestGradients:
    def test_drml_including_region_layer(self):
        torch.manual_seed(0)
        # The frame-level trunk is fully convolutional up to the global
        # pool, so a 64px input exercises the identical modules at a
        # fraction of the finite-difference cost.
        net = build_network("drml", "frame").double().eval()
        x = torch.randn(4, 3, 64, 64, dtype=torch.float64) * 0.5
        y = torch.tensor([1.0, 0.0, 1.0, 0.0], dtype=torch.float64)
        probes = [
            net.features.stem.weight,       # plain convolution
            net.features.stem_bn.weight,    # batch norm scale
            net.features.swap.conv.weight,  # per-patch region convolution
            net.features.swap.norm.weight,  # region batch norm
            net.head.fc1.weight,            # fully connected
        ]
        _fd_probe(net, x, y, probes)

    def test_alexnet_region_all_layer_types(self):
        torch.manual_seed(1)
        net = build_network("alexnet", "region").double().eval()
        x = torch.randn(4, 3, 64, 64, dtype=torch.float64) * 0.5
        y = torch.tensor([0.0, 1.0, 0.0, 1.0], dtype=torch.float64)
        probes = [
            net.features.conv1.weight,
            net.features.conv5.weight,
            net.head.fc1.weight,
            net.head.fc2.bias,
        ]
        _fd_probe(net, x, y, probes)


class TestTraining:
    @pytest.mark.parametrize("family", ["drml", "alexnet"])
    def test_overfit_probe_reaches_full_accuracy(self, family):
        X, y = make_crops(16, 0)
        clf = AUClassifier(family=family, epochs=200, seed=1).fit(X, y)
        assert len(clf.curve_) <= 200
        assert clf.score(X, y) == 1.0

    def test_separable_signal_generalizes(self):
        X_train, y_train = make_crops(96, 1)
        X_val, y_val = make_crops(40, 2)
        clf = AUClassifier(family="drml", epochs=60, seed=3).fit(
            X_train, y_train, X_val, y_val
        )
        f1, _ = _f1_and_acc(clf.predict(X_val), np.asarray(y_val))
        assert f1 >= 0.9
        # Balanced test set: decision rate should not collapse.
        assert 0.3 <= clf.predict(X_val).mean() <= 0.7

    def test_permuted_labels_score_near_chance(self):
        rng = np.random.default_rng(9)
        X_train, _ = make_crops(96, 4, separable=False)
        y_train = rng.permutation(np.tile([0, 1], 48))
        X_val, _ = make_crops(64, 5, separable=False)
        y_val = np.tile([0, 1], 32)
        clf = AUClassifier(family="drml", epochs=15, seed=5).fit(
            X_train, y_train, X_val, y_val
        )
        assert 0.4 <= clf.score(X_val, y_val) <= 0.6

    def test_training_curve_bit_reproducible(self):
        X, y = make_crops(32, 6)
        X_val, y_val = make_crops(16, 7)
        a = AUClassifier(epochs=4, seed=11).fit(X, y, X_val, y_val)
        b = AUClassifier(epochs=4, seed=11).fit(X, y, X_val, y_val)
        assert a.curve_ == b.curve_
        c = AUClassifier(epochs=4, seed=12).fit(X, y, X_val, y_val)
        assert c.curve_ != a.curve_

    def test_early_stopping_obeys_patience(self):
        rng = np.random.default_rng(13)
        X, _ = make_crops(64, 8, separable=False)
        y = rng.permutation(np.tile([0, 1], 32))
        X_val, y_val = make_crops(32, 9, separable=False)
        clf = AUClassifier(epochs=40, patience=3, seed=13).fit(X, y, X_val, y_val)
        assert len(clf.curve_) < 40
        assert len(clf.curve_) == clf.best_epoch_ + clf.patience + 1

    def test_best_validation_checkpoint_restored(self):
        X, y = make_crops(64, 10)
        X_val, y_val = make_crops(32, 11)
        clf = AUClassifier(epochs=25, seed=14).fit(X, y, X_val, y_val)
        recorded = [row["val_f1"] for row in clf.curve_]
        f1_now, _ = _f1_and_acc(clf.predict(X_val), np.asarray(y_val))
        assert clf.best_val_f1_ == max(recorded)
        assert f1_now == pytest.approx(clf.best_val_f1_)
        assert clf.curve_[clf.best_epoch_]["val_f1"] == clf.best_val_f1_

    def test_validation_rejections(self):
        X, y = make_crops(8, 12)
        with pytest.raises(ValueError):
            AUClassifier().fit(np.empty((0, 64, 64, 3), dtype=np.uint8), [])
        with pytest.raises(ValueError):
            AUClassifier().fit(X, y[:-1])
        with pytest.raises(ValueError):
            AUClassifier().fit(X, np.array([0, 1, 2, 1, 0, 1, 0, 1]))
        with pytest.raises(ValueError):
            AUClassifier(threshold=1.0).fit(X, y)
        with pytest.raises(ValueError):
            AUClassifier(region_level="frame").fit(X, y)  # 64px crops, 176 expected

    def test_non_finite_loss_aborts(self):
        X, y = make_crops(8, 15, separable=False)
        clf = AUClassifier(epochs=4, batch_size=4, learning_rate=1e18)
        with pytest.raises(RuntimeError, match="non-finite"):
            clf.fit(X, y)


@pytest.fixture(scope="module")
def trained_classifier():
    X, y = make_crops(32, 20)
    return AUClassifier(epochs=30, seed=2).fit(X, y), (X, y)


class TestInference:
    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            AUClassifier().predict(np.zeros((1, 64, 64, 3), dtype=np.uint8))

    def test_probabilities_bounded(self, trained_classifier):
        clf, (X, _) = trained_classifier
        probs = clf.predict_proba(X)
        assert probs.shape == (len(X),)
        assert np.all((probs >= 0.0) & (probs <= 1.0))
        assert np.all(np.isfinite(probs))

    def test_same_crop_same_probability(self, trained_classifier):
        clf, (X, _) = trained_classifier
        assert np.array_equal(clf.predict_proba(X[:4]), clf.predict_proba(X[:4]))

    def test_threshold_boundary_is_positive(self, trained_classifier):
        clf, _ = trained_classifier
        clf = AUClassifier(**clf.get_params())
        clf.net_ = trained_classifier[0].net_
        clf.predict_proba = lambda X: np.array([0.5, 0.5 - 1e-9, 0.7])
        assert list(clf.predict(np.zeros((3, 64, 64, 3), dtype=np.uint8))) == [1, 0, 1]

    def test_predict_one_matches_batch(self, trained_classifier):
        clf, (X, _) = trained_classifier
        prob, decision = clf.predict_one(X[0])
        assert prob == pytest.approx(clf.predict_proba(X[:1])[0])
        assert decision == bool(clf.predict(X[:1])[0])

    def test_crop_size_mismatch_rejected(self, trained_classifier):
        clf, _ = trained_classifier
        with pytest.raises(ValueError):
            clf.predict(np.zeros((1, 176, 176, 3), dtype=np.uint8))

    def test_score_is_accuracy(self, trained_classifier):
        clf, (X, y) = trained_classifier
        assert clf.score(X, y) == pytest.approx(np.mean(clf.predict(X) == y))


class TestArtifacts:
    def test_save_load_round_trip(self, trained_classifier, tmp_path):
        clf, (X, _) = trained_classifier
        path = tmp_path / "au.zip"
        clf.save(path)
        loaded = AUClassifier.load(path)
        assert loaded.architecture == clf.architecture
        assert loaded.threshold == clf.threshold
        assert np.array_equal(loaded.predict_proba(X), clf.predict_proba(X))

    def test_curve_csv(self, trained_classifier, tmp_path):
        clf, _ = trained_classifier
        path = tmp_path / "curve.csv"
        clf.save_curve(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(clf.curve_)
        assert float(rows[0]["train_loss"]) == pytest.approx(clf.curve_[0]["train_loss"])
        assert rows[3]["epoch"] == "3"

    def test_load_rejects_mismatched_architecture(self, tmp_path):
        from equicascade.checkpoint import save_checkpoint

        path = tmp_path / "bad.zip"
        save_checkpoint(
            path,
            {
                "architecture": "drml-region-176",  # inconsistent on purpose
                "family": "drml",
                "region_level": "region",
                "threshold": 0.5,
                "best_epoch": 0,
            },
            {},
        )
        with pytest.raises(ValueError, match="architecture"):
            AUClassifier.load(path)
