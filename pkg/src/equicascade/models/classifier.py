"""Balanced binary AU classifier with a scikit-learn style API.

Wraps one network family/region-level pair, trains it with SGD +
momentum, tracks per-epoch train loss and validation accuracy/F1, keeps
the checkpoint with the best validation F1, and stops early when the
validation F1 has not improved for ``patience`` epochs.
"""
from __future__ import annotations

import copy
import csv
import logging
from typing import Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..checkpoint import load_checkpoint, save_checkpoint
from ..seeding import derive_rng, derive_seed
from ..validation import check_binary_labels, check_crop_batch
from .networks import build_network, input_side_for

logger = logging.getLogger(__name__)

CURVE_FIELDS = ("epoch", "train_loss", "val_acc", "val_f1")


def _f1_and_acc(decisions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    tp = int(np.sum((decisions == 1) & (labels == 1)))
    fp = int(np.sum((decisions == 1) & (labels == 0)))
    fn = int(np.sum((decisions == 0) & (labels == 1)))
    acc = float(np.mean(decisions == labels))
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    return f1, acc


class AUClassifier(ClassifierMixin, BaseEstimator):
    """Single-logit binary classifier over fixed-size uint8 crops.

    Parameters
    ----------
    family : {"drml", "alexnet"}
    region_level : {"frame", "face", "region"}
        Determines the input side: 64 for region crops, 176 otherwise.
    threshold : float in (0, 1)
        Decision threshold; ``probability >= threshold`` is positive.
    learning_rate, momentum, epochs, batch_size, patience : training.
    hflip : bool
        Horizontal-flip augmentation, training split only.
    """

    def __init__(
        self,
        family: str = "drml",
        region_level: str = "region",
        threshold: float = 0.5,
        learning_rate: float = 1e-2,
        momentum: float = 0.9,
        epochs: int = 100,
        batch_size: int = 64,
        patience: int = 20,
        hflip: bool = True,
        seed: int = 0,
    ):
        self.family = family
        self.region_level = region_level
        self.threshold = threshold
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.hflip = hflip
        self.seed = seed

    @property
    def input_side(self) -> int:
        return input_side_for(self.region_level)

    @property
    def architecture(self) -> str:
        return f"{self.family}-{self.region_level}-{self.input_side}"

    # -- training ---------------------------------------------------------

    def fit(
        self,
        X: np.ndarray,
        y: Sequence[int],
        X_val: np.ndarray | None = None,
        y_val: Sequence[int] | None = None,
    ) -> "AUClassifier":
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        X = check_crop_batch(X, self.input_side)
        y = check_binary_labels(y)
        if len(X) != len(y):
            raise ValueError("X and y must have equal length")
        has_val = X_val is not None
        if has_val:
            X_val = check_crop_batch(X_val, self.input_side)
            y_val = check_binary_labels(y_val)
            if len(X_val) != len(y_val):
                raise ValueError("X_val and y_val must have equal length")

        torch.manual_seed(derive_seed(self.seed, "classifier", self.architecture, "init"))
        net = build_network(self.family, self.region_level)
        opt = torch.optim.SGD(net.parameters(), lr=self.learning_rate, momentum=self.momentum)
        loss_fn = torch.nn.BCEWithLogitsLoss()
        rng = derive_rng(self.seed, "classifier", self.architecture, "batches")

        self.classes_ = np.array([0, 1])
        self.curve_ = []
        best_f1 = -1.0
        best_state = None
        best_epoch = -1
        targets = torch.from_numpy(y.astype(np.float32))
        n = len(X)
        for epoch in range(self.epochs):
            net.train()
            order = rng.permutation(n)
            losses = []
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                batch = X[idx].astype(np.float32)
                if self.hflip:
                    flip = rng.random(len(idx)) < 0.5
                    batch[flip] = batch[flip, :, ::-1]
                xb = torch.from_numpy(batch).permute(0, 3, 1, 2) / 255.0 - 0.5
                logits = net(xb)
                loss = loss_fn(logits, targets[idx])
                if not torch.isfinite(loss):
                    raise RuntimeError(f"non-finite training loss at epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                losses.append(float(loss.detach()) * len(idx))
            train_loss = float(np.sum(losses) / n)
            val_acc = float("nan")
            val_f1 = float("nan")
            if has_val:
                probs = self._forward_probs(net, X_val)
                val_f1, val_acc = _f1_and_acc((probs >= self.threshold).astype(int), y_val)
                if val_f1 > best_f1:
                    best_f1 = val_f1
                    best_epoch = epoch
                    best_state = copy.deepcopy(net.state_dict())
            self.curve_.append(
                {"epoch": epoch, "train_loss": train_loss, "val_acc": val_acc, "val_f1": val_f1}
            )
            logger.debug(
                "%s epoch %d loss %.4f val_f1 %s", self.architecture, epoch, train_loss, val_f1
            )
            if has_val and epoch - best_epoch >= self.patience:
                logger.debug("%s early stop at epoch %d (best %d)", self.architecture, epoch, best_epoch)
                break
        if best_state is not None:
            net.load_state_dict(best_state)
            self.best_epoch_ = best_epoch
            self.best_val_f1_ = best_f1
        else:
            self.best_epoch_ = len(self.curve_) - 1
            self.best_val_f1_ = float("nan")
        net.eval()
        self.net_ = net
        return self

    @staticmethod
    def _forward_probs(net: torch.nn.Module, X: np.ndarray, chunk: int = 64) -> np.ndarray:
        net.eval()
        out = np.empty(len(X), dtype=np.float64)
        with torch.no_grad():
            for start in range(0, len(X), chunk):
                batch = X[start:start + chunk].astype(np.float32)
                xb = torch.from_numpy(batch).permute(0, 3, 1, 2) / 255.0 - 0.5
                out[start:start + chunk] = torch.sigmoid(net(xb).reshape(-1)).numpy()
        return out

    # -- inference --------------------------------------------------------

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Positive-class probability for each crop, in [0, 1]."""
        check_is_fitted(self, "net_")
        X = check_crop_batch(X, self.input_side)
        return self._forward_probs(self.net_, X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= self.threshold).astype(np.int64)

    def predict_one(self, crop: np.ndarray) -> tuple[float, bool]:
        """(probability, decision) for a single crop."""
        prob = float(self.predict_proba(crop[None])[0])
        return prob, prob >= self.threshold

    def score(self, X: np.ndarray, y: Sequence[int]) -> float:
        y = check_binary_labels(y)
        return float(np.mean(self.predict(X) == y))

    # -- artifacts ---------------------------------------------------------

    def save_curve(self, path) -> None:
        check_is_fitted(self, "curve_")
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CURVE_FIELDS)
            writer.writeheader()
            for row in self.curve_:
                writer.writerow(row)

    def save(self, path) -> None:
        check_is_fitted(self, "net_")
        meta = {
            "architecture": self.architecture,
            "family": self.family,
            "region_level": self.region_level,
            "threshold": self.threshold,
            "best_epoch": self.best_epoch_,
        }
        arrays = {k: v.numpy() for k, v in self.net_.state_dict().items()}
        save_checkpoint(path, meta, arrays)

    @classmethod
    def load(cls, path) -> "AUClassifier":
        meta, arrays = load_checkpoint(path)
        clf = cls(
            family=meta["family"],
            region_level=meta["region_level"],
            threshold=meta["threshold"],
        )
        if meta.get("architecture") != clf.architecture:
            raise ValueError(f"unexpected architecture {meta.get('architecture')!r}")
        net = build_network(clf.family, clf.region_level)
        net.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in arrays.items()})
        net.eval()
        clf.net_ = net
        clf.curve_ = []
        clf.best_epoch_ = meta.get("best_epoch", -1)
        clf.best_val_f1_ = float("nan")
        return clf
