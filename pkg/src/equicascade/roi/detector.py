"""Trainable single-class ROI detector with a scikit-learn style API.

``fit`` takes images and one ground-truth box per image, estimates anchor
priors from the training boxes, and trains the two-scale network with
SGD + momentum under a cosine learning-rate schedule.  ``predict`` runs
the network on arbitrarily sized images (internally zero-padded to a
square and resized to ``input_size``) and maps detections back to source
coordinates.
"""
from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..checkpoint import load_checkpoint, save_checkpoint
from ..seeding import derive_rng, derive_seed
from ..validation import check_box, check_image
from .boxes import BoundingBox, Detection, crop_and_normalize, iou, nms
from .network import TinyDetectorNet, assign_targets, decode, detector_loss

logger = logging.getLogger(__name__)

_WARMUP_EPOCHS = 3  # linear learning-rate ramp; tames early box-loss spikes

ARCHITECTURE = "tiny-two-scale"


class RoiDetector(BaseEstimator):
    """Single-class one-stage detector for one region kind.

    Parameters
    ----------
    kind : str
        Region label attached to detections ("face", "eye", "lower_face").
    input_size : int
        Square network input side, multiple of 32.
    confidence_threshold, nms_iou : float
        Post-processing defaults, both configurable per call site.
    epochs, batch_size, learning_rate, momentum : training budget.
    hflip : bool
        Horizontal-flip augmentation on the training set.
    widths : tuple
        Channel widths of the five reduction stages.
    seed : int
        Base seed; weight init, shuffling and augmentation derive from it.
    """

    def __init__(
        self,
        kind: str = "face",
        input_size: int = 512,
        confidence_threshold: float = 0.25,
        nms_iou: float = 0.45,
        epochs: int = 100,
        batch_size: int = 8,
        learning_rate: float = 1e-3,
        momentum: float = 0.9,
        hflip: bool = True,
        widths: tuple[int, ...] = (8, 16, 32, 64, 128),
        anchors_per_scale: int = 3,
        seed: int = 0,
    ):
        self.kind = kind
        self.input_size = input_size
        self.confidence_threshold = confidence_threshold
        self.nms_iou = nms_iou
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.hflip = hflip
        self.widths = widths
        self.anchors_per_scale = anchors_per_scale
        self.seed = seed

    # -- training ---------------------------------------------------------

    def fit(self, images: Sequence[np.ndarray], boxes: Sequence[BoundingBox]) -> "RoiDetector":
        if len(images) == 0:
            raise ValueError("empty training set")
        if len(images) != len(boxes):
            raise ValueError("images and boxes must have equal length")
        inputs, gts = self._prepare(images, boxes)
        wh = np.stack([(b[2] - b[0], b[3] - b[1]) for b in gts])
        from .anchors import two_scale_anchors

        self.anchors_ = two_scale_anchors(wh, derive_seed(self.seed, "detector", self.kind))
        torch.manual_seed(derive_seed(self.seed, "detector", self.kind, "init"))
        self.net_ = TinyDetectorNet(
            input_size=self.input_size,
            widths=tuple(self.widths),
            anchors_per_scale=self.anchors_per_scale,
        )
        opt = torch.optim.SGD(
            self.net_.parameters(), lr=self.learning_rate, momentum=self.momentum
        )
        rng = derive_rng(self.seed, "detector", self.kind, "batches")
        self.loss_curve_ = []
        self.first_epoch_losses_ = []
        n = len(inputs)
        self.net_.train()
        for epoch in range(self.epochs):
            lr = self.learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / self.epochs))
            if epoch < _WARMUP_EPOCHS:
                lr *= (epoch + 1) / (_WARMUP_EPOCHS + 1)
            for group in opt.param_groups:
                group["lr"] = lr
            order = rng.permutation(n)
            epoch_losses = []
            for start in range(0, n, self.batch_size):
                batch_idx = order[start:start + self.batch_size]
                x, gt = self._make_batch(inputs, gts, batch_idx, rng)
                preds = self.net_(x)
                targets = assign_targets(gt, self.anchors_, self.input_size, preds)
                loss, _ = detector_loss(preds, targets)
                if not torch.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite detector loss at epoch {epoch} "
                        f"(lr={lr:.2e}, batch of {len(batch_idx)})"
                    )
                opt.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(self.net_.parameters(), 10.0)
                opt.step()
                epoch_losses.append(float(loss.detach()))
            if epoch == 0:
                self.first_epoch_losses_ = list(epoch_losses)
            self.loss_curve_.append(float(np.mean(epoch_losses)))
            logger.debug("detector %s epoch %d loss %.4f", self.kind, epoch, self.loss_curve_[-1])
        self.net_.eval()
        return self

    def _prepare(self, images, boxes):
        inputs = []
        gts = []
        for image, box in zip(images, boxes):
            check_image(image)
            check_box(box)
            crop, transform = crop_and_normalize(image, None, self.input_size)
            g = transform.box_to_crop(box)
            inputs.append(crop)
            gts.append((g.x_min, g.y_min, g.x_max, g.y_max))
        return inputs, gts

    def _make_batch(self, inputs, gts, batch_idx, rng):
        size = self.input_size
        arr = np.empty((len(batch_idx), size, size, 3), dtype=np.float32)
        gt = np.empty((len(batch_idx), 4), dtype=np.float64)
        for row, i in enumerate(batch_idx):
            img = inputs[i]
            x0, y0, x1, y1 = gts[i]
            if self.hflip and rng.random() < 0.5:
                img = img[:, ::-1]
                x0, x1 = size - x1, size - x0
            arr[row] = img
            gt[row] = (x0, y0, x1, y1)
        x = torch.from_numpy(arr).permute(0, 3, 1, 2) / 255.0 - 0.5
        return x, gt

    # -- inference --------------------------------------------------------

    def detect(self, image: np.ndarray) -> list[Detection]:
        """Detections above the confidence threshold, NMS applied, in
        source-image coordinates clipped to image bounds."""
        return self.predict([image])[0]

    def predict(self, images: Sequence[np.ndarray]) -> list[list[Detection]]:
        check_is_fitted(self, "net_")
        self.net_.eval()
        results = []
        for image in images:
            check_image(image)
            crop, transform = crop_and_normalize(image, None, self.input_size)
            x = torch.from_numpy(crop.astype(np.float32)).permute(2, 0, 1)[None] / 255.0 - 0.5
            with torch.no_grad():
                preds = self.net_(x)
            raw = decode(preds, self.anchors_, self.confidence_threshold)[0]
            h, w = image.shape[:2]
            detections = []
            for x0, y0, x1, y1, conf in raw:
                try:
                    box = transform.box_to_source(BoundingBox(x0, y0, x1, y1)).clip(w, h)
                except ValueError:
                    continue  # degenerate after clipping
                detections.append(Detection(box=box, confidence=min(max(conf, 0.0), 1.0), kind=self.kind))
            results.append(nms(detections, self.nms_iou))
        return results

    def score(self, images: Sequence[np.ndarray], boxes: Sequence[BoundingBox]) -> float:
        """Mean IoU of the best detection against ground truth; a miss
        scores 0 for its image."""
        check_is_fitted(self, "net_")
        total = 0.0
        for dets, gt in zip(self.predict(images), boxes):
            if dets:
                total += iou(dets[0].box, gt)
        return total / len(images)

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        check_is_fitted(self, "net_")
        meta = {
            "architecture": ARCHITECTURE,
            "kind": self.kind,
            "input_size": self.input_size,
            "confidence_threshold": self.confidence_threshold,
            "nms_iou": self.nms_iou,
            "widths": list(self.widths),
            "anchors_per_scale": self.anchors_per_scale,
            "anchors": {str(s): a.tolist() for s, a in self.anchors_.items()},
        }
        arrays = {k: v.numpy() for k, v in self.net_.state_dict().items()}
        save_checkpoint(path, meta, arrays)

    @classmethod
    def load(cls, path) -> "RoiDetector":
        meta, arrays = load_checkpoint(path)
        if meta.get("architecture") != ARCHITECTURE:
            raise ValueError(f"not a detector checkpoint: {meta.get('architecture')!r}")
        det = cls(
            kind=meta["kind"],
            input_size=meta["input_size"],
            confidence_threshold=meta["confidence_threshold"],
            nms_iou=meta["nms_iou"],
            widths=tuple(meta["widths"]),
            anchors_per_scale=meta["anchors_per_scale"],
        )
        det.net_ = TinyDetectorNet(
            input_size=det.input_size,
            widths=tuple(det.widths),
            anchors_per_scale=det.anchors_per_scale,
        )
        det.net_.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in arrays.items()})
        det.net_.eval()
        det.anchors_ = {int(s): np.asarray(a, dtype=np.float64) for s, a in meta["anchors"].items()}
        det.loss_curve_ = []
        return det
