"""Compact two-scale anchor-based detector network.

Tiny-YOLO style: a trunk of 3x3 convolutions with leaky-ReLU, five of
them stride-2, two deepening stages at the coarsest resolution, and 1x1
prediction heads on the stride-32 and stride-16 grids.  Each head emits
(tx, ty, tw, th, objectness) per anchor; the detector is single-class so
there are no class logits.
"""
from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

STRIDES = (32, 16)
OUTPUTS_PER_ANCHOR = 5  # tx, ty, tw, th, objectness

# Matching thresholds: predictions overlapping the ground truth above
# MATCH_IOU found the object and are not penalised as background; the
# band down to IGNORE_IOU contributes no objectness loss either way.
MATCH_IOU = 0.5
IGNORE_IOU = 0.4

_OBJ_BIAS_INIT = -4.0  # start near "no object" so untrained nets stay quiet
_BOX_LOSS_WEIGHT = 5.0
_T_CLAMP = 8.0  # keeps exp(tw) finite on untrained nets


def _conv_block(cin: int, cout: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.LeakyReLU(0.1, inplace=True),
    )


class TinyDetectorNet(nn.Module):
    """Two-scale single-class detector for a square input."""

    def __init__(
        self,
        input_size: int = 512,
        widths: tuple[int, ...] = (8, 16, 32, 64, 128),
        anchors_per_scale: int = 3,
    ):
        super().__init__()
        if input_size % 32 != 0:
            raise ValueError("input_size must be a multiple of 32")
        if len(widths) != 5:
            raise ValueError("expected 5 reduction-stage widths")
        self.input_size = input_size
        self.widths = tuple(widths)
        self.anchors_per_scale = anchors_per_scale
        w = widths
        self.reduce1 = _conv_block(3, w[0], 2)
        self.reduce2 = _conv_block(w[0], w[1], 2)
        self.reduce3 = _conv_block(w[1], w[2], 2)
        self.reduce4 = _conv_block(w[2], w[3], 2)  # stride-16 tap
        self.reduce5 = _conv_block(w[3], w[4], 2)
        self.deep6 = _conv_block(w[4], w[4], 1)
        self.deep7 = _conv_block(w[4], w[4], 1)
        self.lateral = _conv_block(w[3], w[3], 1)
        n_out = anchors_per_scale * OUTPUTS_PER_ANCHOR
        self.head32 = nn.Conv2d(w[4], n_out, 1)
        self.head16 = nn.Conv2d(w[3], n_out, 1)
        for head in (self.head32, self.head16):
            nn.init.zeros_(head.bias)
            with torch.no_grad():
                head.bias.view(anchors_per_scale, OUTPUTS_PER_ANCHOR)[:, 4] = _OBJ_BIAS_INIT

    def forward(self, x: torch.Tensor) -> dict[int, torch.Tensor]:
        """Raw predictions per stride: (B, anchors, gh, gw, 5)."""
        x = self.reduce1(x)
        x = self.reduce2(x)
        x = self.reduce3(x)
        t16 = self.reduce4(x)
        x = self.reduce5(t16)
        x = self.deep7(self.deep6(x))
        out = {
            32: self.head32(x),
            16: self.head16(self.lateral(t16)),
        }
        shaped = {}
        for stride, raw in out.items():
            b, _, gh, gw = raw.shape
            shaped[stride] = (
                raw.view(b, self.anchors_per_scale, OUTPUTS_PER_ANCHOR, gh, gw)
                .permute(0, 1, 3, 4, 2)
                .contiguous()
            )
        return shaped


def assign_targets(
    gt_boxes: np.ndarray,
    anchors: dict[int, np.ndarray],
    input_size: int,
    preds: dict[int, torch.Tensor] | None = None,
) -> dict[int, dict[str, torch.Tensor]]:
    """Build per-scale training targets for one batch.

    gt_boxes: (B, 4) corner boxes in network-input coordinates, one box
    per image.  The single best-matching anchor (by co-centered shape
    IoU, across both scales) is the positive slot and carries the
    box-offset regression.  When ``preds`` is supplied, every slot's
    objectness target is the IoU of its *decoded* box with the ground
    truth, so confidence learns to estimate localisation quality — a
    smooth function of position and shape that ranks detections
    correctly — except that slots in the borderline IoU band
    (IGNORE_IOU, MATCH_IOU] are excluded from the objectness loss.
    Without ``preds`` the positive slot's target is 1 and everything
    else is a plain negative.
    """
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64)
    batch = len(gt_boxes)
    targets = {}
    pred_iou = {}
    for stride in STRIDES:
        g = input_size // stride
        k = len(anchors[stride])
        targets[stride] = {
            "obj": torch.zeros(batch, k, g, g),
            "ignore": torch.zeros(batch, k, g, g, dtype=torch.bool),
            "box": torch.zeros(batch, k, g, g, 4),
            "box_mask": torch.zeros(batch, k, g, g, dtype=torch.bool),
        }
        if preds is not None:
            pred_iou[stride] = _pred_iou_grid(
                preds[stride], gt_boxes, anchors[stride], stride
            )
            targets[stride]["obj"] = pred_iou[stride].clamp(0.0, 1.0)
            targets[stride]["ignore"] = (pred_iou[stride] > IGNORE_IOU) & (
                pred_iou[stride] <= MATCH_IOU
            )
    for b, (x0, y0, x1, y1) in enumerate(gt_boxes):
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        gw, gh = x1 - x0, y1 - y0
        best = (STRIDES[0], 0, -1.0)
        for stride in STRIDES:
            a = anchors[stride]
            inter = np.minimum(gw, a[:, 0]) * np.minimum(gh, a[:, 1])
            shape_iou = inter / (gw * gh + a[:, 0] * a[:, 1] - inter)
            j = int(np.argmax(shape_iou))
            if shape_iou[j] > best[2]:
                best = (stride, j, float(shape_iou[j]))
        stride, j, _ = best
        g = input_size // stride
        col = min(int(cx / stride), g - 1)
        row = min(int(cy / stride), g - 1)
        aw, ah = anchors[stride][j]
        t = targets[stride]
        if preds is None:
            t["obj"][b, j, row, col] = 1.0
        t["ignore"][b, j, row, col] = False
        t["box"][b, j, row, col] = torch.tensor([
            cx / stride - col,
            cy / stride - row,
            math.log(gw / aw),
            math.log(gh / ah),
        ], dtype=torch.float32)
        t["box_mask"][b, j, row, col] = True
    return targets


def _pred_iou_grid(
    raw: torch.Tensor,
    gt_boxes: np.ndarray,
    scale_anchors: np.ndarray,
    stride: int,
) -> torch.Tensor:
    """IoU of every slot's decoded box with its image's ground-truth box."""
    with torch.no_grad():
        b, k, gh, gw, _ = raw.shape
        cols = torch.arange(gw).view(1, 1, 1, gw)
        rows = torch.arange(gh).view(1, 1, gh, 1)
        aw = torch.as_tensor(scale_anchors[:, 0], dtype=torch.float32).view(1, k, 1, 1)
        ah = torch.as_tensor(scale_anchors[:, 1], dtype=torch.float32).view(1, k, 1, 1)
        cx = (torch.sigmoid(raw[..., 0]) + cols) * stride
        cy = (torch.sigmoid(raw[..., 1]) + rows) * stride
        w = aw * torch.exp(raw[..., 2].clamp(-_T_CLAMP, _T_CLAMP))
        h = ah * torch.exp(raw[..., 3].clamp(-_T_CLAMP, _T_CLAMP))
        px0, px1 = cx - 0.5 * w, cx + 0.5 * w
        py0, py1 = cy - 0.5 * h, cy + 0.5 * h
        gt = torch.as_tensor(gt_boxes, dtype=torch.float32).view(b, 1, 1, 1, 4)
        ix = (torch.minimum(px1, gt[..., 2]) - torch.maximum(px0, gt[..., 0])).clamp(min=0)
        iy = (torch.minimum(py1, gt[..., 3]) - torch.maximum(py0, gt[..., 1])).clamp(min=0)
        inter = ix * iy
        area_g = (gt[..., 2] - gt[..., 0]) * (gt[..., 3] - gt[..., 1])
        union = w * h + area_g - inter
        return inter / union.clamp(min=1e-9)


def detector_loss(
    preds: dict[int, torch.Tensor],
    targets: dict[int, dict[str, torch.Tensor]],
) -> tuple[torch.Tensor, dict[str, float]]:
    """Objectness BCE plus squared error on box offsets at the matched anchor.

    The BCE is averaged over three slot groups separately — the matched
    slot, unmatched slots whose quality target exceeds MATCH_IOU, and
    background — so the few informative slots are not drowned out by the
    thousands of easy background ones.
    """
    device = next(iter(preds.values())).device
    dtype = next(iter(preds.values())).dtype
    zero = torch.zeros((), device=device, dtype=dtype)
    obj_pos, obj_soft, obj_neg, box = zero, zero, zero, zero
    n_pos = 0
    for stride, p in preds.items():
        t = targets[stride]
        obj_logit = p[..., 4]
        obj_target = t["obj"].to(device=device, dtype=dtype)
        bce = F.binary_cross_entropy_with_logits(obj_logit, obj_target, reduction="none")
        pos_mask = t["box_mask"].to(device)
        keep = ~t["box_mask"] & ~t["ignore"]
        soft_mask = (keep & (t["obj"] > MATCH_IOU)).to(device)
        neg_mask = (keep & (t["obj"] <= MATCH_IOU)).to(device)
        if pos_mask.any():
            obj_pos = obj_pos + bce[pos_mask].mean()
            box_target = t["box"].to(device=device, dtype=dtype)[pos_mask]
            box_pred = p[pos_mask]
            xy = torch.sigmoid(box_pred[:, 0:2])
            wh = box_pred[:, 2:4]
            box = box + ((xy - box_target[:, 0:2]) ** 2).sum() + (
                (wh - box_target[:, 2:4]) ** 2
            ).sum()
            n_pos += int(pos_mask.sum())
        if soft_mask.any():
            obj_soft = obj_soft + bce[soft_mask].mean()
        if neg_mask.any():
            obj_neg = obj_neg + bce[neg_mask].mean()
    if n_pos:
        box = box / n_pos
    total = obj_pos + obj_soft + obj_neg + _BOX_LOSS_WEIGHT * box
    parts = {
        "obj_pos": float(obj_pos.detach()),
        "obj_soft": float(obj_soft.detach()),
        "obj_neg": float(obj_neg.detach()),
        "box": float(box.detach()),
    }
    return total, parts


@torch.no_grad()
def decode(
    preds: dict[int, torch.Tensor],
    anchors: dict[int, np.ndarray],
    confidence_threshold: float,
) -> list[list[tuple[float, float, float, float, float]]]:
    """Decode raw predictions into per-image (x0, y0, x1, y1, confidence)
    tuples in network-input coordinates, above the confidence threshold."""
    batch = next(iter(preds.values())).shape[0]
    results: list[list[tuple[float, float, float, float, float]]] = [[] for _ in range(batch)]
    for stride, p in preds.items():
        b, k, gh, gw, _ = p.shape
        conf = torch.sigmoid(p[..., 4])
        keep = conf >= confidence_threshold
        if not keep.any():
            continue
        anchor_t = torch.as_tensor(anchors[stride], dtype=p.dtype, device=p.device)
        idx = keep.nonzero(as_tuple=False)
        for bi, ai, row, col in idx.tolist():
            tx, ty, tw, th, _ = p[bi, ai, row, col].tolist()
            cx = (_sigmoid(tx) + col) * stride
            cy = (_sigmoid(ty) + row) * stride
            aw, ah = anchor_t[ai].tolist()
            bw = aw * math.exp(max(min(tw, _T_CLAMP), -_T_CLAMP))
            bh = ah * math.exp(max(min(th, _T_CLAMP), -_T_CLAMP))
            results[bi].append((
                cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2,
                float(conf[bi, ai, row, col]),
            ))
    return results


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))
