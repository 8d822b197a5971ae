"""Grad-CAM saliency maps, overlays and montage figures.

The map is the rectified, channel-weighted sum of a convolutional
layer's feature maps, where each channel weight is the spatial mean of
the positive-score gradient at that channel.  Maps are normalized by
their maximum only — an all-zero map stays all-zero — so values always
lie in [0, 1] with max in {0, 1}.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
import torch
from PIL import Image, ImageDraw

from .models.networks import last_conv_name
from .roi.boxes import BoundingBox
from .validation import check_image

OVERLAY_ALPHA = 0.4
GUTTER = 4
LEFT_BAND = 56
TOP_BAND = 16


@dataclass(frozen=True)
class SaliencyMap:
    """Heatmap at the target layer's spatial resolution (pre-upsample)."""

    heatmap: np.ndarray
    target_layer: str
    crop_shape: tuple[int, int]  # (height, width) of the source crop

    def __post_init__(self):
        if self.heatmap.ndim != 2:
            raise ValueError(f"heatmap must be 2-d, got shape {self.heatmap.shape}")

    def upsampled(self) -> np.ndarray:
        h, w = self.crop_shape
        return cv2.resize(self.heatmap, (w, h), interpolation=cv2.INTER_LINEAR)


def grad_cam(classifier, crop: np.ndarray, layer: str | None = None) -> SaliencyMap:
    """Saliency of the positive-class score for one uint8 crop.

    ``layer`` names a module of the classifier network; default is its
    last plain convolution.
    """
    check_image(crop)
    net = classifier.net_
    name = layer if layer is not None else last_conv_name(net)
    modules = dict(net.named_modules())
    if name not in modules:
        raise ValueError(f"no layer named {name!r} in network")
    captured: dict[str, torch.Tensor] = {}

    def forward_hook(_module, _inputs, output):
        # Validate here, before downstream (possibly in-place) ops consume
        # the hooked output.
        if output.ndim != 4 or output.shape[2] < 1 or output.shape[3] < 1:
            raise ValueError(
                f"layer {name!r} has no spatial extent (shape {tuple(output.shape)})"
            )
        captured["features"] = output

    def backward_hook(_module, _grad_in, grad_out):
        captured["grads"] = grad_out[0]

    handles = [
        modules[name].register_forward_hook(forward_hook),
        modules[name].register_full_backward_hook(backward_hook),
    ]
    try:
        net.eval()
        x = torch.from_numpy(crop.astype(np.float32)).permute(2, 0, 1)[None] / 255.0 - 0.5
        x.requires_grad_(True)
        net.zero_grad()
        score = net(x).reshape(())
        score.backward()
    finally:
        for handle in handles:
            handle.remove()
    feats = captured["features"]
    grads = captured["grads"]
    weights = grads.mean(dim=(2, 3))
    cam = torch.relu((weights[:, :, None, None] * feats).sum(dim=1))[0]
    heat = cam.detach().numpy().astype(np.float64)
    peak = heat.max()
    if peak > 0:
        heat = heat / peak
    return SaliencyMap(heatmap=heat, target_layer=name, crop_shape=crop.shape[:2])


def mass_inside(sal: SaliencyMap, box: BoundingBox) -> float:
    """Fraction of (upsampled) heatmap mass inside ``box``; 0 for an
    all-zero map."""
    up = sal.upsampled()
    total = up.sum()
    if total <= 0:
        return 0.0
    h, w = up.shape
    x0 = max(0, int(np.floor(box.x_min)))
    y0 = max(0, int(np.floor(box.y_min)))
    x1 = min(w, int(np.ceil(box.x_max)))
    y1 = min(h, int(np.ceil(box.y_max)))
    if x1 <= x0 or y1 <= y0:
        return 0.0
    return float(up[y0:y1, x0:x1].sum() / total)


def overlay(sal: SaliencyMap, crop: np.ndarray) -> np.ndarray:
    """Jet-colormapped heatmap alpha-blended (0.4) over the crop."""
    check_image(crop)
    if crop.shape[:2] != sal.crop_shape:
        raise ValueError(f"crop shape {crop.shape[:2]} != map's source {sal.crop_shape}")
    up = np.clip(sal.upsampled(), 0.0, 1.0)
    colored = cv2.applyColorMap(np.round(up * 255).astype(np.uint8), cv2.COLORMAP_JET)
    colored = colored[:, :, ::-1]  # BGR -> RGB
    blend = (1.0 - OVERLAY_ALPHA) * crop.astype(np.float64) + OVERLAY_ALPHA * colored
    return np.round(blend).astype(np.uint8)


def build_grid(
    panels: list[list[np.ndarray]],
    row_labels: list[str] | None = None,
    col_labels: list[str] | None = None,
) -> np.ndarray:
    """Montage of equally sized panels with label bands.

    Layout: a ``LEFT_BAND``-wide strip for row labels, a ``TOP_BAND``
    strip for column labels, and a ``GUTTER`` margin around and between
    panels, so

        width  = LEFT_BAND + cols * panel_w + (cols + 1) * GUTTER
        height = TOP_BAND  + rows * panel_h + (rows + 1) * GUTTER
    """
    if not panels or not panels[0]:
        raise ValueError("empty panel matrix")
    rows = len(panels)
    cols = len(panels[0])
    if any(len(row) != cols for row in panels):
        raise ValueError("ragged panel matrix")
    ph, pw = panels[0][0].shape[:2]
    for row in panels:
        for panel in row:
            check_image(panel)
            if panel.shape[:2] != (ph, pw):
                raise ValueError("panels must share one size")
    if row_labels is not None and len(row_labels) != rows:
        raise ValueError(f"need {rows} row labels, got {len(row_labels)}")
    if col_labels is not None and len(col_labels) != cols:
        raise ValueError(f"need {cols} column labels, got {len(col_labels)}")
    width = LEFT_BAND + cols * pw + (cols + 1) * GUTTER
    height = TOP_BAND + rows * ph + (rows + 1) * GUTTER
    sheet = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(sheet)
    for r, row in enumerate(panels):
        y = TOP_BAND + GUTTER + r * (ph + GUTTER)
        if row_labels is not None:
            draw.text((2, y + ph // 2 - 5), row_labels[r], fill=(0, 0, 0))
        for c, panel in enumerate(row):
            x = LEFT_BAND + GUTTER + c * (pw + GUTTER)
            sheet.paste(Image.fromarray(panel), (x, y))
            if r == 0 and col_labels is not None:
                draw.text((x, 2), col_labels[c], fill=(0, 0, 0))
    return np.asarray(sheet)


def emit_grid(
    panels: list[list[np.ndarray]],
    path,
    row_labels: list[str] | None = None,
    col_labels: list[str] | None = None,
) -> Path:
    """Write the montage PNG; deterministic bytes for fixed inputs."""
    grid = build_grid(panels, row_labels, col_labels)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid).save(out, format="PNG")
    return out


def saliency_filename(au: str, family: str, region_level: str, sample_id: str) -> str:
    return f"{au}_{family}_{region_level}_{sample_id}.png"
