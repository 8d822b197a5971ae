"""Procedural synthetic corpus with exact ground truth.

Each generated frame contains one elliptical "face" on a textured
background, an eye region and a lower-face region at fixed fractional
offsets inside the face, landmark glyphs anchoring those regions, and
per-AU feature glyphs rendered inside the owning region.  Positive
frames draw the AU's distinctive glyph; negative frames draw a neutral
variant at the same anchor.  Every frame ships with exact face / eye /
lower-face boxes, and positives additionally record the feature-glyph
box, so detector IoU, classifier and saliency-localization oracles all
have ground truth.

Eight synthetic subjects with distinct background/face styles make
subject-exclusive folds meaningful.  Everything is a pure function of
(spec, seed).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from .data.aus import IN_SCOPE_CODES, NEUTRAL_CODE, region_for
from .data.manifest import ClipLabel, save_manifest
from .roi.boxes import BoundingBox, BoxAnnotation, save_box_annotations
from .seeding import derive_rng

logger = logging.getLogger(__name__)

CONTRASTS = ("easy", "hard", "null")
# contrast preset -> (glyph intensity delta, background noise sigma)
_CONTRAST_PARAMS = {"easy": (90.0, 4.0), "hard": (14.0, 6.0), "null": (0.0, 4.0)}

FRAMES_DIR = "frames"
MANIFEST_NAME = "manifest.jsonl"
BOXES_NAME = "boxes.jsonl"

# glyph anchor, as fractions of the owning region box
_AU_ANCHORS = {
    "AU101": (0.50, 0.30),
    "AD1": (0.30, 0.65),
    "AU145": (0.50, 0.50),
    "AU47": (0.70, 0.65),
    "AU5": (0.50, 0.70),
    "AU25": (0.50, 0.35),
    "AD19": (0.50, 0.68),
    "AD38": (0.32, 0.50),
    "AUH13": (0.68, 0.50),
}
_GLYPH_FRACTION = 0.5  # glyph box side relative to the smaller region side


@dataclass(frozen=True)
class SynthSpec:
    """Corpus generation parameters.

    ``face_scale`` is the face width as a fraction of the frame side;
    faces are always fully inside the frame.  ``contrast`` selects the
    glyph rendering preset: "easy" (high contrast), "hard" (faint
    glyphs plus extra noise) or "null" (glyphs disabled everywhere, for
    leakage controls).
    """

    image_size: int = 512
    face_scale: tuple[float, float] = (0.2, 0.5)
    aus: tuple[str, ...] = ("AU101", "AU25")
    contrast: str = "easy"
    n_subjects: int = 8

    def validate(self) -> None:
        if self.image_size < 64:
            raise ValueError(f"image_size too small: {self.image_size}")
        lo, hi = self.face_scale
        if not 0.0 < lo <= hi:
            raise ValueError(f"invalid face_scale range {self.face_scale}")
        if hi > 1.0:
            raise ValueError(f"face_scale {hi} exceeds the frame")
        if self.contrast not in CONTRASTS:
            raise ValueError(f"unknown contrast {self.contrast!r}, expected one of {CONTRASTS}")
        unknown = sorted(set(self.aus) - set(IN_SCOPE_CODES))
        if unknown:
            raise ValueError(f"aus not in scope: {unknown}")
        if self.n_subjects < 1:
            raise ValueError("need at least one subject")


@dataclass(frozen=True)
class _SubjectStyle:
    bg_color: tuple[float, float, float]
    bg_freq: tuple[float, float]
    bg_phase: float
    bg_amp: float
    face_color: tuple[float, float, float]
    face_aspect: float


def _subject_style(seed: int, subject: str) -> _SubjectStyle:
    rng = derive_rng(seed, "synth", "style", subject)
    return _SubjectStyle(
        bg_color=tuple(rng.uniform(40.0, 110.0, 3)),
        bg_freq=tuple(rng.uniform(2.0, 9.0, 2)),
        bg_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        bg_amp=float(rng.uniform(8.0, 22.0)),
        face_color=tuple(rng.uniform(150.0, 215.0, 3)),
        face_aspect=float(rng.uniform(1.0, 1.25)),
    )


def feature_box(region_box: BoundingBox, au: str) -> BoundingBox:
    """Ground-truth bounding box of the AU glyph inside its region."""
    ax, ay = _AU_ANCHORS[au]
    side = _GLYPH_FRACTION * min(region_box.width, region_box.height)
    cx = region_box.x_min + ax * region_box.width
    cy = region_box.y_min + ay * region_box.height
    return BoundingBox(cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2)


def _ink(canvas: np.ndarray, box: BoundingBox, delta: float, rng: np.random.Generator) -> tuple:
    """Glyph color: region base intensity shifted down by ``delta``."""
    x0, y0 = int(box.x_min), int(box.y_min)
    x1, y1 = max(x0 + 1, int(box.x_max)), max(y0 + 1, int(box.y_max))
    base = canvas[y0:y1, x0:x1].mean(axis=(0, 1))
    jitter = rng.uniform(-2.0, 2.0)
    return tuple(float(np.clip(c - delta + jitter, 0, 255)) for c in base)


def render_au_feature(
    canvas: np.ndarray,
    region_box: BoundingBox,
    au: str,
    present: bool,
    rng: np.random.Generator,
    contrast: str = "easy",
) -> np.ndarray:
    """Draw the present glyph or its neutral variant for one AU.

    Mutates ``canvas`` in place (and returns it); all strokes stay
    inside ``region_box``.
    """
    if au not in _AU_ANCHORS:
        raise ValueError(f"no glyph renderer for {au!r}")
    delta, _ = _CONTRAST_PARAMS[contrast]
    if delta == 0.0:
        present = False  # null preset: neutral variant everywhere
    box = feature_box(region_box, au)
    color = _ink(canvas, box, delta if delta > 0.0 else 10.0, rng)
    cx, cy = (int(round(v)) for v in box.center)
    half = int(box.width / 2)
    quarter = max(1, half // 2)
    thick = max(1, half // 4)
    if au == "AU101":  # angular wedge vs flat bar
        if present:
            pts = np.array(
                [[cx - half, cy + quarter], [cx, cy - half], [cx + half, cy + quarter]], np.int32
            )
            cv2.fillPoly(canvas, [pts], color)
        else:
            cv2.rectangle(canvas, (cx - half, cy - thick), (cx + half, cy + thick), color, -1)
    elif au == "AD1":  # cross strokes vs single dot
        if present:
            cv2.line(canvas, (cx - half, cy - half), (cx + half, cy + half), color, thick)
            cv2.line(canvas, (cx - half, cy + half), (cx + half, cy - half), color, thick)
        else:
            cv2.circle(canvas, (cx, cy), quarter // 2 + 1, color, -1)
    elif au == "AU145":  # closed-lid bar vs thin arc
        if present:
            cv2.rectangle(canvas, (cx - half, cy - quarter), (cx + half, cy + quarter), color, -1)
        else:
            cv2.ellipse(canvas, (cx, cy), (half, quarter), 0, 200, 340, color, thick)
    elif au == "AU47":  # filled diamond vs small square
        if present:
            pts = np.array(
                [[cx, cy - half], [cx + half, cy], [cx, cy + half], [cx - half, cy]], np.int32
            )
            cv2.fillPoly(canvas, [pts], color)
        else:
            cv2.rectangle(canvas, (cx - quarter // 2, cy - quarter // 2),
                          (cx + quarter // 2, cy + quarter // 2), color, -1)
    elif au == "AU5":  # wide ring vs filled dot
        if present:
            cv2.circle(canvas, (cx, cy), half - thick // 2, color, thick)
        else:
            cv2.circle(canvas, (cx, cy), quarter // 2 + 1, color, -1)
    elif au == "AU25":  # wide slit vs thin line
        if present:
            cv2.rectangle(canvas, (cx - half, cy - quarter), (cx + half, cy + quarter), color, -1)
        else:
            cv2.line(canvas, (cx - half, cy), (cx + half, cy), color, 1)
    elif au == "AD19":  # filled half-disc vs flat bar
        if present:
            cv2.ellipse(canvas, (cx, cy - quarter), (half, half + quarter), 0, 0, 180, color, -1)
        else:
            cv2.rectangle(canvas, (cx - half, cy - thick), (cx + half, cy + thick), color, -1)
    elif au == "AD38":  # two large discs vs two small ones
        r = half // 2 + 1 if present else max(1, quarter // 2)
        cv2.circle(canvas, (cx - quarter, cy), r, color, -1)
        cv2.circle(canvas, (cx + quarter, cy), r, color, -1)
    elif au == "AUH13":  # chevron vs horizontal line
        if present:
            cv2.line(canvas, (cx - half, cy + quarter), (cx, cy - quarter), color, thick)
            cv2.line(canvas, (cx, cy - quarter), (cx + half, cy + quarter), color, thick)
        else:
            cv2.line(canvas, (cx - half, cy), (cx + half, cy), color, 1)
    return canvas


def _region_boxes(face: BoundingBox, rng: np.random.Generator) -> dict[str, BoundingBox]:
    """Eye and lower-face boxes at jittered fractional face offsets;
    both strictly inside the face box by construction."""
    w, h = face.width, face.height
    jx, jy = rng.uniform(-0.02, 0.02, 2)
    cx, cy = face.center
    eye = BoundingBox(
        cx + (jx - 0.30) * w, cy + (jy - 0.35) * h,
        cx + (jx + 0.08) * w, cy + (jy - 0.09) * h,
    )
    lower = BoundingBox(
        cx + (jx - 0.22) * w, cy + (jy + 0.12) * h,
        cx + (jx + 0.22) * w, cy + (jy + 0.42) * h,
    )
    return {"eye": eye, "lower_face": lower}


def _draw_landmarks(canvas: np.ndarray, regions: dict[str, BoundingBox]) -> None:
    eye = regions["eye"]
    ecx, ecy = (int(round(v)) for v in eye.center)
    cv2.ellipse(canvas, (ecx, ecy), (int(0.30 * eye.width), int(0.16 * eye.height)),
                0, 0, 360, (35, 30, 30), -1)
    cv2.circle(canvas, (ecx, ecy), max(2, int(0.06 * eye.width)), (10, 10, 10), -1)
    low = regions["lower_face"]
    for fx in (0.35, 0.65):
        nx = int(low.x_min + fx * low.width)
        ny = int(low.y_min + 0.55 * low.height)
        cv2.ellipse(canvas, (nx, ny), (max(2, int(0.07 * low.width)), max(2, int(0.10 * low.height))),
                    0, 0, 360, (45, 35, 35), -1)


def generate_frame(
    spec: SynthSpec, seed: int, clip_id: str, subject: str, label: str
) -> tuple[np.ndarray, dict[str, BoundingBox]]:
    """One frame plus its ground-truth boxes (face, eye, lower_face and,
    for positives, the AU feature box keyed by the AU code)."""
    style = _subject_style(seed, subject)
    rng = derive_rng(seed, "synth", "frame", clip_id)
    size = spec.image_size
    _, noise_sigma = _CONTRAST_PARAMS[spec.contrast]

    coords = np.arange(size, dtype=np.float64) / size
    wave = np.sin(
        2.0 * np.pi * (style.bg_freq[0] * coords[None, :] + style.bg_freq[1] * coords[:, None])
        + style.bg_phase
    )
    canvas = np.asarray(style.bg_color, dtype=np.float64) + style.bg_amp * wave[..., None]
    canvas = np.clip(canvas, 0, 255).astype(np.uint8)
    canvas = np.ascontiguousarray(canvas)

    half_w = int(rng.uniform(*spec.face_scale) * size / 2)
    half_h = min(int(style.face_aspect * half_w), size // 2 - 2)
    half_w = max(half_w, 24)
    half_h = max(half_h, half_w)
    cx = int(rng.uniform(half_w + 1, size - half_w - 1))
    cy = int(rng.uniform(half_h + 1, size - half_h - 1))
    cv2.ellipse(canvas, (cx, cy), (half_w, half_h), 0, 0, 360, style.face_color, -1)
    face = BoundingBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)

    regions = _region_boxes(face, rng)
    _draw_landmarks(canvas, regions)

    boxes: dict[str, BoundingBox] = {"face": face, **regions}
    for au in spec.aus:
        region = regions[region_for(au)]
        present = au == label and spec.contrast != "null"
        render_au_feature(canvas, region, au, present, rng, spec.contrast)
        if present:
            boxes[au] = feature_box(region, au)

    noisy = canvas.astype(np.float64) + rng.normal(0.0, noise_sigma, canvas.shape)
    return np.clip(noisy, 0, 255).astype(np.uint8), boxes


def corpus_clips(spec: SynthSpec, n_per_class: int) -> list[ClipLabel]:
    """The manifest of a corpus: per AU, ``n_per_class`` positive clips
    and ``n_per_class`` neutral-labeled negatives, subjects round-robin
    within each (AU, polarity) group."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    subjects = [f"s{i}" for i in range(spec.n_subjects)]
    clips = []
    for au in spec.aus:
        for polarity, label in (("pos", au), ("neg", NEUTRAL_CODE)):
            for i in range(n_per_class):
                clip_id = f"{au}_{polarity}_{i:04d}"
                clips.append(
                    ClipLabel(
                        clip_id=clip_id,
                        subject_id=subjects[i % len(subjects)],
                        au=label,
                        t_start=0.0,
                        t_end=1.0,
                        video_uri=f"{FRAMES_DIR}/{clip_id}.png",
                    )
                )
    return clips


def generate_corpus(spec: SynthSpec, n_per_class: int, seed: int, out_dir) -> dict[str, Path]:
    """Render the corpus to ``out_dir``; returns the artifact paths.

    Layout: ``manifest.jsonl``, ``boxes.jsonl`` and ``frames/<clip>.png``.
    Byte-identical for identical (spec, n_per_class, seed).
    """
    spec.validate()
    out = Path(out_dir)
    frames_dir = out / FRAMES_DIR
    frames_dir.mkdir(parents=True, exist_ok=True)
    clips = corpus_clips(spec, n_per_class)
    annotations = []
    for clip in clips:
        image, boxes = generate_frame(spec, seed, clip.clip_id, clip.subject_id, clip.au)
        if not cv2.imwrite(str(frames_dir / f"{clip.clip_id}.png"), image[:, :, ::-1]):
            raise OSError(f"failed to write frame for {clip.clip_id}")
        for kind, box in boxes.items():
            annotations.append(BoxAnnotation(image=clip.clip_id, kind=kind, box=box))
    manifest_path = out / MANIFEST_NAME
    boxes_path = out / BOXES_NAME
    save_manifest(clips, manifest_path)
    save_box_annotations(annotations, boxes_path)
    logger.info("synthetic corpus: %d frames under %s", len(clips), out)
    return {"manifest": manifest_path, "boxes": boxes_path, "frames": frames_dir}


def null_variant(spec: SynthSpec) -> SynthSpec:
    """The same corpus spec with glyphs disabled (leakage control)."""
    return replace(spec, contrast="null")
