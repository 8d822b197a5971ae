"""Experiment configuration: a TOML or JSON file with one section per
pipeline stage.  Validation collects *all* violations before failing so
a bad config is fixed in one round trip.  Relative paths are resolved
against the config file's directory.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data.aus import IN_SCOPE_CODES
from .models.networks import FAMILIES, REGION_LEVELS
from .synth import CONTRASTS

CROP_SOURCES = ("cascade", "oracle")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in violations))


@dataclass
class RunSection:
    seed: int | None = None
    out: str | None = None


@dataclass
class DataSection:
    manifest: str | None = None
    boxes: str | None = None
    media_root: str | None = None
    frame_cache: str | None = None


@dataclass
class ExperimentSection:
    aus: list[str] = field(default_factory=lambda: ["AU101"])
    families: list[str] = field(default_factory=lambda: ["drml"])
    region_levels: list[str] = field(default_factory=lambda: ["region"])
    folds: list[int] = field(default_factory=lambda: list(range(8)))
    crop_source: str = "cascade"
    jobs: int = 1


@dataclass
class DetectorSection:
    epochs: int = 40
    batch_size: int = 8
    learning_rate: float = 1e-3
    confidence_threshold: float = 0.25
    nms_iou: float = 0.45


@dataclass
class ClassifierSection:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-2
    patience: int = 20
    threshold: float = 0.5


@dataclass
class SynthSection:
    image_size: int = 512
    n_per_class: int = 24
    aus: list[str] = field(default_factory=lambda: ["AU101", "AU25"])
    contrast: str = "easy"
    face_scale: list[float] = field(default_factory=lambda: [0.2, 0.5])


_SECTIONS = {
    "run": RunSection,
    "data": DataSection,
    "experiment": ExperimentSection,
    "detector": DetectorSection,
    "classifier": ClassifierSection,
    "synth": SynthSection,
}


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataSection = field(default_factory=DataSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    synth: SynthSection = field(default_factory=SynthSection)
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self) -> list[str]:
        """All violations, empty when the config is usable."""
        v: list[str] = []
        if self.run.seed is None:
            v.append("run.seed is mandatory")
        exp = self.experiment
        for au in exp.aus:
            if au not in IN_SCOPE_CODES:
                v.append(f"experiment.aus: {au!r} is not an in-scope code")
        for fam in exp.families:
            if fam not in FAMILIES:
                v.append(f"experiment.families: {fam!r} not in {FAMILIES}")
        for level in exp.region_levels:
            if level not in REGION_LEVELS:
                v.append(f"experiment.region_levels: {level!r} not in {REGION_LEVELS}")
        for fold in exp.folds:
            if not 0 <= fold <= 7:
                v.append(f"experiment.folds: {fold} outside 0..7")
        if len(set(exp.folds)) != len(exp.folds):
            v.append("experiment.folds: duplicate entries")
        if not exp.folds:
            v.append("experiment.folds: empty")
        if exp.crop_source not in CROP_SOURCES:
            v.append(f"experiment.crop_source: {exp.crop_source!r} not in {CROP_SOURCES}")
        if exp.jobs < 1:
            v.append("experiment.jobs must be >= 1")
        det, clf = self.detector, self.classifier
        for label, value in (("detector.epochs", det.epochs), ("detector.batch_size", det.batch_size),
                             ("classifier.epochs", clf.epochs), ("classifier.batch_size", clf.batch_size)):
            if value < 1:
                v.append(f"{label} must be >= 1")
        for label, value in (("detector.learning_rate", det.learning_rate),
                             ("classifier.learning_rate", clf.learning_rate)):
            if not value > 0:
                v.append(f"{label} must be positive")
        if not 0.0 < det.confidence_threshold < 1.0:
            v.append("detector.confidence_threshold must lie in (0, 1)")
        if not 0.0 < det.nms_iou < 1.0:
            v.append("detector.nms_iou must lie in (0, 1)")
        if not 0.0 < clf.threshold < 1.0:
            v.append("classifier.threshold must lie in (0, 1)")
        if clf.patience < 1:
            v.append("classifier.patience must be >= 1")
        syn = self.synth
        if syn.contrast not in CONTRASTS:
            v.append(f"synth.contrast: {syn.contrast!r} not in {CONTRASTS}")
        if syn.image_size < 64:
            v.append("synth.image_size must be >= 64")
        if syn.n_per_class < 1:
            v.append("synth.n_per_class must be >= 1")
        for au in syn.aus:
            if au not in IN_SCOPE_CODES:
                v.append(f"synth.aus: {au!r} is not an in-scope code")
        if len(syn.face_scale) != 2 or not 0 < syn.face_scale[0] <= syn.face_scale[1] <= 1:
            v.append(f"synth.face_scale must be [lo, hi] with 0 < lo <= hi <= 1, got {syn.face_scale}")
        return v

    def require(self, *fields: str) -> list[str]:
        """Violations for stage-specific mandatory data paths, e.g.
        require("data.manifest", "run.out")."""
        v = []
        for dotted in fields:
            section, name = dotted.split(".")
            if getattr(getattr(self, section), name) is None:
                v.append(f"{dotted} is required for this command")
        return v


def _build_section(cls, payload: dict, section: str, violations: list[str]):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in payload.items():
        if key not in known:
            violations.append(f"unknown key {section}.{key}")
            continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as err:
        violations.append(f"section {section}: {err}")
        return cls()


def parse_config(payload: dict, base_dir: Path) -> RunConfig:
    violations: list[str] = []
    sections = {}
    for name, value in payload.items():
        if name not in _SECTIONS:
            violations.append(f"unknown section [{name}]")
            continue
        if not isinstance(value, dict):
            violations.append(f"section [{name}] must be a table/object")
            continue
        sections[name] = _build_section(_SECTIONS[name], value, name, violations)
    if violations:
        raise ConfigError(violations)
    return RunConfig(base_dir=base_dir, **sections)


def load_config(path) -> RunConfig:
    """Parse a .toml or .json config; structural errors raise ConfigError."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"])
    if p.suffix == ".json":
        payload = json.loads(p.read_text(encoding="utf-8"))
    else:
        with open(p, "rb") as fh:
            payload = tomllib.load(fh)
    return parse_config(payload, p.resolve().parent)
