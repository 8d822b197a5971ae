"""Config parsing and whole-file validation."""

import pytest

from equicascade.config import ConfigError, RunConfig, load_config, parse_config

GOOD_TOML = """
[run]
seed = 7
out = "results"

[data]
manifest = "manifest.jsonl"
boxes = "/abs/boxes.jsonl"

[experiment]
aus = ["AU101"]
families = ["drml", "alexnet"]
region_levels = ["region", "frame", "face"]
folds = [0, 1, 2]
crop_source = "oracle"

[classifier]
epochs = 3
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoading:
    def test_toml_round_trip(self, tmp_path):
        cfg = load_config(_write(tmp_path, "run.toml", GOOD_TOML))
        assert cfg.run.seed == 7
        assert cfg.experiment.families == ["drml", "alexnet"]
        assert cfg.experiment.crop_source == "oracle"
        assert cfg.classifier.epochs == 3
        assert cfg.detector.epochs == 40  # untouched section keeps defaults
        assert cfg.validate() == []

    def test_json_equivalent(self, tmp_path):
        path = _write(
            tmp_path,
            "run.json",
            '{"run": {"seed": 7}, "experiment": {"aus": ["AU25"]}}',
        )
        cfg = load_config(path)
        assert cfg.run.seed == 7
        assert cfg.experiment.aus == ["AU25"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.toml")

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        cfg = load_config(_write(tmp_path, "run.toml", GOOD_TOML))
        assert cfg.resolve(cfg.data.manifest) == tmp_path / "manifest.jsonl"
        assert str(cfg.resolve(cfg.data.boxes)) == "/abs/boxes.jsonl"
        assert cfg.resolve(None) is None


class TestStructuralErrors:
    def test_unknown_section_and_key_collected_together(self):
        payload = {"rnu": {"seed": 1}, "experiment": {"auss": []}, "run": 3}
        with pytest.raises(ConfigError) as err:
            parse_config(payload, base_dir=None)
        joined = "\n".join(err.value.violations)
        assert "unknown section [rnu]" in joined
        assert "unknown key experiment.auss" in joined
        assert "[run] must be a table" in joined
        assert len(err.value.violations) == 3


class TestValidation:
    def test_all_violations_reported_at_once(self):
        cfg = RunConfig()
        cfg.experiment.aus = ["AU999"]
        cfg.experiment.families = ["resnet"]
        cfg.experiment.region_levels = ["pixel"]
        cfg.experiment.folds = [0, 0, 9]
        cfg.experiment.crop_source = "manual"
        cfg.experiment.jobs = 0
        cfg.detector.epochs = 0
        cfg.detector.learning_rate = -1.0
        cfg.detector.confidence_threshold = 1.5
        cfg.detector.nms_iou = 0.0
        cfg.classifier.threshold = 1.0
        cfg.classifier.patience = 0
        cfg.synth.contrast = "extreme"
        cfg.synth.image_size = 16
        cfg.synth.n_per_class = 0
        cfg.synth.aus = ["XYZ"]
        cfg.synth.face_scale = [0.5]
        violations = cfg.validate()
        assert "run.seed is mandatory" in violations
        for fragment in (
            "AU999",
            "resnet",
            "pixel",
            "9 outside",
            "duplicate",
            "manual",
            "jobs",
            "detector.epochs",
            "detector.learning_rate",
            "confidence_threshold",
            "nms_iou",
            "classifier.threshold",
            "patience",
            "extreme",
            "image_size",
            "n_per_class",
            "XYZ",
            "face_scale",
        ):
            assert any(fragment in v for v in violations), fragment
        assert len(violations) >= 18

    def test_clean_config_with_seed(self):
        cfg = RunConfig()
        cfg.run.seed = 0
        assert cfg.validate() == []

    def test_require_reports_missing_paths(self):
        cfg = RunConfig()
        cfg.data.manifest = "m.jsonl"
        missing = cfg.require("data.manifest", "data.boxes", "run.out")
        assert missing == [
            "data.boxes is required for this command",
            "run.out is required for this command",
        ]

    def test_error_message_lists_each_violation(self):
        err = ConfigError(["a bad", "b worse"])
        assert "  - a bad" in str(err) and "  - b worse" in str(err)
