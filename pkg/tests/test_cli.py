"""Tests for config parsing, the command-line driver, and rerun identity."""

import json
import os

import pytest

from domvote.cli import (
    CONFIG_KEYS,
    LOCK_NAME,
    ConfigError,
    build_plan,
    load_config,
    main,
    parse_value,
    write_lock,
)

MICRO_CONFIG = """\
# tiny deterministic setup for driver tests
num_studies = 10
left_fraction = 0.35
image_size = 16
frames_min = 3
frames_max = 4
noise_sigma = 3.0
epochs = 2
lr_scale = 100
augment = false
frame_method = all
folds = 2
val_fraction = 0
"""

REPORT_FILES = ("predictions.csv", "frame_predictions.csv", "studies.csv",
                "report.csv", "report.md")


@pytest.fixture()
def micro_config(tmp_path):
    path = tmp_path / "micro.ini"
    path.write_text(MICRO_CONFIG)
    return str(path)


@pytest.fixture(scope="module")
def crossval_run(tmp_path_factory):
    """One micro cross-validation run shared by the rerun and report tests."""
    root = tmp_path_factory.mktemp("cli")
    config = root / "micro.ini"
    config.write_text(MICRO_CONFIG)
    out = root / "exp1"
    assert main(["crossval", "--config", str(config), "--out", str(out)]) == 0
    return out


class TestParseValue:
    def test_scalar_kinds(self):
        assert parse_value("epochs", "7") == 7
        assert parse_value("lr_scale", "2.5") == 2.5
        assert parse_value("dataset", "some/path") == "some/path"

    def test_bool_spellings(self):
        for text, expected in (("true", True), ("Yes", True), ("on", True),
                               ("1", True), ("false", False), ("No", False),
                               ("off", False), ("0", False)):
            assert parse_value("augment", text) is expected

    def test_sequences(self):
        assert parse_value("seeds", "1, 2,3") == (1, 2, 3)
        assert parse_value("seeds", "") == ()
        assert parse_value("fractions", "0.2,0.5, 1.0") == (0.2, 0.5, 1.0)

    def test_errors_name_the_key(self):
        with pytest.raises(ConfigError, match="'epochs'"):
            parse_value("epochs", "seven")
        with pytest.raises(ConfigError, match="'augment'"):
            parse_value("augment", "maybe")


class TestLoadConfig:
    def test_key_value_format(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("epochs = 3  # inline comment\n\n# full comment\nloss=sce\n")
        assert load_config(str(path)) == {"epochs": 3, "loss": "sce"}

    def test_empty_file_means_defaults(self, tmp_path):
        path = tmp_path / "empty.ini"
        path.write_text("")
        assert load_config(str(path)) == {}

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("epoch = 3\n")
        with pytest.raises(ConfigError, match="'epoch'"):
            load_config(str(path))

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("epochs = 3\nepochs = 4\n")
        with pytest.raises(ConfigError, match="duplicate"):
            load_config(str(path))

    def test_line_without_equals(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("epochs\n")
        with pytest.raises(ConfigError, match="key = value"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(str(tmp_path / "absent.ini"))

    def test_lock_json_round_trip(self, tmp_path):
        cfg = {key: spec[1] for key, spec in CONFIG_KEYS.items()}
        cfg["epochs"] = 9
        cfg["seeds"] = (3, 4)
        path = write_lock(str(tmp_path), "crossval", cfg)
        assert os.path.basename(path) == LOCK_NAME
        assert load_config(path) == cfg

    def test_lock_json_type_checks(self, tmp_path):
        path = tmp_path / LOCK_NAME
        path.write_text(json.dumps({"config": {"epochs": True}}))
        with pytest.raises(ConfigError, match="'epochs'"):
            load_config(str(path))
        path.write_text(json.dumps({"config": {"seeds": [1, "two"]}}))
        with pytest.raises(ConfigError, match="'seeds'"):
            load_config(str(path))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / LOCK_NAME
        path.write_text("{broken")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))


class TestBuildPlan:
    @staticmethod
    def _defaults(**overrides):
        cfg = {key: spec[1] for key, spec in CONFIG_KEYS.items()}
        cfg.update(overrides)
        return cfg

    def test_seed_used_when_seeds_empty(self):
        plan = build_plan(self._defaults(seed=5))
        assert plan.seeds == (5,)
        plan = build_plan(self._defaults(seed=5, seeds=(1, 2)))
        assert plan.seeds == (1, 2)

    def test_unknown_loss(self):
        with pytest.raises(ConfigError, match="'loss'"):
            build_plan(self._defaults(loss="focal"))

    def test_invalid_plan_values_become_config_errors(self):
        with pytest.raises(ConfigError):
            build_plan(self._defaults(folds=1))
        with pytest.raises(ConfigError):
            build_plan(self._defaults(alpha=-1.0))


class TestExitCodes:
    def test_no_arguments_is_usage_error(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_required_flags(self, capsys):
        assert main(["crossval"]) == 1

    def test_unknown_flag(self, micro_config, tmp_path, capsys):
        assert main(["crossval", "--config", micro_config,
                     "--out", str(tmp_path / "x"), "--bogus"]) == 1

    def test_version_exits_zero(self, capsys):
        assert main(["--version"]) == 0
        assert capsys.readouterr().out.startswith("domvote ")

    def test_config_error_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("epochs = seven\n")
        assert main(["crossval", "--config", str(bad),
                     "--out", str(tmp_path / "out")]) == 1
        assert "'epochs'" in capsys.readouterr().err

    def test_missing_dataset_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text(f"dataset = {tmp_path / 'nowhere' / 'manifest.json'}\n")
        assert main(["crossval", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == 2
        assert "data error" in capsys.readouterr().err


class TestSynthCommand:
    def test_writes_dataset_and_lock(self, tmp_path, capsys):
        cfg = tmp_path / "synth.ini"
        cfg.write_text("num_studies = 4\nimage_size = 16\nframes_min = 3\nframes_max = 3\n")
        out = tmp_path / "data"
        assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "manifest.json").exists()
        assert (out / "truth.json").exists()
        assert (out / LOCK_NAME).exists()
        assert "wrote 4 studies" in capsys.readouterr().out

    def test_deterministic_across_runs(self, tmp_path):
        cfg = tmp_path / "synth.ini"
        cfg.write_text("num_studies = 4\nimage_size = 16\nframes_min = 3\nframes_max = 3\n")
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["synth", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["synth", "--config", str(cfg), "--out", str(b)]) == 0
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
        assert (a / "truth.json").read_bytes() == (b / "truth.json").read_bytes()

    def test_seed_override_lands_in_lock(self, tmp_path):
        cfg = tmp_path / "synth.ini"
        cfg.write_text("num_studies = 4\nimage_size = 16\nframes_min = 3\nframes_max = 3\n")
        out = tmp_path / "data"
        assert main(["synth", "--config", str(cfg), "--out", str(out),
                     "--seed", "42"]) == 0
        lock = json.loads((out / LOCK_NAME).read_text())
        assert lock["command"] == "synth"
        assert lock["config"]["seed"] == 42


class TestCrossvalCommand:
    def test_artifacts_and_lock(self, crossval_run):
        for name in REPORT_FILES:
            assert (crossval_run / name).exists(), name
        assert (crossval_run / "dataset" / "manifest.json").exists()
        lock = json.loads((crossval_run / LOCK_NAME).read_text())
        assert lock["command"] == "crossval"
        assert lock["config"]["folds"] == 2

    def test_rerun_from_lock_is_byte_identical(self, crossval_run, tmp_path):
        out2 = tmp_path / "exp2"
        assert main(["crossval", "--config", str(crossval_run / LOCK_NAME),
                     "--out", str(out2)]) == 0
        for name in REPORT_FILES + (LOCK_NAME,):
            assert (crossval_run / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_loss_override_recorded_and_applied(self, micro_config, tmp_path):
        out = tmp_path / "ce-run"
        assert main(["crossval", "--config", micro_config, "--out", str(out),
                     "--loss", "ce"]) == 0
        lock = json.loads((out / LOCK_NAME).read_text())
        assert lock["config"]["loss"] == "ce"

    def test_fraction_override_shrinks_the_run(self, micro_config, tmp_path):
        out = tmp_path / "half"
        assert main(["crossval", "--config", micro_config, "--out", str(out),
                     "--fraction", "0.6"]) == 0
        rows = (out / "studies.csv").read_text().splitlines()[1:]
        ids = {line.split(",")[3] for line in rows}
        assert len(ids) == 6  # 10 studies at 0.6 per class: 2 left + 4 right
        lock = json.loads((out / LOCK_NAME).read_text())
        assert lock["config"]["fraction"] == 0.6


class TestReportCommand:
    def test_regenerates_byte_identical_report(self, crossval_run, capsys):
        original = (crossval_run / "report.md").read_bytes()
        (crossval_run / "report.md").unlink()
        assert main(["report", "--in", str(crossval_run)]) == 0
        assert (crossval_run / "report.md").read_bytes() == original
        assert "regenerated" in capsys.readouterr().out

    def test_requires_prediction_csvs(self, tmp_path, capsys):
        assert main(["report", "--in", str(tmp_path)]) == 1
        assert "predictions.csv" in capsys.readouterr().err
