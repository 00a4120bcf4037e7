import pytest

from piqa.config import (
    ConfigError,
    TrainConfig,
    config_from_file,
    config_to_text,
    desk_config,
    koniq_config,
    livec_config,
    parse_config_text,
    parse_stages,
)


class TestDefaults:
    def test_default_config_validates(self):
        cfg = TrainConfig().validate()
        assert cfg.stages == ((30, 1e-4), (30, 5e-4), (30, 1e-5))
        assert cfg.total_epochs == 90

    def test_resolved_score_form_follows_loss(self):
        assert TrainConfig(loss_form="ms").resolved_score_form == "mean_shifted"
        assert TrainConfig(loss_form="plain", use_roi=True).resolved_score_form == "plain"
        assert TrainConfig(loss_form="ms", score_form="plain").resolved_score_form == "plain"


class TestValidation:
    def test_dim_requires_highlevel(self):
        with pytest.raises(ConfigError, match="use_dim"):
            TrainConfig(use_dim=True, use_highlevel=False).validate()

    def test_ms_requires_roi(self):
        with pytest.raises(ConfigError, match="use_roi"):
            TrainConfig(loss_form="ms", use_roi=False).validate()

    def test_bad_stage_values(self):
        with pytest.raises(ConfigError):
            TrainConfig(stages=((0, 1e-4),)).validate()
        with pytest.raises(ConfigError):
            TrainConfig(stages=((10, -1e-4),)).validate()
        with pytest.raises(ConfigError):
            TrainConfig(stages=()).validate()

    def test_bad_forms(self):
        with pytest.raises(ConfigError):
            TrainConfig(loss_form="l2").validate()
        with pytest.raises(ConfigError):
            TrainConfig(roi_normalize="sigmoid").validate()

    def test_dim_rates_ordering(self):
        with pytest.raises(ValueError):
            TrainConfig(dim_rates=(8, 4, 2)).validate()


class TestStageParsing:
    def test_parse(self):
        assert parse_stages("30:1e-4,30:5e-4,30:1e-5") == ((30, 1e-4), (30, 5e-4), (30, 1e-5))

    def test_bad_spec(self):
        with pytest.raises(ConfigError):
            parse_stages("30")
        with pytest.raises(ConfigError):
            parse_stages("")


class TestConfigFile:
    def test_parse_text(self):
        text = """
        # a comment
        name = demo
        stages = 2:1e-3,1:1e-4
        batch_size = 12
        loss.form = plain
        roi.normalize = softmax
        use_dim = false
        seed = 42
        """
        values = parse_config_text(text)
        assert values["name"] == "demo"
        assert values["stages"] == ((2, 1e-3), (1, 1e-4))
        assert values["batch_size"] == 12
        assert values["loss_form"] == "plain"
        assert values["roi_normalize"] == "softmax"
        assert values["use_dim"] is False
        assert values["seed"] == 42

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("name = x\nbogus = 1\n")

    def test_file_roundtrip(self, tmp_path):
        cfg = TrainConfig(name="rt", stages=((2, 1e-3),), batch_size=4,
                          use_dim=False, roi_normalize="softmax").validate()
        path = tmp_path / "run.cfg"
        path.write_text(config_to_text(cfg))
        loaded = config_from_file(path)
        assert loaded == cfg

    def test_cli_overrides_win(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("name = base\nseed = 1\n")
        cfg = config_from_file(path, seed=9, batch_size=2)
        assert cfg.seed == 9
        assert cfg.batch_size == 2
        assert cfg.name == "base"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            config_from_file(tmp_path / "none.cfg")


class TestPresets:
    def test_dataset_batch_sizes(self):
        assert koniq_config().batch_size == 48
        assert livec_config().batch_size == 36

    def test_staged_learning_rates(self):
        cfg = koniq_config()
        assert [lr for _, lr in cfg.stages] == [1e-4, 5e-4, 1e-5]
        assert [e for e, _ in cfg.stages] == [30, 30, 30]

    def test_desk_preset_is_small(self):
        cfg = desk_config()
        assert cfg.total_epochs <= 20

    def test_snapshot_records_resize_kernel(self):
        assert koniq_config().snapshot()["resize_kernel"] == "bilinear"
