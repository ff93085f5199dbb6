import pytest

from rlingua.config import (ConfigError, ExperimentConfig, apply_overrides,
                            parse_config, serialize_config)


class TestDefaults:
    def test_family_defaults_resolve_by_task(self):
        cfg = ExperimentConfig(task="reach").resolved()
        assert cfg.gamma == 0.975
        assert cfg.lambda_annl == 0.99995
        cfg6 = ExperimentConfig(task="pick_and_place_6d").resolved()
        assert cfg6.gamma == 0.96
        assert cfg6.lambda_annl == 0.999999

    def test_explicit_values_not_overridden(self):
        cfg = ExperimentConfig(task="reach", gamma=0.5).resolved()
        assert cfg.gamma == 0.5

    def test_validate_accepts_defaults(self):
        ExperimentConfig().validate()

    def test_validate_rejects_bad_values(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(task="fly").validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(arm="sac").validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(seeds=()).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(gamma=1.5).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(her_k=-1).validate()


class TestParsing:
    def test_parse_and_round_trip(self):
        text = "\n".join([
            "[run]",
            "task = push",
            "seeds = 0, 1, 2",
            "total_steps = 1234",
            "[agent]",
            "gamma = 0.9",
            "hidden_sizes = 32,32",
            "[mixing]",
            "p0 = 0.1",
        ]) + "\n"
        cfg = parse_config(text)
        assert cfg.task == "push"
        assert cfg.seeds == (0, 1, 2)
        assert cfg.total_steps == 1234
        assert cfg.gamma == 0.9
        assert cfg.hidden_sizes == (32, 32)
        assert cfg.p0 == 0.1
        # Canonical serialization is a fixed point of parse -> serialize.
        canonical = serialize_config(cfg)
        assert serialize_config(parse_config(canonical)) == canonical

    def test_auto_survives_round_trip(self):
        canonical = serialize_config(ExperimentConfig())
        assert "gamma = auto" in canonical
        assert parse_config(canonical).gamma is None

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[optimizer]\nlr = 1\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[run]\nspeed = 9\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="total_steps"):
            parse_config("[run]\ntotal_steps = soon\n")

    def test_malformed_file_rejected(self):
        with pytest.raises(ConfigError, match="malformed"):
            parse_config("task = push\n")  # key before any section header


class TestOverrides:
    def test_bare_and_qualified_keys(self):
        cfg = apply_overrides(ExperimentConfig(),
                              ["task=slide", "agent.gamma=0.5", "her.k=2"])
        assert cfg.task == "slide"
        assert cfg.gamma == 0.5
        assert cfg.her_k == 2

    def test_original_is_not_mutated(self):
        base = ExperimentConfig()
        apply_overrides(base, ["task=push"])
        assert base.task == "reach"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown override"):
            apply_overrides(ExperimentConfig(), ["turbo=1"])

    def test_malformed_override_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), ["task"])

    def test_seeds_list_override(self):
        cfg = apply_overrides(ExperimentConfig(), ["seeds=5,6"])
        assert cfg.seeds == (5, 6)
