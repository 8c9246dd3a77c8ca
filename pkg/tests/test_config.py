"""Layered configuration: defaults, YAML file, environment overrides."""

from __future__ import annotations

import pytest

from stitchtext.config import ConfigError, load_config
from stitchtext.pipeline import ReviseGate


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


class TestDefaults:
    def test_defaults_without_file(self):
        config = load_config(env={})
        assert config.pipeline.copy_target == 0.9
        assert config.pipeline.copy_rate_threshold == 0.6
        assert config.pipeline.word_target == 500
        assert config.pipeline.max_polish_rounds == 3
        assert config.pipeline.revise_gate is ReviseGate.EITHER
        assert config.backend.max_in_flight == 4
        assert config.retry.max_attempts == 3
        assert config.sweep.copy_targets == [0.25, 0.5, 0.75, 0.9]


class TestFileLayer:
    def test_file_overrides_defaults(self, tmp_path):
        path = _write(
            tmp_path,
            "pipeline:\n  copy_target: 0.75\n  seed: 11\nbackend:\n  model: m-large\n",
        )
        config = load_config(path, env={})
        assert config.pipeline.copy_target == 0.75
        assert config.pipeline.seed == 11
        assert config.backend.model == "m-large"
        assert config.pipeline.model_id == "m-large"  # inherited from backend

    def test_unknown_section_suggests(self, tmp_path):
        path = _write(tmp_path, "pipelines:\n  seed: 1\n")
        with pytest.raises(ConfigError) as excinfo:
            load_config(path, env={})
        assert "pipeline" in str(excinfo.value)

    def test_unknown_key_suggests(self, tmp_path):
        path = _write(tmp_path, "pipeline:\n  copy_tagret: 0.5\n")
        with pytest.raises(ConfigError) as excinfo:
            load_config(path, env={})
        assert "copy_target" in str(excinfo.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml", env={})

    def test_invalid_yaml(self, tmp_path):
        path = _write(tmp_path, "pipeline: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_validation_runs_after_merge(self, tmp_path):
        path = _write(tmp_path, "pipeline:\n  copy_target: 0.5\n")
        # File sets target below the default threshold 0.6.
        with pytest.raises(Exception):
            load_config(path, env={})

    def test_detectors_list(self, tmp_path):
        path = _write(
            tmp_path,
            "detectors:\n"
            "  - id: det_a\n    kind: transcript\n    transcript: det_a.jsonl\n"
            "  - id: det_b\n    kind: http\n    url: http://localhost:9\n    threshold: 0.9\n",
        )
        config = load_config(path, env={})
        assert [d.id for d in config.detectors] == ["det_a", "det_b"]
        # Relative transcript paths resolve against the config file directory.
        assert config.detectors[0].transcript == str((tmp_path / "det_a.jsonl").resolve())
        assert config.detectors[1].threshold == 0.9

    def test_detector_missing_id(self, tmp_path):
        path = _write(tmp_path, "detectors:\n  - kind: http\n    url: http://x\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_relative_cache_dir_resolved(self, tmp_path):
        path = _write(tmp_path, "cache:\n  dir: my_cache\n")
        config = load_config(path, env={})
        assert config.cache.dir == str((tmp_path / "my_cache").resolve())


class TestEnvLayer:
    def test_env_overrides_file(self, tmp_path):
        path = _write(tmp_path, "pipeline:\n  seed: 1\n")
        config = load_config(path, env={"STITCHTEXT_PIPELINE__SEED": "99"})
        assert config.pipeline.seed == 99

    def test_env_values_are_yaml_typed(self):
        config = load_config(
            env={
                "STITCHTEXT_PIPELINE__COPY_TARGET": "0.8",
                "STITCHTEXT_JUDGE__ENABLED": "true",
                "STITCHTEXT_BACKEND__MODEL": "m9",
            }
        )
        assert config.pipeline.copy_target == 0.8
        assert config.judge.enabled is True
        assert config.backend.model == "m9"

    def test_env_unknown_key_fails(self):
        with pytest.raises(ConfigError):
            load_config(env={"STITCHTEXT_PIPELINE__CPY_TARGET": "0.8"})

    def test_env_unknown_section_fails(self):
        with pytest.raises(ConfigError):
            load_config(env={"STITCHTEXT_PIPLINE__SEED": "1"})

    def test_unrelated_env_ignored(self):
        config = load_config(env={"PATH": "/bin", "STITCHTEXT_NOUNDERSCORE": "x"})
        assert config.pipeline.seed == 0


class TestResolvedEcho:
    def test_resolved_is_plain_data(self):
        resolved = load_config(env={}).resolved()
        assert resolved["pipeline"]["revise_gate"] == "either"
        assert resolved["backend"]["model"] == "default"
        import json

        json.dumps(resolved)  # must be JSON-serializable for manifests

    def test_scope_validated(self, tmp_path):
        path = _write(tmp_path, "corpus:\n  scope: chapter\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_report_formats_validated(self, tmp_path):
        path = _write(tmp_path, "report:\n  formats: [machine, pdf]\n")
        with pytest.raises(ConfigError):
            load_config(path, env={})
