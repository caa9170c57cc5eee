import logging

from snowembed.core.config import EmbeddingSettings, Settings, get_settings
from snowembed.core.logging import setup_logging


def test_defaults(tmp_path):
    settings = Settings(str(tmp_path / "missing.yaml"))
    assert settings.embedding.c_m == 4.0
    assert settings.embedding.l1_cluster_cap == 14
    assert settings.audit.c_b == 45.0
    assert settings.logging.log_level == "INFO"
    assert set(settings.as_dict()) == {"embedding", "audit"}


def test_yaml_sections(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(
        "embedding:\n  c_m: 2.5\n  dim_override: 3\naudit:\n  band_c: 8\nlogging:\n  file_logging: false\n",
        encoding="utf-8",
    )
    settings = Settings(str(path))
    assert settings.embedding.c_m == 2.5
    assert settings.embedding.dim_override == 3.0
    assert settings.audit.band_c == 8.0
    assert settings.logging.file_logging is False


def test_malformed_yaml_falls_back_to_defaults(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("embedding: [unclosed\n", encoding="utf-8")
    assert Settings(str(path)).embedding.c_m == 4.0
    path.write_text("embedding: 5\n", encoding="utf-8")
    assert Settings(str(path)).embedding.c_m == 4.0


def test_environment_override(monkeypatch):
    monkeypatch.setenv("SNOWEMBED_C_JL", "2")
    monkeypatch.setenv("SNOWEMBED_AUDIT_TAIL_SLACK", "1.5")
    assert EmbeddingSettings().c_jl == 2.0
    assert Settings("does-not-exist.yaml").audit.tail_slack == 1.5


def test_get_settings_is_cached(tmp_path):
    path = str(tmp_path / "none.yaml")
    assert get_settings(path) is get_settings(path)


def test_setup_logging_is_idempotent(tmp_path):
    setup_logging("DEBUG", str(tmp_path / "logs"), "test.log", True)
    before = len(logging.getLogger().handlers)
    setup_logging("WARNING", str(tmp_path / "logs"), "test.log", True)
    assert len(logging.getLogger().handlers) == before
    assert logging.getLogger().level == logging.WARNING
    setup_logging("INFO", None, "test.log", False)
