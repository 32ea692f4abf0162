# File: tests/test_config_loader.py

"""
Tests for settings loading in `src/config_loader.py`.
"""
import logging
import pytest
import sys
import os

# --- Setup Project Root Path ---
try:
    TEST_DIR = os.path.dirname(__file__)
    PROJECT_ROOT = os.path.abspath(os.path.join(TEST_DIR, '..'))
except NameError:
    PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname('.'), '..'))
if PROJECT_ROOT not in sys.path:
     sys.path.insert(0, PROJECT_ROOT)

from src.config_loader import config_section, get_config, load_config, setup_logging
from src.exceptions import ConfigError, ConfigFileNotFoundError


def test_shipped_config_has_every_section():
    for section in ("paths", "optimizer", "modeling", "prediction", "splits", "synth", "logging"):
        assert section in get_config()
    assert config_section("modeling", "entities")["max_depth"] == 2


def test_missing_sections_read_as_empty():
    assert config_section("no", "such", "section") == {}
    assert config_section("synth", "seed") == {}


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileNotFoundError):
        load_config(str(tmp_path / "absent.yaml"))


def test_empty_file_gives_empty_settings(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    assert load_config(str(path)) == {}


@pytest.mark.parametrize("text", ["- just\n- a list\n", "key: [unclosed\n"])
def test_invalid_files(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_console_level_can_come_from_environment(monkeypatch):
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level
    try:
        monkeypatch.setenv("IER_LOG_LEVEL", "DEBUG")
        setup_logging({"logging": {"log_console_level": "ERROR"}})
        assert root.level == logging.DEBUG
        assert len(root.handlers) == 1
        assert root.handlers[0].stream is sys.stderr
    finally:
        for handler in list(root.handlers):
            root.removeHandler(handler)
        for handler in saved_handlers:
            root.addHandler(handler)
        root.setLevel(saved_level)
