# File: src/config_loader.py

"""
Project settings and logging for the IER parser.

Importing this module:
1.  puts the project root on `sys.path`;
2.  reads `.env`, where `IER_CONFIG_PATH` can point at another YAML file and
    `IER_LOG_LEVEL` can raise or lower the console log level;
3.  loads `config/config.yaml` into the module-level `CONFIG` dict;
4.  installs the root logging handlers described by its `logging` block.

A missing or unreadable config file is logged and leaves `CONFIG` empty;
every consumer reads through `config_section(...)` and supplies its own
defaults. Console output goes to stderr, since the CLI writes data to stdout.
"""

import yaml
import os
import logging
import logging.handlers
import sys
from functools import lru_cache
from dotenv import load_dotenv

# --- Project Root ---

try:
    PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
except NameError:
    PROJECT_ROOT = os.path.abspath('.')

if PROJECT_ROOT not in sys.path:
     sys.path.insert(0, PROJECT_ROOT)

from src.exceptions import ConfigFileNotFoundError, ConfigError

DEFAULT_CONFIG_PATH = os.path.join(PROJECT_ROOT, 'config', 'config.yaml')
DEFAULT_LOG_FORMAT = '%(asctime)s - [%(levelname)s] - %(name)s - %(message)s'
LOG_FILE_MAX_BYTES = 5 * 1024 * 1024
LOG_FILE_BACKUPS = 3


def _read_env_file():
    env_file = os.path.join(PROJECT_ROOT, '.env')
    if not os.path.exists(env_file):
        return
    try:
        load_dotenv(dotenv_path=env_file)
    except Exception as e:
        logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
        logging.warning(f"Ignoring unreadable .env file {env_file}: {e}")


_read_env_file()
CONFIG_PATH = os.getenv('IER_CONFIG_PATH') or DEFAULT_CONFIG_PATH


@lru_cache()
def load_config(config_path=CONFIG_PATH):
    """
    Reads the YAML settings file once per path.

    Returns:
        dict: the parsed mapping ({} for an empty file).

    Raises:
        ConfigFileNotFoundError: no file at `config_path`.
        ConfigError: the YAML is invalid or its top level is not a mapping.
    """
    log = logging.getLogger(__name__)
    if not os.path.exists(config_path):
        raise ConfigFileNotFoundError(f"Configuration file not found at: {config_path}")
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            settings = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {config_path}: {e}") from e
    if settings is None:
        log.warning(f"Configuration file is empty: {config_path}")
        return {}
    if not isinstance(settings, dict):
        raise ConfigError(f"Configuration root must be a mapping, got {type(settings).__name__}")
    log.debug(f"Loaded settings from {config_path}: sections {sorted(settings)}")
    return settings


def _level(name, fallback):
    return getattr(logging, str(name).upper(), fallback)


def _file_handler(filename, level, formatter):
    path = os.path.join(PROJECT_ROOT, filename)
    handler = logging.handlers.RotatingFileHandler(
        path, maxBytes=LOG_FILE_MAX_BYTES, backupCount=LOG_FILE_BACKUPS, encoding='utf-8')
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logging(config):
    """
    Replaces the root logger's handlers with a stderr console handler and,
    when `logging.log_to_file` is set, a rotating file handler.

    Args:
        config (dict): settings; only the `logging` block is read.
    """
    block = (config or {}).get('logging', {}) if isinstance(config, dict) else {}
    block = block or {}
    formatter = logging.Formatter(block.get('format', DEFAULT_LOG_FORMAT))
    console_level = _level(os.getenv('IER_LOG_LEVEL') or block.get('log_console_level', 'WARNING'),
                           logging.WARNING)
    file_level = _level(block.get('log_file_level', 'DEBUG'), logging.DEBUG)
    to_file = bool(block.get('log_to_file', False))

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.setLevel(min(console_level, file_level) if to_file else console_level)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(console_level)
    console.setFormatter(formatter)
    root.addHandler(console)

    if to_file:
        try:
            root.addHandler(_file_handler(block.get('log_filename', 'ier.log'), file_level, formatter))
        except OSError as e:
            logging.error(f"File logging disabled: {e}")


# --- Import-time Initialization ---
CONFIG = {}
try:
    CONFIG = load_config()
    setup_logging(CONFIG)
except (ConfigFileNotFoundError, ConfigError) as e:
     logging.basicConfig(level=logging.WARNING, format=DEFAULT_LOG_FORMAT, stream=sys.stderr)
     logging.critical(f"Failed to load configuration: {e}. Using built-in defaults.")


def get_config():
    """The settings loaded at import time."""
    return CONFIG


def config_section(*keys):
    """
    Walks nested config keys, returning an empty dict for anything missing.

    Example: ``config_section('modeling', 'entities')``.
    """
    node = CONFIG
    for key in keys:
        node = node.get(key, {}) if isinstance(node, dict) else {}
    return node if isinstance(node, dict) else {}
