"""Configuration management."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .models import LabConfig

CONFIG_FILENAME = "gcd-config.json"
CONFIG_ENV_VAR = "GCD_LAB_CONFIG"


def get_config_dir() -> Path:
    """Get the per-user configuration directory."""
    base = os.environ.get("XDG_CONFIG_HOME")
    root = Path(base) if base else Path.home() / ".config"
    return root / "gcd-lab"


def get_config_path() -> Path:
    """Get the path to the configuration file, honoring ``GCD_LAB_CONFIG``."""
    override = os.environ.get(CONFIG_ENV_VAR)
    if override:
        return Path(override).expanduser()
    return get_config_dir() / CONFIG_FILENAME


def load_config(config_path: Path | None = None) -> LabConfig:
    """Load configuration from file, or defaults when the file is absent."""
    if config_path is None:
        config_path = get_config_path()

    if config_path.exists():
        with open(config_path, encoding="utf-8") as f:
            data = json.load(f)
        return LabConfig(**data)

    return create_default_config()


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and an atomic rename."""
    path.parent.mkdir(parents=True, exist_ok=True)

    temp_fd = None
    temp_path = None
    try:
        temp_fd, temp_path = tempfile.mkstemp(dir=path.parent, suffix=".tmp", prefix=".gcd-")
        with os.fdopen(temp_fd, "w", encoding="utf-8") as f:
            temp_fd = None
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_path, path)
    except Exception:
        if temp_fd is not None:
            os.close(temp_fd)
        if temp_path and os.path.exists(temp_path):
            os.unlink(temp_path)
        raise


def save_config(config: LabConfig, config_path: Path | None = None) -> None:
    """Save configuration atomically so the file is never partially written."""
    if config_path is None:
        config_path = get_config_path()
    write_atomic(config_path, json.dumps(config.model_dump(mode="json"), indent=2) + "\n")


def create_default_config() -> LabConfig:
    """Create a default configuration."""
    return LabConfig()
