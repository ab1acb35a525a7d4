"""Configuration loader for hardylab with support for multiple formats and XDG directories."""

import json
import os
import sys
from logging import getLogger
from pathlib import Path
from typing import Any

import yaml
from platformdirs import site_config_dir, user_config_dir
from pydantic import ValidationError

from .schema import LabConfig

# Handle tomli import for Python < 3.11
if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

logger = getLogger(__name__)

ENV_PREFIX = "HARDYLAB_"


class ConfigLoader:
    """Loads and manages hardylab configuration from multiple sources."""

    def __init__(self, app_name: str = "hardylab", discover: bool = True):
        """Initialize the config loader.

        Args:
            app_name: Application name for config directory lookup
            discover: Search the standard directories for config files
        """
        self.app_name = app_name
        self._config_dirs = self._get_config_directories()
        self._config_files = self._discover_config_files() if discover else []

    @property
    def config_dirs(self) -> list[Path]:
        return list(self._config_dirs)

    @property
    def config_files(self) -> list[Path]:
        return list(self._config_files)

    def _get_config_directories(self) -> list[Path]:
        """Get configuration directories, current directory first."""
        dirs = [Path.cwd(), Path(user_config_dir(self.app_name))]

        xdg_config_dirs = os.environ.get("XDG_CONFIG_DIRS", "")
        for config_dir in xdg_config_dirs.split(":"):
            if config_dir.strip():
                dirs.append(Path(config_dir.strip()) / self.app_name)

        dirs.append(Path(site_config_dir(self.app_name)))
        return dirs

    def _discover_config_files(self) -> list[Path]:
        """Discover configuration files in order of preference."""
        config_files = []
        for config_dir in self._config_dirs:
            for name in (self.app_name, "config"):
                for ext in (".yaml", ".yml", ".toml", ".json"):
                    config_file = config_dir / f"{name}{ext}"
                    if config_file.is_file():
                        config_files.append(config_file)
        return config_files

    def load_file(self, path: Path) -> dict[str, Any]:
        """Load configuration file based on extension."""
        suffix = path.suffix.lower()
        if suffix == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        if suffix in (".yaml", ".yml"):
            with open(path, encoding="utf-8") as f:
                return yaml.safe_load(f) or {}
        if suffix == ".json":
            with open(path, encoding="utf-8") as f:
                return json.load(f)
        raise ValueError(f"Unsupported configuration file format: {suffix}")

    def _merge_configs(self, base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
        """Recursively merge configuration dictionaries."""
        result = base.copy()
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value
        return result

    def load_environment_vars(self) -> dict[str, Any]:
        """Load ``HARDYLAB_*`` variables, ``__`` separating nested keys."""
        config: dict[str, Any] = {}
        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            parts = key[len(ENV_PREFIX) :].lower().split("__")
            current = config
            for part in parts[:-1]:
                current = current.setdefault(part, {})
            current[parts[-1]] = self._parse_env_value(value)
        return config

    @staticmethod
    def _parse_env_value(value: str) -> str | int | float | bool:
        """Parse environment variable value to appropriate type."""
        if value.lower() in ("true", "yes", "on"):
            return True
        if value.lower() in ("false", "no", "off"):
            return False
        try:
            if any(c in value for c in ".eE"):
                return float(value)
            return int(value)
        except ValueError:
            return value

    def load(
        self,
        config_file: str | Path | None = None,
        environment: str | None = None,
        cli_overrides: dict[str, Any] | None = None,
    ) -> LabConfig:
        """Load configuration from all sources.

        Args:
            config_file: Explicit configuration file path
            environment: Environment name for environment-specific config
            cli_overrides: Command-line argument overrides

        Returns:
            Loaded and validated configuration

        Raises:
            FileNotFoundError: If explicit config file is specified but not found
            ValueError: If configuration is invalid
        """
        merged: dict[str, Any] = {}

        # 1. discovered files, lowest priority last in the search order
        for config_path in reversed(self._config_files):
            try:
                merged = self._merge_configs(merged, self.load_file(config_path))
            except (OSError, ValueError, yaml.YAMLError) as e:
                logger.warning(f"Failed to load config from {config_path}: {e}")

        # 2. explicit file
        if config_file:
            config_path = Path(config_file)
            if not config_path.exists():
                raise FileNotFoundError(f"Configuration file not found: {config_path}")
            try:
                merged = self._merge_configs(merged, self.load_file(config_path))
            except (OSError, yaml.YAMLError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
                raise ValueError(f"Failed to load configuration from {config_path}: {e}") from e

        # 3. environment-specific file
        if environment:
            for config_dir in self._config_dirs:
                env_config_path = config_dir / f"{environment}.toml"
                if env_config_path.exists():
                    try:
                        merged = self._merge_configs(merged, self.load_file(env_config_path))
                    except (OSError, ValueError) as e:
                        logger.warning(f"Failed to load environment config from {env_config_path}: {e}")
            merged["environment"] = environment

        # 4. environment variables
        env_config = self.load_environment_vars()
        if env_config:
            merged = self._merge_configs(merged, env_config)

        # 5. CLI overrides
        if cli_overrides:
            merged = self._merge_configs(merged, cli_overrides)

        try:
            return LabConfig(**merged)
        except ValidationError as e:
            raise ValueError(f"Invalid configuration: {e}") from e

    def save_config(
        self,
        config: LabConfig,
        config_file: str | Path | None = None,
        format: str = "yaml",
    ) -> Path:
        """Save configuration to file.

        Args:
            config: Configuration to save
            config_file: Target file path (defaults to user config dir)
            format: Output format ('toml', 'yaml', 'json')

        Returns:
            Path where configuration was saved
        """
        if config_file is None:
            user_dir = Path(user_config_dir(self.app_name))
            user_dir.mkdir(parents=True, exist_ok=True)
            config_file = user_dir / f"{self.app_name}.{format}"
        else:
            config_file = Path(config_file)
            config_file.parent.mkdir(parents=True, exist_ok=True)

        config_dict = config.model_dump(mode="json", exclude_none=True)

        if format == "toml":
            with open(config_file, "wb") as f:
                tomli_w.dump(config_dict, f)
        elif format in ("yaml", "yml"):
            with open(config_file, "w", encoding="utf-8") as f:
                yaml.safe_dump(config_dict, f, default_flow_style=False, sort_keys=False)
        elif format == "json":
            with open(config_file, "w", encoding="utf-8") as f:
                json.dump(config_dict, f, indent=2)
        else:
            raise ValueError(f"Unsupported format: {format}")

        return config_file

    def create_default_config(self, config_file: str | Path | None = None, format: str = "yaml") -> Path:
        """Create a default configuration file."""
        return self.save_config(LabConfig(), config_file, format)
