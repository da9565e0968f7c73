"""
Simulation Configuration Loader

Single source of truth for run-time defaults (validity thresholds, sampling
schedule, worker count, output location).
Loads simulation_defaults.yaml and applies POINTER_* environment overrides.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict

import yaml

log = logging.getLogger(__name__)

ENV_OVERRIDES = {
    'POINTER_WORKERS': ('runtime.workers', int),
    'POINTER_LOG_LEVEL': ('logging.level', str),
    'POINTER_OUTPUT_DIR': ('runtime.output_dir', str),
}


class SimulationConfig:
    """Centralized simulation defaults"""

    def __init__(self, config_path: str = None, environ: Dict[str, str] = None):
        """Load defaults from YAML, then apply environment overrides"""
        if config_path is None:
            # Default to config/simulation_defaults.yaml relative to this file
            config_path = Path(__file__).parent / "simulation_defaults.yaml"

        self.config_path = Path(config_path)
        self.values: Dict[str, Any] = {}

        self._load_config()
        self._apply_environment(os.environ if environ is None else environ)

    def _load_config(self):
        """Load and parse the YAML defaults"""
        if not self.config_path.exists():
            log.warning(f"Defaults not found at {self.config_path}, using built-in values")
            return

        with open(self.config_path, 'r') as f:
            self.values = yaml.safe_load(f) or {}

        log.debug(f"Loaded simulation defaults from {self.config_path}")

    def _apply_environment(self, environ):
        for env_key, (dotted, cast) in ENV_OVERRIDES.items():
            raw = environ.get(env_key)
            if raw in (None, ""):
                continue
            try:
                self.set(dotted, cast(raw))
            except ValueError:
                log.warning(f"Ignoring {env_key}={raw!r}: expected {cast.__name__}")

    def get(self, dotted_key: str, default: Any = None) -> Any:
        """
        Look up a nested value.

        Args:
            dotted_key: path such as 'validity.cond_b1'
            default: returned when any part of the path is missing

        Returns:
            The configured value or default
        """
        node = self.values
        for part in dotted_key.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, dotted_key: str, value: Any):
        node = self.values
        parts = dotted_key.split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    @property
    def artifact_version(self) -> str:
        return str(self.get('artifact_version', '1.0.0'))

    @property
    def workers(self) -> int:
        return max(1, int(self.get('runtime.workers', 1)))

    @property
    def output_dir(self) -> str:
        return str(self.get('runtime.output_dir', 'results'))

    @property
    def log_level(self) -> str:
        return str(self.get('logging.level', 'INFO')).upper()


# Global singleton instance
_config_instance = None


def get_simulation_config() -> SimulationConfig:
    """Get the global SimulationConfig instance"""
    global _config_instance
    if _config_instance is None:
        _config_instance = SimulationConfig()
    return _config_instance


def reset_simulation_config():
    """Drop the cached instance so the next call re-reads file and environment"""
    global _config_instance
    _config_instance = None


def get_setting(dotted_key: str, default: Any = None) -> Any:
    """Convenience function for a single setting"""
    return get_simulation_config().get(dotted_key, default)
