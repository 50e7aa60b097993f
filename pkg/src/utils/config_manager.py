"""
Configuration Manager - Reads the JSON configuration files and resolves run configurations
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def set_dotted(data: Dict, key: str, value: Any) -> None:
    """Set a nested key using dot notation (e.g. "train.learning_rate")"""
    keys = key.split('.')
    current = data
    for k in keys[:-1]:
        if k not in current or not isinstance(current[k], dict):
            current[k] = {}
        current = current[k]
    current[keys[-1]] = value


def deep_merge(base: Dict, update: Mapping) -> Dict:
    """Recursively merge update into a copy of base; dicts merge, everything else replaces"""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str) -> Tuple[str, Any]:
    """Split "dotted.key=value"; the value is parsed as JSON when possible"""
    if '=' not in text:
        raise ConfigError(f"Override '{text}' is not of the form key=value")
    key, raw = text.split('=', 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"Override '{text}' has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


class ConfigManager:
    """Manages the defaults, presets and fixture files under config/"""

    def __init__(self, config_dir: Optional[Path] = None):
        self.config_dir = Path(config_dir) if config_dir is not None else self.get_config_dir()
        self.defaults_file = self.config_dir / "defaults.json"
        self.presets_file = self.config_dir / "presets.json"
        self.fixtures_file = self.config_dir / "fixtures.json"

    @staticmethod
    def get_config_dir() -> Path:
        """Get the repository's config directory"""
        config_dir = Path(__file__).resolve().parents[2] / "config"

        if not config_dir.exists():
            raise FileNotFoundError(f"Configuration directory not found: {config_dir}")

        return config_dir

    def read_json_file(self, file_path: Path, required: bool = False) -> Dict:
        """Read and parse a JSON file; a missing optional file reads as {}"""
        file_path = Path(file_path)
        if not file_path.exists():
            if required:
                raise ConfigError(f"Configuration file not found: {file_path}")
            return {}
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {file_path}: {str(e)}")
        except OSError as e:
            raise IOError(f"Error reading {file_path}: {str(e)}")
        if not isinstance(data, dict):
            raise ConfigError(f"Expected a JSON object in {file_path}")
        return data

    # Defaults and presets
    def get_defaults(self, command: str) -> Dict:
        defaults = self.read_json_file(self.defaults_file)
        common = defaults.get("common", {})
        return deep_merge(common, defaults.get(command, {}))

    def get_preset(self, name: str, cell: Optional[str] = None) -> Dict:
        """A simulation preset, or one cell of a preset that lists cells

        An entry of the form {"alias": "<other>"} resolves to the named preset.
        """
        presets = self.read_json_file(self.presets_file, required=True)
        if name not in presets:
            raise ConfigError(f"Unknown preset '{name}', expected one of {sorted(presets)}")
        preset = presets[name]
        if set(preset) == {"alias"}:
            target = preset["alias"]
            if target not in presets or "alias" in presets[target]:
                raise ConfigError(f"Preset '{name}' is an alias of '{target}', which is not a preset")
            logger.debug(f"Preset '{name}' resolves to '{target}'")
            name, preset = target, presets[target]
        cells = preset.get("cells")
        if cells is None:
            if cell is not None:
                raise ConfigError(f"Preset '{name}' has no cells")
            return copy.deepcopy(preset)
        if cell is None:
            raise ConfigError(f"Preset '{name}' needs --cell, one of {sorted(cells)}")
        if cell not in cells:
            raise ConfigError(f"Unknown cell '{cell}' of preset '{name}', expected one of {sorted(cells)}")
        base = {k: v for k, v in preset.items() if k != "cells"}
        return deep_merge(base, cells[cell])

    def get_fixture(self, name: str = "six_assets") -> Dict:
        fixtures = self.read_json_file(self.fixtures_file, required=True)
        if name not in fixtures:
            raise ConfigError(f"Unknown fixture '{name}', expected one of {sorted(fixtures)}")
        return fixtures[name]

    # Resolution
    def resolve(self, command: str, config_file: Optional[Path] = None,
                flags: Optional[Mapping[str, Any]] = None,
                overrides: Iterable[str] = (), preset: Optional[Mapping] = None) -> Dict:
        """defaults -> preset -> --config file -> dedicated flags -> --set overrides

        flags maps dotted keys to values; None values are treated as "flag not given".
        """
        config = self.get_defaults(command)
        if preset:
            config = deep_merge(config, preset)
        if config_file is not None:
            config = deep_merge(config, self.read_json_file(Path(config_file), required=True))
        for key, value in (flags or {}).items():
            if value is not None:
                set_dotted(config, key, value)
        for text in overrides or ():
            key, value = parse_override(text)
            set_dotted(config, key, value)
        config["command"] = command
        logger.debug(f"Resolved {command} config: {config}")
        return config
