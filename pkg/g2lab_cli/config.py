from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any

import dynaconf

from g2lab.settings import GridPolicy, NumericsSettings

root_path = Path(__file__).parent.parent / "configs"

config = dynaconf.Dynaconf(
    environments=True,
    envvar_prefix="G2LAB",
    settings_files=[
        root_path / "default.toml",
        root_path / "local.toml",
        root_path / "test.toml",
    ],
    load_dotenv=True,
    merge_enabled=True,
)


def _lowered(section: Any) -> dict[str, Any]:
    if not section:
        return {}
    return {str(key).lower(): value for key, value in dict(section).items()}


def experiment_defaults() -> dict[str, Any]:
    return _lowered(config.get("experiment"))


def load_overrides(path: Path) -> dict[str, Any]:
    """Flat ``key = value`` settings from a user file."""
    if not path.is_file():
        raise FileNotFoundError(f"config file {path} does not exist")
    overrides = dynaconf.Dynaconf(settings_files=[str(path)], envvar_prefix="G2LAB_FILE")
    return _lowered(overrides.as_dict())


def _build(cls: type, section: Any) -> Any:
    values = _lowered(section)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys in config: {', '.join(unknown)}")
    kwargs = {
        key: tuple(value) if isinstance(value, list) else value for key, value in values.items()
    }
    return cls(**kwargs)


def numerics_settings() -> NumericsSettings:
    return _build(NumericsSettings, config.get("numerics"))


def grid_policy(n2: int, n3: int) -> GridPolicy:
    policy = _build(GridPolicy, config.get("grid_policy"))
    return dataclasses.replace(policy, n2=n2, n3=n3)
