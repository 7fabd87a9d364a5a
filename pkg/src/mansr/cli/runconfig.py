"""TOML run configuration: [model], [train], [data] and [eval] sections.

Each section validates into the matching pydantic model, so unknown keys are
errors. Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
import tomllib
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, ValidationError

from ..arch import ManConfig
from ..arch.config import PRESETS
from ..errors import ConfigError
from ..metrics import EvalProtocol
from ..optim import TrainConfig

SECTIONS = ("model", "train", "data", "eval")


class DataSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    train_dir: Path | None = None
    mode: Literal["paired_dirs", "hr_only"] = "hr_only"


class EvalSection(EvalProtocol):
    data_dir: Path | None = None
    mode: Literal["paired_dirs", "hr_only"] = "hr_only"

    @property
    def protocol(self) -> EvalProtocol:
        return EvalProtocol(**self.model_dump(include=set(EvalProtocol.model_fields)))


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    model: ManConfig
    train: TrainConfig = TrainConfig()
    data: DataSection = DataSection()
    eval: EvalSection = EvalSection()

    def to_toml(self) -> str:
        """Serialize to a TOML document that parses back to an equal config."""
        lines: list[str] = []
        for section in SECTIONS:
            values = getattr(self, section).model_dump(mode="json", exclude_none=True)
            lines.append(f"[{section}]")
            lines += [f"{key} = {_toml_value(value)}" for key, value in values.items()]
            lines.append("")
        return "\n".join(lines)


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, Mapping):
        return "{" + ", ".join(f"{k} = {_toml_value(v)}" for k, v in value.items()) + "}"
    raise ConfigError(f"cannot write {value!r} to TOML")


def parse_override(item: str) -> tuple[str, str, Any]:
    """``section.key=value``; the value is read as a TOML literal, falling back to a bare string."""
    target, sep, raw = item.partition("=")
    section, dot, key = target.strip().partition(".")
    if not sep or not dot or section not in SECTIONS or not key:
        raise ConfigError(f"override {item!r} must look like section.key=value with section in {SECTIONS}")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return section, key, value


def _resolve_paths(table: dict[str, Any], base: Path, keys: Iterable[str]) -> None:
    for key in keys:
        if isinstance(table.get(key), str):
            path = Path(table[key]).expanduser()
            table[key] = str(path if path.is_absolute() else (base / path).resolve())


def model_from_table(table: Mapping[str, Any]) -> ManConfig:
    """A preset variant fills n_blocks/width unless the table sets them."""
    table = dict(table)
    variant = table.get("variant", "custom")
    if variant in PRESETS:
        table.pop("variant")
        return ManConfig.preset(variant, **table)
    return ManConfig.create(**table)


def train_from_table(table: Mapping[str, Any]) -> TrainConfig:
    table = dict(table)
    preset = table.pop("preset", None)
    return TrainConfig.preset(preset, **table) if preset else TrainConfig.create(**table)


def build_run_config(document: Mapping[str, Any], base: Path, overrides: Iterable[str] = ()) -> RunConfig:
    unknown = set(document) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    tables = {section: dict(document.get(section, {})) for section in SECTIONS}
    for item in overrides:
        section, key, value = parse_override(item)
        tables[section][key] = value
    if "model" not in document and not tables["model"]:
        raise ConfigError("config needs a [model] section")
    _resolve_paths(tables["data"], base, ["train_dir"])
    _resolve_paths(tables["eval"], base, ["data_dir"])
    try:
        return RunConfig(
            model=model_from_table(tables["model"]),
            train=train_from_table(tables["train"]),
            data=DataSection(**tables["data"]),
            eval=EvalSection(**tables["eval"]),
        )
    except ValidationError as e:
        raise ConfigError(f"invalid run config: {e}") from e


def load_run_config(path: Path | str, overrides: Iterable[str] = ()) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        document = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return build_run_config(document, path.parent, overrides)
