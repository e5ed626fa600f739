"""Layered pipeline configuration.

Settings come from ``hermes.toml`` and may be overridden by environment
variables and ``-O dotted.key=value`` command line options, in that order of
increasing precedence.  Environment variables use the ``HERMES_`` prefix and
spell the dotted key in upper case with ``__`` in place of each dot, so
``harvest.git.branch`` becomes ``HERMES_HARVEST__GIT__BRANCH``.

Each plugin owns the subsection ``<phase>.<plugin name>`` and validates it
with its own settings model; keys the model does not know are kept.
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Mapping

from pydantic import BaseModel, ConfigDict, SecretStr, ValidationError, field_validator, model_validator

from .errors import ConfigFileNotFound, EnumError, SchemaError, TomlParseError
from .logs import register_secret

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_FILENAME = "hermes.toml"
ENV_PREFIX = "HERMES_"
PHASES = ("harvest", "process", "curate", "deposit", "postprocess")
ACCESS_RIGHTS = ("open", "embargoed", "restricted", "closed")
REDACTED = "********"

_SECRET_KEYS = ("auth_token", "token", "password", "secret")


class PluginSettings(BaseModel):
    """Base class for plugin settings; unknown keys are preserved."""

    model_config = ConfigDict(extra="allow", coerce_numbers_to_str=True)


class HarvestSection(PluginSettings):
    sources: list[str] = []


class ProcessSection(PluginSettings):
    execute: list[str] = []


class CurateSection(PluginSettings):
    method: str | None = None


class DepositSection(PluginSettings):
    target: str | None = None


class PostprocessSection(PluginSettings):
    execute: list[str] = []


_SECTION_MODELS = {
    "harvest": HarvestSection,
    "process": ProcessSection,
    "curate": CurateSection,
    "deposit": DepositSection,
    "postprocess": PostprocessSection,
}


class FileDepositSettings(PluginSettings):
    filename: str = "codemeta.json"


class InvenioSettings(PluginSettings):
    site_url: str | None = None
    communities: list[str] = []
    access_right: str = "open"
    embargo_date: date | None = None
    access_conditions: str | None = None
    api_paths: dict[str, str] = {}
    auth_token: SecretStr | None = None
    files: list[str] = []
    record_id: int | str | None = None
    doi: str | None = None

    @field_validator("access_right")
    @classmethod
    def _known_access_right(cls, value):
        if value not in ACCESS_RIGHTS:
            valid = ", ".join(repr(v) for v in ACCESS_RIGHTS)
            raise ValueError(f"must be one of {valid}")
        return value

    @field_validator("record_id", mode="before")
    @classmethod
    def _numeric_record_id(cls, value):
        if isinstance(value, str) and value.strip().isdigit():
            return int(value)
        return value

    @field_validator("site_url")
    @classmethod
    def _http_url(cls, value):
        if value is not None and not value.startswith(("http://", "https://")):
            raise ValueError("must be an http(s) URL")
        return value.rstrip("/") if value else value

    @model_validator(mode="after")
    def _access_details(self):
        if self.access_right == "embargoed" and self.embargo_date is None:
            raise ValueError("embargo_date is required when access_right is 'embargoed'")
        if self.access_right == "restricted" and not self.access_conditions:
            raise ValueError("access_conditions is required when access_right is 'restricted'")
        return self

    @property
    def token(self):
        return self.auth_token.get_secret_value() if self.auth_token else ""


def is_secret_key(key):
    key = str(key).lower()
    return any(key == s or key.endswith("_" + s) for s in _SECRET_KEYS)


def _redact(value):
    if isinstance(value, dict):
        return {k: (REDACTED if is_secret_key(k) else _redact(v)) for k, v in value.items()}
    if isinstance(value, list):
        return [_redact(v) for v in value]
    return value


def _collect_secrets(value, found):
    if isinstance(value, dict):
        for key, child in value.items():
            if is_secret_key(key) and isinstance(child, str) and child:
                found.append(child)
            else:
                _collect_secrets(child, found)
    elif isinstance(value, list):
        for child in value:
            _collect_secrets(child, found)
    return found


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    data: Mapping[str, Any] = field(default_factory=dict)
    path: Path | None = None

    def get(self, dotted, default=None):
        node = self.data
        for part in dotted.split("."):
            if not isinstance(node, Mapping) or part not in node:
                return default
            node = node[part]
        return node

    def section(self, group, name=None):
        value = self.get(f"{group}.{name}" if name else str(group), {})
        return copy.deepcopy(dict(value)) if isinstance(value, Mapping) else {}

    def _phase(self, group):
        return _SECTION_MODELS[group].model_validate(self.section(group))

    @property
    def sources(self):
        return list(self._phase("harvest").sources)

    @property
    def deposit_target(self):
        return self._phase("deposit").target

    @property
    def process_execute(self):
        return list(self._phase("process").execute)

    @property
    def curate_method(self):
        return self._phase("curate").method

    @property
    def postprocess_execute(self):
        return list(self._phase("postprocess").execute)

    def settings(self, group, name, schema):
        """Validate the ``group.name`` subsection against ``schema``."""
        return _validate_model(schema, self.section(group, name), f"{group}.{name}")

    def secrets(self):
        return _collect_secrets(dict(self.data), [])

    def redacted(self):
        return _redact(copy.deepcopy(dict(self.data)))

    def render(self):
        return json.dumps(self.redacted(), indent=2, sort_keys=True, default=str)

    def __repr__(self):
        return f"PipelineConfig(path={str(self.path)!r}, data={self.redacted()!r})"


def _validate_model(schema, values, prefix):
    try:
        return schema.model_validate(values)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [str(part) for part in err["loc"]]
        key = ".".join([prefix, *loc]) if prefix else ".".join(loc)
        message = err["msg"]
        if loc and loc[-1] == "access_right":
            raise EnumError(key, message) from None
        raise SchemaError(key, message) from None


def read_config(path):
    """Parse ``path`` without validating it."""
    path = Path(path)
    if not path.is_file():
        raise ConfigFileNotFound(
            f"configuration file {CONFIG_FILENAME} not found at {path}"
        )
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise TomlParseError(f"{path}: invalid TOML: {exc}") from None
    except UnicodeDecodeError as exc:
        raise TomlParseError(f"{path}: not UTF-8: {exc}") from None
    return PipelineConfig(data, path)


def load_config(path, registry=None):
    """Read and validate ``path``.

    ``registry`` supplies the plugin settings schemas; by default the
    built-in and installed plugins are used.
    """
    config = read_config(path)
    validate(config, registry)
    return config


def coerce(raw):
    """Interpret an override string; arrays and inline tables use TOML syntax."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text[:1] in "[{":
        try:
            return tomllib.loads(f"v = {text}")["v"]
        except tomllib.TOMLDecodeError:
            pass
    return raw


def env_overrides(env):
    """Map ``HERMES_*`` variables to dotted keys."""
    found = {}
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX):
            continue
        parts = name[len(ENV_PREFIX):].lower().split("__")
        if parts[0] not in PHASES or len(parts) < 2 or not all(parts):
            continue
        found[".".join(parts)] = env[name]
    return found


def _assign(data, dotted, value):
    parts = dotted.split(".")
    if not all(parts):
        raise SchemaError(dotted, "malformed dotted key")
    node = data
    for i, part in enumerate(parts[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise SchemaError(".".join(parts[: i + 1]), "is a value, cannot hold sub-keys")
        node = child
    node[parts[-1]] = coerce(value)


def resolve(config, env=None, cli_overrides=None, registry=None):
    """Apply environment then command line overrides on top of ``config``."""
    data = copy.deepcopy(dict(config.data))
    for dotted, value in env_overrides(env or {}).items():
        _assign(data, dotted, value)
    for dotted, value in (cli_overrides or {}).items():
        _assign(data, dotted, value)
    resolved = PipelineConfig(data, config.path)
    validate(resolved, registry)
    return resolved


def validate(config, registry=None):
    """Check the layout and every known plugin section of ``config``."""
    data = config.data
    for key, value in data.items():
        if key not in PHASES:
            raise SchemaError(key, f"unknown section; expected one of {', '.join(PHASES)}")
        if not isinstance(value, Mapping):
            raise SchemaError(key, "must be a table")
    for secret in config.secrets():
        register_secret(secret)

    for group in PHASES:
        section = config.section(group)
        model = _validate_model(_SECTION_MODELS[group], section, group)
        for key, value in section.items():
            if key not in type(model).model_fields and not isinstance(value, Mapping):
                raise SchemaError(f"{group}.{key}", "unknown setting")

    if registry is None:
        from .plugins import default_registry

        registry = default_registry(config)

    for descriptor in registry.descriptors():
        if descriptor.settings_schema is None:
            continue
        config.settings(descriptor.group.value, descriptor.name, descriptor.settings_schema)

    for name in config.sources:
        registry.lookup("harvest", name)
    for name in config.process_execute:
        registry.lookup("process", name)
    if config.curate_method:
        registry.lookup("curate", config.curate_method)
    if config.deposit_target:
        registry.lookup("deposit", config.deposit_target)
    for name in config.postprocess_execute:
        registry.lookup("postprocess", name)
    return config
