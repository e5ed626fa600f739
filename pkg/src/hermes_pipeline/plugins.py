"""Extension points, plugin base classes and the plugin registry.

There is one extension group per phase (``hermes.harvest`` ... ``hermes.postprocess``).
Plugins come from three places:

* the built-ins shipped with this package,
* installed distributions declaring entry points in one of the groups,
* executables declared in the configuration (``[harvest.<name>] command = [...]``),
  which receive their settings section as JSON on standard input and print a
  harvest result as JSON on standard output.
"""

from __future__ import annotations

import enum
import functools
import json
import logging
import shlex
import subprocess
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable

from pydantic import BaseModel

from .config import PHASES, PluginSettings, _SECTION_MODELS
from .errors import (
    DuplicatePlugin,
    HarvestError,
    ParseError,
    PluginContractError,
    SettingsAccessError,
    UnknownPlugin,
)
from .model import HarvestResult

_log = logging.getLogger(__name__)


class ExtensionGroup(str, enum.Enum):
    HARVEST = "harvest"
    PROCESS = "process"
    CURATE = "curate"
    DEPOSIT = "deposit"
    POSTPROCESS = "postprocess"

    def __str__(self):
        return self.value

    @property
    def entry_point_group(self):
        return f"hermes.{self.value}"


class HermesPlugin:
    """Base of all plugins.

    Subclasses set ``settings_class`` to a pydantic model describing their
    own configuration subsection and implement ``__call__``.
    """

    settings_class: type[BaseModel] | None = None

    def __call__(self, ctx, *args):
        raise NotImplementedError


class HarvestPlugin(HermesPlugin):
    def __call__(self, ctx):
        """Return a :class:`~hermes_pipeline.model.HarvestResult`."""
        raise NotImplementedError


class ProcessPlugin(HermesPlugin):
    def __call__(self, ctx, record):
        """Return a transformed copy of the collated record."""
        raise NotImplementedError


class CuratePlugin(HermesPlugin):
    def __call__(self, ctx, record):
        """Review ``record``; curation succeeds only if it comes back unchanged."""
        raise NotImplementedError


class DepositPlugin(HermesPlugin):
    def __call__(self, ctx, record):
        """Publish ``record`` and return a deposit receipt."""
        raise NotImplementedError


class PostprocessPlugin(HermesPlugin):
    def __call__(self, ctx, receipt):
        raise NotImplementedError


GROUP_BASES = {
    ExtensionGroup.HARVEST: HarvestPlugin,
    ExtensionGroup.PROCESS: ProcessPlugin,
    ExtensionGroup.CURATE: CuratePlugin,
    ExtensionGroup.DEPOSIT: DepositPlugin,
    ExtensionGroup.POSTPROCESS: PostprocessPlugin,
}


@dataclass(frozen=True)
class PluginDescriptor:
    group: ExtensionGroup
    name: str
    factory: Callable[[], HermesPlugin]
    settings_schema: type[BaseModel] | None = None
    contract: type | None = None
    origin: str = "builtin"

    @classmethod
    def for_class(cls, group, name, plugin_class, origin="builtin"):
        return cls(
            group=ExtensionGroup(group),
            name=name,
            factory=plugin_class,
            settings_schema=getattr(plugin_class, "settings_class", None),
            contract=plugin_class,
            origin=origin,
        )


class PluginRegistry:
    def __init__(self):
        self._plugins: dict[tuple[ExtensionGroup, str], PluginDescriptor] = {}

    def register(self, descriptor):
        group = ExtensionGroup(descriptor.group)
        key = (group, descriptor.name)
        if not descriptor.name or not isinstance(descriptor.name, str):
            raise PluginContractError("plugin names must be non-empty strings")
        if key in self._plugins:
            raise DuplicatePlugin(f"{group.entry_point_group} plugin {descriptor.name!r} is already registered")
        base = GROUP_BASES[group]
        contract = descriptor.contract
        if not (isinstance(contract, type) and issubclass(contract, base)):
            raise PluginContractError(
                f"{group.entry_point_group} plugin {descriptor.name!r} must implement {base.__name__}"
            )
        self._plugins[key] = descriptor

    def lookup(self, group, name):
        group = ExtensionGroup(group)
        try:
            return self._plugins[(group, name)]
        except KeyError:
            raise UnknownPlugin(group.entry_point_group, name, self.names(group)) from None

    def names(self, group):
        group = ExtensionGroup(group)
        return sorted(name for g, name in self._plugins if g == group)

    def descriptors(self, group=None):
        return [d for (g, _), d in self._plugins.items() if group is None or g == ExtensionGroup(group)]

    def __contains__(self, key):
        group, name = key
        return (ExtensionGroup(group), name) in self._plugins

    def load_entry_points(self):
        for group in ExtensionGroup:
            for entry in _entry_points(group.entry_point_group):
                if (group, entry.name) in self._plugins:
                    continue
                try:
                    plugin_class = entry.load()
                    self.register(PluginDescriptor.for_class(group, entry.name, plugin_class, origin=entry.value))
                except Exception as exc:  # a broken third-party plugin must not take down the core
                    _log.warning("ignoring plugin %s from %s: %s", entry.name, entry.value, exc)

    def add_external(self, config):
        """Register executables declared as ``[harvest.<name>] command = ...``."""
        for name, section in config.section("harvest").items():
            if not isinstance(section, dict) or "command" not in section:
                continue
            if (ExtensionGroup.HARVEST, name) in self._plugins:
                continue
            self.register(
                PluginDescriptor(
                    group=ExtensionGroup.HARVEST,
                    name=name,
                    factory=lambda name=name: ExternalHarvestPlugin(name),
                    settings_schema=ExternalPluginSettings,
                    contract=ExternalHarvestPlugin,
                    origin="external",
                )
            )


@functools.lru_cache(maxsize=None)
def _entry_points(group):
    # scanning installed distributions is slow; the set is fixed for the process
    return tuple(metadata.entry_points(group=group))


def builtins():
    from .deposit.file import FileDepositPlugin
    from .deposit.invenio import InvenioDepositPlugin, InvenioRDMDepositPlugin
    from .harvest.cff import CffHarvestPlugin
    from .harvest.codemeta import CodeMetaHarvestPlugin
    from .harvest.git import GitHarvestPlugin
    from .harvest.manifest import ManifestHarvestPlugin
    from .postprocess import CffDoiPlugin, ConfigRecordIdPlugin

    table = [
        ("harvest", "git", GitHarvestPlugin),
        ("harvest", "cff", CffHarvestPlugin),
        ("harvest", "codemeta", CodeMetaHarvestPlugin),
        ("harvest", "manifest", ManifestHarvestPlugin),
        ("deposit", "file", FileDepositPlugin),
        ("deposit", "invenio", InvenioDepositPlugin),
        ("deposit", "invenio_rdm", InvenioRDMDepositPlugin),
        ("postprocess", "config_record_id", ConfigRecordIdPlugin),
        ("postprocess", "cff_doi", CffDoiPlugin),
    ]
    return [PluginDescriptor.for_class(group, name, cls) for group, name, cls in table]


def default_registry(config=None, entry_points=True):
    registry = PluginRegistry()
    for descriptor in builtins():
        registry.register(descriptor)
    if entry_points:
        registry.load_entry_points()
    if config is not None:
        registry.add_external(config)
    return registry


@dataclass
class ExecutionContext:
    """What a plugin sees while it runs.

    Plugins may read global phase settings (``harvest.sources``,
    ``deposit.target`` ...) and their own subsection; reading another
    plugin's subsection raises :class:`SettingsAccessError`.
    """

    config: object
    working_dir: Path
    group: ExtensionGroup
    plugin_name: str
    cache: object = None
    settings: BaseModel | None = None
    invocation: str = "library"
    timeout: float = 30.0
    logger: logging.Logger = field(default=None)

    def __post_init__(self):
        self.working_dir = Path(self.working_dir)
        self.group = ExtensionGroup(self.group)
        if self.logger is None:
            self.logger = logging.getLogger(f"hermes_pipeline.{self.group.value}.{self.plugin_name}")

    def get(self, dotted, default=None):
        parts = dotted.split(".")
        if parts[0] in PHASES and len(parts) >= 2:
            if parts[1] not in _SECTION_MODELS[parts[0]].model_fields:
                if (parts[0], parts[1]) != (self.group.value, self.plugin_name):
                    raise SettingsAccessError(
                        f"plugin {self.plugin_name!r} may not read settings of {parts[0]}.{parts[1]}"
                    )
        return self.config.get(dotted, default)

    def section(self, group=None, name=None):
        group = ExtensionGroup(group or self.group)
        name = name or self.plugin_name
        if (group, name) != (self.group, self.plugin_name):
            raise SettingsAccessError(f"plugin {self.plugin_name!r} may not read settings of {group}.{name}")
        return self.config.section(group.value, name)

    def path(self, value):
        path = Path(value)
        return path if path.is_absolute() else self.working_dir / path

    def relative(self, path):
        path = Path(path)
        try:
            return path.resolve().relative_to(self.working_dir.resolve()).as_posix() or "."
        except ValueError:
            return str(path)

    def store(self, name, data):
        return self.cache.store_artifact(self.group.value, name, data)

    def load(self, phase, name):
        return self.cache.load_artifact(phase, name)


def make_context(config, working_dir, group, name, registry=None, **kwargs):
    """Build an :class:`ExecutionContext` with validated plugin settings."""
    schema = None
    if registry is not None and (group, name) in registry:
        schema = registry.lookup(group, name).settings_schema
    settings = config.settings(str(group), name, schema) if schema else None
    return ExecutionContext(config=config, working_dir=working_dir, group=group,
                            plugin_name=name, settings=settings, **kwargs)


class ExternalPluginSettings(PluginSettings):
    command: list[str] | str
    timeout: float = 60.0


class ExternalHarvestPlugin(HarvestPlugin):
    settings_class = ExternalPluginSettings

    def __init__(self, name):
        self.name = name

    def __call__(self, ctx):
        settings = ctx.settings or ExternalPluginSettings.model_validate(ctx.section())
        command = settings.command
        if isinstance(command, str):
            command = shlex.split(command)
        payload = json.dumps(ctx.section(), default=str)
        try:
            proc = subprocess.run(
                command, input=payload, capture_output=True, text=True,
                cwd=ctx.working_dir, timeout=settings.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise HarvestError(f"external plugin {self.name!r} could not run: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-5:]
            raise HarvestError(
                f"external plugin {self.name!r} exited with status {proc.returncode}: {' | '.join(tail)}"
            )
        try:
            return HarvestResult.from_json(json.loads(proc.stdout))
        except (ValueError, ParseError) as exc:
            raise HarvestError(f"external plugin {self.name!r} printed an invalid result: {exc}") from exc
