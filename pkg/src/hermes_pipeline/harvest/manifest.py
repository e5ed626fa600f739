"""Harvest the ``[project]`` table of a ``pyproject.toml`` (PEP 621)."""

from __future__ import annotations

import re
import sys
from pathlib import Path

from ..config import PluginSettings
from ..errors import MissingProjectTable, TomlParseError
from ..model import HarvestResult, MetadataRecord, PersonRef
from ..plugins import HarvestPlugin
from .cff import SPDX_URL

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_REPOSITORY_KEYS = {"repository", "source", "sources", "source code", "sourcecode", "code", "github", "gitlab", "git"}
_HOMEPAGE_KEYS = {"homepage", "home", "home-page", "website"}
_SPDX_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9.+-]*$")
_EXPECTED = ("name", "version", "description", "license", "author")
_MAPPED = {"name", "version", "description", "authors", "maintainers", "license", "keywords", "urls"}


class ManifestSettings(PluginSettings):
    path: str = "pyproject.toml"


def _license(value, meta):
    if isinstance(value, dict):
        if "text" in value:
            value = value["text"]
        else:
            if "file" in value:
                meta["license_file"] = value["file"]
            return None
    if not isinstance(value, str) or not value.strip():
        return None
    value = value.strip()
    return SPDX_URL + value if _SPDX_ID.match(value) else value


def _people(entries, role):
    people = []
    for entry in entries or []:
        if isinstance(entry, dict) and (entry.get("name") or entry.get("email")):
            people.append(PersonRef(full_name=entry.get("name"), email=entry.get("email"),
                                    roles=frozenset({role})))
    return people


def harvest_manifest(ctx, path="pyproject.toml"):
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise TomlParseError(f"{path}: invalid TOML: {exc}") from None
    project = data.get("project")
    if not isinstance(project, dict):
        raise MissingProjectTable(f"{path} has no [project] table")

    meta = {"local_path": ctx.relative(path) if ctx is not None else str(path)}
    fields = {}
    for key in ("name", "version", "description"):
        if isinstance(project.get(key), str):
            fields[key] = project[key]
    authors = _people(project.get("authors"), "author")
    if authors:
        fields["author"] = authors
    maintainers = _people(project.get("maintainers"), "maintainer")
    if maintainers:
        fields["maintainer"] = maintainers
    if "license" in project:
        license = _license(project["license"], meta)
        if license:
            fields["license"] = license
    keywords = [k for k in project.get("keywords") or [] if isinstance(k, str)]
    if keywords:
        fields["keywords"] = keywords

    unmapped = sorted(k for k in project if k not in _MAPPED)
    for label, url in (project.get("urls") or {}).items():
        norm = label.strip().lower()
        if norm in _REPOSITORY_KEYS and "codeRepository" not in fields:
            fields["codeRepository"] = url
        elif norm in _HOMEPAGE_KEYS and "url" not in fields:
            fields["url"] = url
        else:
            unmapped.append(f"urls.{label}")

    meta["unmapped"] = unmapped
    meta["missing"] = [term for term in _EXPECTED if term not in fields]
    if "version" in (project.get("dynamic") or []):
        meta["dynamic_version"] = True
    return HarvestResult(MetadataRecord(fields), meta)


class ManifestHarvestPlugin(HarvestPlugin):
    settings_class = ManifestSettings

    def __call__(self, ctx):
        settings = ctx.settings or ManifestSettings()
        return harvest_manifest(ctx, ctx.path(settings.path))
