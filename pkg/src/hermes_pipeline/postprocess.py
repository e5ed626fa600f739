"""Feed deposit results back into the repository.

``config_record_id`` stores the repository record id in ``hermes.toml`` so the
next deposit creates a new version; ``cff_doi`` records the minted DOI in
``CITATION.cff``.  Both edits keep comments, key order and formatting, and
leave the file untouched when the value is already present.
"""

from __future__ import annotations

import io
import os
import re
from pathlib import Path

import tomlkit
import yaml
from ruamel.yaml import YAML
from ruamel.yaml.comments import CommentedMap, CommentedSeq
from ruamel.yaml.error import YAMLError
from ruamel.yaml.util import load_yaml_guess_indent
from tomlkit.exceptions import TOMLKitError

from .cache import atomic_write
from .config import CONFIG_FILENAME, PluginSettings
from .errors import ConfigEditError, InvalidDoi, ReadOnlyFile, TomlParseError, YamlParseError
from .harvest.cff import _StringDateLoader, cff_schema, validate_cff
from .plugins import PostprocessPlugin

DOI_RE = re.compile(cff_schema()["definitions"]["doi"]["pattern"])
_DOI_PREFIXES = ("https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "doi:")


def _writable(path):
    if not path.is_file():
        raise FileNotFoundError(f"{path} does not exist")
    # root passes os.access regardless, so honour the permission bits too
    if not os.access(path, os.W_OK) or not path.stat().st_mode & 0o222:
        raise ReadOnlyFile(f"{path} is not writable")


def _id_value(record_id):
    text = str(record_id)
    return int(text) if text.isdigit() else text


def store_record_id(config_path, receipt):
    """Set ``deposit.<target>.record_id``; returns whether the file changed."""
    path = Path(config_path)
    _writable(path)
    if receipt.record_id is None:
        raise ConfigEditError(f"deposit receipt from {receipt.target!r} carries no record id")
    text = path.read_text(encoding="utf-8")
    try:
        doc = tomlkit.parse(text)
    except TOMLKitError as exc:
        raise TomlParseError(f"{path}: invalid TOML: {exc}") from None

    value = _id_value(receipt.record_id)
    try:
        deposit = doc.setdefault("deposit", tomlkit.table(is_super_table=True))
        section = deposit.setdefault(receipt.target, tomlkit.table())
        if not isinstance(section, dict):
            raise ConfigEditError(f"deposit.{receipt.target} in {path} is not a table")
        current = section.get("record_id")
        if current is not None and _id_value(current) == value and type(current.unwrap()) is type(value):
            return False
        section["record_id"] = value
    except (TOMLKitError, TypeError, AttributeError) as exc:
        raise ConfigEditError(f"cannot set deposit.{receipt.target}.record_id in {path}: {exc}") from None
    atomic_write(path, tomlkit.dumps(doc).encode("utf-8"))
    return True


def normalize_doi(pid):
    doi = str(pid or "").strip()
    for prefix in _DOI_PREFIXES:
        if doi.lower().startswith(prefix):
            doi = doi[len(prefix):]
            break
    if not DOI_RE.match(doi):
        raise InvalidDoi(f"{pid!r} is not a DOI")
    return doi


def _round_trip_yaml(text):
    _, indent, block_seq_indent = load_yaml_guess_indent(text)
    yaml_rt = YAML()
    yaml_rt.preserve_quotes = True
    yaml_rt.width = 4096
    mapping = indent or 2
    offset = block_seq_indent or 0
    yaml_rt.indent(mapping=mapping, sequence=max(mapping, offset + 2), offset=offset)
    if text.lstrip().startswith("---"):
        yaml_rt.explicit_start = True
    return yaml_rt, yaml_rt.load(text)


def insert_doi_cff(cff_path, receipt):
    """Set ``doi`` and append it to ``identifiers``; returns whether the file changed.

    A DOI replaced here stays in ``identifiers``.
    """
    path = Path(cff_path)
    _writable(path)
    doi = normalize_doi(receipt.pid)
    text = path.read_text(encoding="utf-8")
    try:
        yaml_rt, data = _round_trip_yaml(text)
    except YAMLError as exc:
        raise YamlParseError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(data, CommentedMap):
        raise YamlParseError(f"{path}: expected a mapping at the top level")

    identifiers = data.get("identifiers")
    if identifiers is None:
        identifiers = CommentedSeq()
    listed = {str(i.get("value")) for i in identifiers if isinstance(i, dict) and i.get("type") == "doi"}
    old = data.get("doi")
    if old == doi and doi in listed:
        return False

    if old and str(old) != doi and str(old) not in listed:
        identifiers.append(CommentedMap([("type", "doi"), ("value", str(old))]))
    if doi not in listed:
        identifiers.append(CommentedMap([("type", "doi"), ("value", doi)]))
    data["identifiers"] = identifiers
    data["doi"] = doi

    out = io.StringIO()
    yaml_rt.dump(data, out)
    new_text = out.getvalue()
    validate_cff(yaml.load(new_text, Loader=_StringDateLoader), str(path))
    atomic_write(path, new_text.encode("utf-8"))
    return True


class CffDoiSettings(PluginSettings):
    path: str = "CITATION.cff"


class ConfigRecordIdPlugin(PostprocessPlugin):
    def __call__(self, ctx, receipt):
        if receipt.record_id is None:
            ctx.logger.warning("deposit to %r returned no record id; nothing to store", receipt.target)
            return False
        path = ctx.config.path or ctx.path(CONFIG_FILENAME)
        changed = store_record_id(path, receipt)
        ctx.logger.info("%s deposit.%s.record_id = %s in %s",
                        "set" if changed else "kept", receipt.target, receipt.record_id, ctx.relative(path))
        return changed


class CffDoiPlugin(PostprocessPlugin):
    settings_class = CffDoiSettings

    def __call__(self, ctx, receipt):
        if not receipt.pid:
            ctx.logger.warning("deposit to %r returned no DOI; %s left unchanged", receipt.target, "CITATION.cff")
            return False
        settings = ctx.settings or CffDoiSettings()
        path = ctx.path(settings.path)
        changed = insert_doi_cff(path, receipt)
        ctx.logger.info("%s DOI %s in %s", "recorded" if changed else "already had", receipt.pid, ctx.relative(path))
        return changed
