"""Harvest ``CITATION.cff`` (Citation File Format 1.2.0)."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from ..config import PluginSettings
from ..errors import CffValidationError, MalformedValue, YamlParseError
from ..model import ORCID_RE, HarvestResult, MetadataRecord, Node, PersonRef
from ..plugins import HarvestPlugin

SPDX_URL = "https://spdx.org/licenses/"
DOI_URL = "https://doi.org/"

# CFF key -> CodeMeta term, for keys whose values carry over unchanged
CROSSWALK = {
    "title": "name",
    "version": "version",
    "abstract": "description",
    "date-released": "datePublished",
    "keywords": "keywords",
    "repository-code": "codeRepository",
    "repository-artifact": "downloadUrl",
    "url": "url",
}
# handled by dedicated code below
_SPECIAL = {"authors", "contact", "doi", "identifiers", "license", "license-url"}


class CffSettings(PluginSettings):
    enable_validation: bool = True
    path: str = "CITATION.cff"


class _StringDateLoader(yaml.SafeLoader):
    """Safe loader that leaves dates as text, as the CFF schema expects."""


_StringDateLoader.yaml_implicit_resolvers = {
    key: [(tag, regexp) for tag, regexp in resolvers if tag != "tag:yaml.org,2002:timestamp"]
    for key, resolvers in yaml.SafeLoader.yaml_implicit_resolvers.items()
}


@lru_cache(maxsize=1)
def cff_schema():
    text = resources.files("hermes_pipeline").joinpath("schemas/cff-1.2.0.json").read_text("utf-8")
    return json.loads(text)


def load_cff(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.load(text, Loader=_StringDateLoader)
    except yaml.YAMLError as exc:
        raise YamlParseError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise YamlParseError(f"{path}: expected a mapping at the top level")
    return data


def validate_cff(data, source="CITATION.cff"):
    validator = jsonschema.Draft7Validator(cff_schema(), format_checker=jsonschema.FormatChecker())
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(e.absolute_path), e.message))
    if not errors:
        return
    err = errors[0]
    key = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if isinstance(err.instance, dict) and k not in err.instance]
        key = ".".join(filter(None, [key, missing[0] if missing else ""]))
        message = f"missing required key {key!r}"
    else:
        message = f"invalid value at {key or '<root>'!r}: {err.message}"
    raise CffValidationError(f"{source}: {message}")


def license_value(value):
    if isinstance(value, list):
        return [license_value(v) for v in value]
    return SPDX_URL + value


def _person(entry, role):
    extra = {}
    orcid = entry.get("orcid")
    if orcid is not None and not (isinstance(orcid, str) and ORCID_RE.match(orcid)):
        extra["identifier"] = str(orcid)
        orcid = None
    if entry.get("affiliation"):
        extra["affiliation"] = Node("Organization", {"legalName": str(entry["affiliation"])})
    if entry.get("alias"):
        extra["alternateName"] = str(entry["alias"])
    family = " ".join(str(p) for p in (entry.get("name-particle"), entry.get("family-names")) if p)
    if entry.get("name-suffix"):
        family = f"{family}, {entry['name-suffix']}" if family else str(entry["name-suffix"])
    try:
        return PersonRef(
            given_names=_text(entry.get("given-names")),
            family_names=family or None,
            email=_text(entry.get("email")),
            orcid=orcid,
            roles=frozenset({role}),
            extra=extra,
        )
    except MalformedValue:
        if entry.get("alias"):
            extra.pop("alternateName")
            return PersonRef(full_name=str(entry["alias"]), orcid=orcid, roles=frozenset({role}), extra=extra)
        raise


def _entity(entry):
    fields = {k: str(entry[k]) for k in ("name", "email") if entry.get(k)}
    if entry.get("website"):
        fields["url"] = str(entry["website"])
    return Node("Organization", fields)


def _text(value):
    return None if value is None else str(value)


def _people(entries, role):
    people = []
    for entry in entries or []:
        if not isinstance(entry, dict):
            continue
        people.append(_entity(entry) if "name" in entry else _person(entry, role))
    return people


def cff_to_codemeta(data):
    """Map a parsed CFF document; returns (fields, unmapped keys)."""
    fields = {}
    unmapped = []
    for key, value in data.items():
        if key in CROSSWALK:
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = str(value)
            fields[CROSSWALK[key]] = value
        elif key not in _SPECIAL:
            unmapped.append(key)

    authors = _people(data.get("authors"), "author")
    if authors:
        fields["author"] = authors
    contacts = _people(data.get("contact"), "maintainer")
    if contacts:
        fields["maintainer"] = contacts

    if data.get("license"):
        fields["license"] = license_value(data["license"])
    elif data.get("license-url"):
        fields["license"] = str(data["license-url"])

    identifiers = [i for i in data.get("identifiers") or [] if isinstance(i, dict)]
    doi = data.get("doi")
    if not doi:
        doi = next((i.get("value") for i in identifiers if i.get("type") == "doi"), None)
    if doi:
        fields["identifier"] = DOI_URL + str(doi)
    if identifiers:
        unmapped.append("identifiers")
    if data.get("license") and data.get("license-url"):
        unmapped.append("license-url")
    return fields, sorted(unmapped)


def harvest_cff(ctx, path="CITATION.cff", enable_validation=True):
    path = Path(path)
    data = load_cff(path)
    if enable_validation:
        validate_cff(data, source=path.name)
    fields, unmapped = cff_to_codemeta(data)
    meta = {
        "local_path": ctx.relative(path) if ctx is not None else str(path),
        "validation": "valid" if enable_validation else "unvalidated",
        "unmapped": unmapped,
    }
    return HarvestResult(MetadataRecord(fields), meta)


class CffHarvestPlugin(HarvestPlugin):
    settings_class = CffSettings

    def __call__(self, ctx):
        settings = ctx.settings or CffSettings()
        return harvest_cff(ctx, ctx.path(settings.path), settings.enable_validation)
