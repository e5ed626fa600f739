"""Harvest an existing ``codemeta.json``."""

from __future__ import annotations

from pathlib import Path

from ..config import PluginSettings
from ..model import PERSON_TERMS, PROVENANCE_TERM, HarvestResult, MetadataRecord, PersonRef, deserialize
from ..plugins import HarvestPlugin


class CodeMetaSettings(PluginSettings):
    path: str = "codemeta.json"


def _normalize_people(record):
    """Person terms become lists, and people in them get the matching role.

    Provenance embedded by an earlier run is dropped; it describes that run.
    """
    fields = {t: v for t, v in record.fields.items() if t != PROVENANCE_TERM}
    for term in PERSON_TERMS:
        if term not in fields:
            continue
        value = fields[term]
        items = value if isinstance(value, tuple) else (value,)
        fields[term] = [p.with_roles(term) if isinstance(p, PersonRef) else p for p in items]
    return MetadataRecord(fields, warnings=record.warnings)


def harvest_codemeta(ctx, path="codemeta.json"):
    path = Path(path)
    record = _normalize_people(deserialize(path.read_bytes()))
    meta = {
        "local_path": ctx.relative(path) if ctx is not None else str(path),
        "context_warning": record.context_warning,
        "warnings": list(record.warnings),
    }
    return HarvestResult(record, meta)


class CodeMetaHarvestPlugin(HarvestPlugin):
    settings_class = CodeMetaSettings

    def __call__(self, ctx):
        settings = ctx.settings or CodeMetaSettings()
        return harvest_codemeta(ctx, ctx.path(settings.path))
