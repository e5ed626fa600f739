"""The curate phase: an identity copy of the collated record.

Curation succeeds when its output does not differ from its input.  The
built-in behaviour copies ``process/collated.json`` byte for byte to
``curate/curated.json``; a configured curate plugin may inspect the record
and must hand back an identical one.
"""

from __future__ import annotations

from .cache import Phase
from .errors import ArtifactNotFound, MissingProcessOutput, PluginFailure
from .model import canonical_equal, deserialize

PROCESS_ARTIFACT = "collated"
CURATE_ARTIFACT = "curated"


def curate(record):
    return record


def curate_artifact(cache, reviewer=None):
    """Copy the process output into the curate slot; returns the bytes written."""
    try:
        data = cache.load_artifact(Phase.PROCESS, PROCESS_ARTIFACT)
    except ArtifactNotFound:
        raise MissingProcessOutput("no processed metadata to curate; run 'hermes process' first") from None
    if reviewer is not None:
        record = deserialize(data)
        reviewed = reviewer(record)
        if not canonical_equal(record, reviewed):
            raise PluginFailure("curate", {getattr(reviewer, "name", "curate"): "curation changed the record"})
    cache.store_artifact(Phase.CURATE, CURATE_ARTIFACT, data)
    return data
