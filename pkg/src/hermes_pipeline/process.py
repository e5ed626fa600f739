"""Collate per-source harvest results into a single record.

Precedence follows the order of ``harvest.sources``: for single-valued terms
the earliest source wins and every differing later value is reported as a
conflict.  Lists are merged: people (``author``, ``contributor``,
``maintainer``) by identity, everything else by value, keeping first-seen
order.  The first source contributing a list is taken verbatim, so a single
source always collates to itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime

from .errors import EmptyInput, IncompatibleTypes, IncompleteReport
from .model import (
    PERSON_TERMS,
    PROVENANCE_TERM,
    MetadataRecord,
    Node,
    PersonRef,
    ProvenanceTag,
    _replace,
    canonical_key,
    utcnow,
    value_to_json,
    values_equal,
)


@dataclass(frozen=True)
class Conflict:
    term: str
    losing_source: str
    losing_value: object

    def to_json(self):
        return {"term": self.term, "losing_source": self.losing_source,
                "losing_value": value_to_json(self.losing_value)}


@dataclass
class CollationReport:
    field_provenance: dict = field(default_factory=dict)
    conflicts: list = field(default_factory=list)
    merged_person_count: int = 0
    # term -> per list item, the sources that supplied it
    item_sources: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "field_provenance": {t: tag.to_json() for t, tag in sorted(self.field_provenance.items())},
            "conflicts": [c.to_json() for c in self.conflicts],
            "merged_person_count": self.merged_person_count,
            "item_sources": {t: s for t, s in sorted(self.item_sources.items())},
        }

    def serialize(self):
        return (json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def same_person(a, b):
    if a.email and b.email:
        return a.email.lower() == b.email.lower()
    name = a.display_name
    return bool(name) and name == b.display_name


def merge_people(winner, other):
    """Fill the gaps of ``winner`` from ``other``; roles are united."""
    extra = dict(other.extra)
    extra.update(winner.extra)
    return _replace(
        winner,
        given_names=winner.given_names or other.given_names,
        family_names=winner.family_names or other.family_names,
        full_name=winner.full_name or other.full_name,
        email=winner.email or other.email,
        orcid=winner.orcid or other.orcid,
        roles=winner.roles | other.roles,
        extra=extra,
    )


def _added(meta, term):
    added = meta.get("added", False)
    if isinstance(added, (list, tuple, set)):
        return term in added
    return bool(added)


class _ListMerge:
    def __init__(self, term, items, source):
        self.term = term
        self.people = term in PERSON_TERMS
        self.items = list(items)
        self.sources = [[source] for _ in self.items]
        self.merges = 0

    def _match(self, item):
        for i, existing in enumerate(self.items):
            if self.people and isinstance(item, PersonRef) and isinstance(existing, PersonRef):
                if same_person(existing, item):
                    return i
            elif canonical_key(existing) == canonical_key(item):
                return i
        return None

    def add(self, items, source):
        for item in items:
            i = self._match(item)
            if i is None:
                self.items.append(item)
                self.sources.append([source])
                continue
            if isinstance(item, PersonRef) and isinstance(self.items[i], PersonRef):
                self.items[i] = merge_people(self.items[i], item)
                self.merges += 1
            if source not in self.sources[i]:
                self.sources[i].append(source)


def collate(results, collected_at=None):
    """Merge ``[(source, HarvestResult), ...]`` into ``(record, report)``.

    ``collected_at`` maps source names to harvest times; sources without an
    entry are stamped with the current time.
    """
    results = list(results)
    if not results:
        raise EmptyInput("nothing to collate: no harvest results")
    collected_at = collected_at or {}
    now = utcnow()

    values: dict = {}
    winners: dict = {}
    lists: dict = {}
    report = CollationReport()

    for source, result in results:
        meta = result.meta or {}
        for term, value in result.metadata.fields.items():
            if term not in winners:
                winners[term] = source
                report.field_provenance[term] = ProvenanceTag(
                    source=source,
                    collected_at=collected_at.get(source, now),
                    local_path=meta.get("local_path"),
                    added=_added(meta, term),
                )
                if isinstance(value, tuple):
                    lists[term] = _ListMerge(term, value, source)
                else:
                    values[term] = value
                continue
            if (term in lists) != isinstance(value, tuple):
                list_source = winners[term] if term in lists else source
                scalar_source = source if term in lists else winners[term]
                raise IncompatibleTypes(term, list_source, scalar_source)
            if term in lists:
                lists[term].add(value, source)
            elif not values_equal(values[term], value):
                report.conflicts.append(Conflict(term, source, value))

    fields = {}
    for term in winners:
        if term in lists:
            merged = lists[term]
            fields[term] = merged.items
            report.item_sources[term] = merged.sources
            report.merged_person_count += merged.merges
        else:
            fields[term] = values[term]
    return MetadataRecord(fields), report


def _provenance_node(tag, item_sources):
    fields = {"source": tag.source, "added": tag.added}
    if tag.local_path:
        fields["localPath"] = tag.local_path
    if item_sources is not None:
        fields["itemSources"] = item_sources
    return Node(None, fields)


def attach_provenance(record, report):
    """Embed per-term provenance under ``hermes:provenance``.

    The harvest timestamps stay in the report only, so that collating the
    same sources again yields the same bytes.
    """
    base = strip_provenance(record)
    missing = [t for t in base.fields if t not in report.field_provenance]
    if missing:
        raise IncompleteReport(f"no provenance for term(s): {', '.join(sorted(missing))}")
    entries = {
        term: _provenance_node(report.field_provenance[term], report.item_sources.get(term))
        for term in base.fields
    }
    return base.set(PROVENANCE_TERM, Node(None, entries))


def strip_provenance(record):
    return record.without(PROVENANCE_TERM) if PROVENANCE_TERM in record else record


def load_report(data):
    doc = json.loads(data)
    return CollationReport(
        field_provenance={t: ProvenanceTag.from_json(v) for t, v in doc["field_provenance"].items()},
        conflicts=doc.get("conflicts", []),
        merged_person_count=doc.get("merged_person_count", 0),
        item_sources=doc.get("item_sources", {}),
    )


def parse_time(value):
    if isinstance(value, datetime):
        return value
    return datetime.fromisoformat(value)
