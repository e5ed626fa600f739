"""CodeMeta-derived metadata records and their canonical JSON-LD form.

The JSON-LD handled here is a fixed-context subset: the CodeMeta 2.0 context
is an opaque constant, no expansion or compaction takes place.  Values are
immutable once built: lists become tuples, objects become :class:`Node` or
:class:`PersonRef`.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from types import MappingProxyType
from typing import Any, Mapping, Union

from .errors import MalformedValue, ParseError, ReservedTerm

_log = logging.getLogger(__name__)

CODEMETA_CONTEXT = "https://doi.org/10.5063/schema/codemeta-2.0"
ROOT_TYPE = "SoftwareSourceCode"
MAX_DEPTH = 32

PERSON_TERMS = ("author", "contributor", "maintainer")
ROLES = frozenset(PERSON_TERMS)
ROLES_KEY = "hermes:roles"
PROVENANCE_TERM = "hermes:provenance"

ORCID_RE = re.compile(r"^https://orcid\.org/\d{4}-\d{4}-\d{4}-\d{3}[\dX]$")

_PERSON_KEYS = {
    "givenName": "given_names",
    "familyName": "family_names",
    "name": "full_name",
    "email": "email",
}

Value = Union[str, int, bool, tuple, "Node", "PersonRef"]


@dataclass(frozen=True, eq=False)
class Node:
    """A nested JSON-LD object, optionally typed."""

    type: str | None = None
    fields: Mapping[str, Value] = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        frozen = {}
        for key, value in dict(self.fields).items():
            _check_key(key, nested=True)
            frozen[key] = freeze(value, depth=2, term=key)
        object.__setattr__(self, "fields", MappingProxyType(frozen))

    def get(self, key, default=None):
        return self.fields.get(key, default)

    def __eq__(self, other):
        if not isinstance(other, Node):
            return NotImplemented
        return _tagged(self) == _tagged(other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PersonRef:
    given_names: str | None = None
    family_names: str | None = None
    full_name: str | None = None
    email: str | None = None
    orcid: str | None = None
    roles: frozenset = frozenset()
    extra: Mapping[str, Value] = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        for name in ("given_names", "family_names", "full_name", "email", "orcid"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise MalformedValue(f"person {name} must be text, got {value!r}")
            if value == "":
                object.__setattr__(self, name, None)
        if not (self.full_name or self.given_names or self.family_names or self.email):
            raise MalformedValue("person needs a name or an email")
        if self.orcid is not None and not ORCID_RE.match(self.orcid):
            raise MalformedValue(f"not an ORCID URI: {self.orcid!r}")
        roles = frozenset(self.roles)
        if not roles <= ROLES:
            raise MalformedValue(f"unknown person roles: {sorted(roles - ROLES)}")
        object.__setattr__(self, "roles", roles)
        extra = {}
        for key, value in dict(self.extra).items():
            _check_key(key, nested=True)
            if key in _PERSON_KEYS or key == ROLES_KEY:
                raise MalformedValue(f"person extra key {key!r} shadows a field")
            extra[key] = freeze(value, depth=2, term=key)
        object.__setattr__(self, "extra", MappingProxyType(extra))

    @property
    def display_name(self):
        if self.full_name:
            return self.full_name
        parts = [p for p in (self.given_names, self.family_names) if p]
        return " ".join(parts) or None

    def with_roles(self, *roles):
        return _replace(self, roles=self.roles | frozenset(roles))

    def __eq__(self, other):
        if not isinstance(other, PersonRef):
            return NotImplemented
        return _tagged(self) == _tagged(other)

    __hash__ = None


def _replace(person, **changes):
    values = {
        "given_names": person.given_names,
        "family_names": person.family_names,
        "full_name": person.full_name,
        "email": person.email,
        "orcid": person.orcid,
        "roles": person.roles,
        "extra": person.extra,
    }
    values.update(changes)
    return PersonRef(**values)


@dataclass(frozen=True)
class ProvenanceTag:
    """Where a collated value came from."""

    source: str
    collected_at: datetime
    local_path: str | None = None
    added: bool = False

    def to_json(self):
        return {
            "source": self.source,
            "collected_at": self.collected_at.astimezone(timezone.utc).isoformat(),
            "local_path": self.local_path,
            "added": self.added,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            source=data["source"],
            collected_at=datetime.fromisoformat(data["collected_at"]),
            local_path=data.get("local_path"),
            added=bool(data.get("added", False)),
        )


@dataclass(frozen=True, eq=False)
class MetadataRecord:
    """A CodeMeta ``SoftwareSourceCode`` document.

    ``warnings`` collects non-fatal findings from deserialization (such as a
    foreign context); it does not take part in equality.
    """

    fields: Mapping[str, Value] = field(default_factory=lambda: MappingProxyType({}))
    warnings: tuple = ()

    def __post_init__(self):
        frozen = {}
        for term, value in dict(self.fields).items():
            _check_key(term, nested=False)
            frozen[term] = freeze(value, depth=1, term=term)
        object.__setattr__(self, "fields", MappingProxyType(frozen))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def context(self):
        return CODEMETA_CONTEXT

    @property
    def record_type(self):
        return ROOT_TYPE

    @property
    def context_warning(self):
        return any(w.startswith("context") for w in self.warnings)

    def __getitem__(self, term):
        return self.fields[term]

    def __contains__(self, term):
        return term in self.fields

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)

    def get(self, term, default=None):
        return self.fields.get(term, default)

    def set(self, term, value):
        return set_field(self, term, value)

    def without(self, term):
        return MetadataRecord({k: v for k, v in self.fields.items() if k != term})

    def __eq__(self, other):
        if not isinstance(other, MetadataRecord):
            return NotImplemented
        return canonical_equal(self, other)

    __hash__ = None

    def __repr__(self):
        return f"MetadataRecord({dict(self.fields)!r})"


@dataclass(frozen=True)
class HarvestResult:
    metadata: MetadataRecord
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.metadata, MetadataRecord):
            raise TypeError("HarvestResult.metadata must be a MetadataRecord")
        if not isinstance(self.meta, dict):
            raise TypeError("HarvestResult.meta must be a dict")

    def to_json(self):
        return {"metadata": to_jsonld(self.metadata), "meta": self.meta}

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict) or "metadata" not in data:
            raise ParseError("harvest result needs a 'metadata' object")
        meta = data.get("meta") or {}
        if not isinstance(meta, dict):
            raise ParseError("harvest result 'meta' must be an object")
        return cls(from_jsonld(data["metadata"]), meta)


# -- construction -------------------------------------------------------------

def _check_key(key, nested):
    if not isinstance(key, str) or not key:
        raise MalformedValue(f"terms must be non-empty strings, got {key!r}")
    if key.startswith("@") and not (nested and key == "@id"):
        raise ReservedTerm(f"{key!r} is reserved")


def freeze(value, depth=1, term=None):
    """Validate ``value`` and convert it to its immutable form."""
    if depth > MAX_DEPTH:
        raise MalformedValue(f"value nested deeper than {MAX_DEPTH} levels at {term!r}")
    if isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, (Node, PersonRef)):
        _check_depth(value, depth)
        return value
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v, depth + 1, term) for v in value)
    if isinstance(value, Mapping):
        return _object_from_json(dict(value), depth, term)
    raise MalformedValue(f"unsupported value for {term!r}: {value!r}")


def _check_depth(value, depth):
    if depth > MAX_DEPTH:
        raise MalformedValue(f"value nested deeper than {MAX_DEPTH} levels")
    if isinstance(value, Node):
        children = value.fields.values()
    elif isinstance(value, PersonRef):
        children = value.extra.values()
    elif isinstance(value, tuple):
        children = value
    else:
        return
    for child in children:
        _check_depth(child, depth + 1)


def new_record():
    return MetadataRecord()


def set_field(record, term, value):
    _check_key(term, nested=False)
    fields = dict(record.fields)
    fields[term] = freeze(value, term=term)
    return MetadataRecord(fields)


# -- JSON-LD mapping ----------------------------------------------------------

def _ordered(obj):
    head = [k for k in ("@context", "@type", "@id") if k in obj]
    tail = sorted(k for k in obj if k not in head)
    return {k: obj[k] for k in head + tail}


def value_to_json(value):
    if isinstance(value, tuple):
        return [value_to_json(v) for v in value]
    if isinstance(value, PersonRef):
        out = {"@type": "Person"}
        if value.orcid:
            out["@id"] = value.orcid
        for key, attr in _PERSON_KEYS.items():
            if getattr(value, attr) is not None:
                out[key] = getattr(value, attr)
        if value.roles:
            out[ROLES_KEY] = sorted(value.roles)
        for key, v in value.extra.items():
            out[key] = value_to_json(v)
        return _ordered(out)
    if isinstance(value, Node):
        out = {"@type": value.type} if value.type is not None else {}
        for key, v in value.fields.items():
            out[key] = value_to_json(v)
        return _ordered(out)
    return value


def _object_from_json(obj, depth, term):
    obj = dict(obj)
    kind = obj.pop("@type", None)
    if kind is not None and not isinstance(kind, str):
        raise MalformedValue(f"@type must be text at {term!r}")
    if kind == "Person":
        person = _person_from_json(obj, depth, term)
        if person is not None:
            return person
    return Node(kind, {k: freeze(v, depth + 1, k) for k, v in obj.items()})


def _person_from_json(obj, depth, term):
    kwargs = {}
    extra = {}
    for key, value in obj.items():
        if key in _PERSON_KEYS and isinstance(value, str):
            kwargs[_PERSON_KEYS[key]] = value
        elif key == "@id" and isinstance(value, str) and ORCID_RE.match(value):
            kwargs["orcid"] = value
        elif key == ROLES_KEY and isinstance(value, list) and set(value) <= ROLES:
            kwargs["roles"] = frozenset(value)
        else:
            extra[key] = freeze(value, depth + 1, key)
    try:
        return PersonRef(extra=extra, **kwargs)
    except MalformedValue:
        return None


def to_jsonld(record):
    out = {"@context": CODEMETA_CONTEXT, "@type": ROOT_TYPE}
    for term, value in record.fields.items():
        out[term] = value_to_json(value)
    return _ordered(out)


def from_jsonld(doc):
    if not isinstance(doc, dict):
        raise ParseError("a metadata document must be a single JSON object")
    doc = dict(doc)
    warnings = []
    context = doc.pop("@context", None)
    if context != CODEMETA_CONTEXT:
        warnings.append(f"context mismatch: expected {CODEMETA_CONTEXT!r}, found {context!r}")
    kind = doc.pop("@type", ROOT_TYPE)
    if kind != ROOT_TYPE:
        warnings.append(f"type mismatch: expected {ROOT_TYPE!r}, found {kind!r}")
    fields = {}
    for term, value in doc.items():
        if term.startswith("@"):
            warnings.append(f"dropped reserved key {term!r}")
        elif value is None:
            warnings.append(f"dropped null value of {term!r}")
        else:
            fields[term] = value
    for message in warnings:
        _log.warning("%s", message)
    return MetadataRecord(fields, warnings=tuple(warnings))


def serialize(record):
    text = json.dumps(to_jsonld(record), indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def deserialize(data):
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"metadata is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return from_jsonld(doc)


# -- equality -----------------------------------------------------------------

def _tagged(value):
    # bool before int: True == 1 must not hold here
    if isinstance(value, bool):
        return ("bool", value)
    if isinstance(value, int):
        return ("int", value)
    if isinstance(value, str):
        return ("str", value)
    if isinstance(value, tuple):
        return ("list", tuple(_tagged(v) for v in value))
    if isinstance(value, Node):
        return ("node", value.type, tuple(sorted((k, _tagged(v)) for k, v in value.fields.items())))
    if isinstance(value, PersonRef):
        return (
            "person",
            value.given_names,
            value.family_names,
            value.full_name,
            value.email,
            value.orcid,
            tuple(sorted(value.roles)),
            tuple(sorted((k, _tagged(v)) for k, v in value.extra.items())),
        )
    raise MalformedValue(f"not a metadata value: {value!r}")


def values_equal(a, b):
    return _tagged(a) == _tagged(b)


def canonical_equal(a, b):
    """Same terms with same values; list order counts, key order does not."""
    if a.fields.keys() != b.fields.keys():
        return False
    return all(_tagged(a.fields[t]) == _tagged(b.fields[t]) for t in a.fields)


def canonical_key(value):
    """Hashable key identifying ``value`` under canonical equality."""
    return _tagged(value)


def utcnow():
    return datetime.now(timezone.utc)
