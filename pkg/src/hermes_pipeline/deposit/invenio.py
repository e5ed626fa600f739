"""Deposit to InvenioRDM (``invenio_rdm``) and legacy Invenio/Zenodo (``invenio``) sites.

Both targets share the workflow of :class:`DepositWorkflow`; they differ in
the record schema the metadata is projected onto and in the REST paths used.
Paths are looked up by keyword and can be overridden per site with
``deposit.<target>.api_paths``.

Only GET requests are retried (on 5xx and connection failures); requests
that create or change state are sent once.
"""

from __future__ import annotations

import logging
from datetime import date
from pathlib import Path

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .. import __version__
from ..config import InvenioSettings
from ..errors import AuthError, ConfigError, HttpError, NetworkError, ProjectError, ProtocolError
from ..model import PersonRef, Node
from ..process import strip_provenance
from .base import DepositWorkflow

_log = logging.getLogger(__name__)

RDM_API_PATHS = {
    "records": "/api/records",
    "record": "/api/records/{id}",
    "draft": "/api/records/{id}/draft",
    "draft_files": "/api/records/{id}/draft/files",
    "publish": "/api/records/{id}/draft/actions/publish",
    "versions": "/api/records/{id}/versions",
}

LEGACY_API_PATHS = {
    "depositions": "/api/deposit/depositions",
    "deposition": "/api/deposit/depositions/{id}",
    "newversion": "/api/deposit/depositions/{id}/actions/newversion",
    "publish": "/api/deposit/depositions/{id}/actions/publish",
}

SPDX_URL = "https://spdx.org/licenses/"
ORCID_URL = "https://orcid.org/"
USER_AGENT = f"hermes-pipeline/{__version__}"


# -- projection ---------------------------------------------------------------

def _as_list(value):
    if value is None:
        return []
    return list(value) if isinstance(value, tuple) else [value]


def _split_name(person):
    if person.family_names:
        return person.given_names, person.family_names
    name = person.display_name
    if not name:
        return None, None
    given, _, family = name.rpartition(" ")
    return (given or None), family


def _creator(person):
    if isinstance(person, Node):
        name = person.get("name") or person.get("legalName")
        if not isinstance(name, str):
            return None
        return {"person_or_org": {"type": "organizational", "name": name}}
    if not isinstance(person, PersonRef):
        return None
    given, family = _split_name(person)
    if not family:
        return None
    entry = {"type": "personal", "family_name": family}
    if given:
        entry["given_name"] = given
    if person.orcid:
        entry["identifiers"] = [{"scheme": "orcid", "identifier": person.orcid[len(ORCID_URL):]}]
    creator = {"person_or_org": entry}
    affiliation = person.extra.get("affiliation")
    if isinstance(affiliation, Node):
        aff_name = affiliation.get("legalName") or affiliation.get("name")
        if isinstance(aff_name, str):
            creator["affiliations"] = [{"name": aff_name}]
    return creator


def _rights(value):
    if not isinstance(value, str):
        return None
    if value.startswith(SPDX_URL):
        return {"id": value[len(SPDX_URL):].lower()}
    if value.startswith(("http://", "https://")):
        return {"link": value, "title": {"en": value}}
    return {"title": {"en": value}}


def _creators(record):
    authors = _as_list(record.get("author"))
    creators = [_creator(a) for a in authors]
    if any(c is None for c in creators):
        raise ProjectError("every author needs a name to become a creator")
    return creators


def _check_mandatory(record):
    missing = [t for t in ("name", "author") if not record.get(t)]
    if missing:
        raise ProjectError(f"record lacks mandatory term(s): {', '.join(missing)}")


def project_to_invenio(record, cfg, today=None):
    """Map a record onto an InvenioRDM draft payload."""
    record = strip_provenance(record)
    _check_mandatory(record)
    cfg = cfg if isinstance(cfg, InvenioSettings) else InvenioSettings.model_validate(cfg or {})
    today = today or date.today()

    published = record.get("datePublished")
    metadata = {
        "resource_type": {"id": "software"},
        "title": record["name"],
        "publication_date": published if isinstance(published, str) else today.isoformat(),
        "creators": _creators(record),
    }
    for term, key in (("version", "version"), ("description", "description")):
        if isinstance(record.get(term), str):
            metadata[key] = record[term]
    rights = [r for r in map(_rights, _as_list(record.get("license"))) if r]
    if rights:
        metadata["rights"] = rights
    keywords = [k for k in _as_list(record.get("keywords")) if isinstance(k, str)]
    if keywords:
        metadata["subjects"] = [{"subject": k} for k in keywords]
    repo = record.get("codeRepository")
    if isinstance(repo, str):
        metadata["related_identifiers"] = [
            {"identifier": repo, "scheme": "url", "relation_type": {"id": "issupplementedby"}}
        ]

    access = {"record": "public", "files": "public" if cfg.access_right == "open" else "restricted"}
    if cfg.access_right == "embargoed":
        access["embargo"] = {"active": True, "until": cfg.embargo_date.isoformat()}
    payload = {"metadata": metadata, "access": access, "files": {"enabled": bool(cfg.files)}}

    parent = {}
    if cfg.access_right == "restricted":
        parent["access"] = {"settings": {"allow_user_requests": True,
                                         "accept_conditions_text": cfg.access_conditions}}
    if cfg.communities:
        parent["communities"] = {"ids": list(cfg.communities)}
    if parent:
        payload["parent"] = parent
    if cfg.doi:
        payload["pids"] = {"doi": {"identifier": cfg.doi, "provider": "external"}}
    return payload


def project_to_legacy(record, cfg, today=None):
    """Map a record onto the legacy Invenio/Zenodo deposition metadata."""
    record = strip_provenance(record)
    _check_mandatory(record)
    cfg = cfg if isinstance(cfg, InvenioSettings) else InvenioSettings.model_validate(cfg or {})
    today = today or date.today()

    creators = []
    for entry in _creators(record):
        who = entry["person_or_org"]
        if who["type"] == "organizational":
            creator = {"name": who["name"]}
        else:
            creator = {"name": ", ".join(p for p in (who["family_name"], who.get("given_name")) if p)}
            for ident in who.get("identifiers", []):
                creator["orcid"] = ident["identifier"]
        if entry.get("affiliations"):
            creator["affiliation"] = entry["affiliations"][0]["name"]
        creators.append(creator)

    published = record.get("datePublished")
    metadata = {
        "upload_type": "software",
        "title": record["name"],
        "creators": creators,
        "description": record.get("description") if isinstance(record.get("description"), str) else record["name"],
        "publication_date": published if isinstance(published, str) else today.isoformat(),
        "access_right": cfg.access_right,
    }
    if isinstance(record.get("version"), str):
        metadata["version"] = record["version"]
    license = next((r["id"] for r in map(_rights, _as_list(record.get("license"))) if r and "id" in r), None)
    if license:
        metadata["license"] = license
    keywords = [k for k in _as_list(record.get("keywords")) if isinstance(k, str)]
    if keywords:
        metadata["keywords"] = keywords
    if cfg.access_right == "embargoed":
        metadata["embargo_date"] = cfg.embargo_date.isoformat()
    if cfg.access_right == "restricted":
        metadata["access_conditions"] = cfg.access_conditions
    if cfg.communities:
        metadata["communities"] = [{"identifier": c} for c in cfg.communities]
    if cfg.doi:
        metadata["doi"] = cfg.doi
    return metadata


# -- wire clients -------------------------------------------------------------

class _Client:
    default_paths: dict = {}

    def __init__(self, site_url, token, api_paths=None, timeout=30.0):
        if not token:
            raise AuthError(f"no auth token given for {site_url}")
        self.site_url = site_url.rstrip("/")
        self.api_paths = {**self.default_paths, **(api_paths or {})}
        self.timeout = timeout
        headers = {
            "Authorization": f"Bearer {token}",
            "User-Agent": USER_AGENT,
            "Accept": "application/json",
        }
        self._session = requests.Session()
        self._session.headers.update(headers)
        self._session.mount("http://", HTTPAdapter(max_retries=0))
        self._session.mount("https://", HTTPAdapter(max_retries=0))
        retry = Retry(total=3, backoff_factor=0.25, status_forcelist=(500, 502, 503, 504),
                      allowed_methods=frozenset({"GET"}), raise_on_status=False)
        self._get_session = requests.Session()
        self._get_session.headers.update(headers)
        self._get_session.mount("http://", HTTPAdapter(max_retries=retry))
        self._get_session.mount("https://", HTTPAdapter(max_retries=retry))

    def url(self, keyword, **params):
        path = self.api_paths[keyword].format(**params)
        if path.startswith(("http://", "https://")):
            return path
        return f"{self.site_url}/{path.lstrip('/')}"

    def request(self, method, url, **kwargs):
        session = self._get_session if method == "GET" else self._session
        try:
            response = session.request(method, url, timeout=self.timeout, **kwargs)
        except requests.Timeout:
            raise NetworkError(f"{method} {url} timed out after {self.timeout}s") from None
        except requests.RequestException as exc:
            raise NetworkError(f"{method} {url} failed: {type(exc).__name__}") from None
        _log.debug("%s %s -> %s", method, url, response.status_code)
        if response.status_code in (401, 403):
            raise HttpError(
                response.status_code,
                f"authentication failed: {self.site_url} rejected the auth token "
                f"(HTTP {response.status_code} on {method} {url}); check that the token "
                "is valid for this site and has deposit permissions",
                response.text[:300],
            )
        if not response.ok:
            raise HttpError(
                response.status_code,
                f"{method} {url} returned HTTP {response.status_code}: {response.text[:300]}",
                response.text[:300],
            )
        if not response.content:
            return {}
        try:
            return response.json()
        except ValueError:
            raise ProtocolError(f"{method} {url} did not return JSON") from None

    @staticmethod
    def _field(body, *path):
        value = body
        for key in path:
            if not isinstance(value, dict) or key not in value:
                raise ProtocolError(f"response lacks {'.'.join(path)}")
            value = value[key]
        return value


class InvenioRDMClient(_Client):
    default_paths = RDM_API_PATHS

    def get_record(self, record_id):
        return self.request("GET", self.url("record", id=record_id))

    def create_draft(self, payload):
        body = self.request("POST", self.url("records"), json=payload)
        return str(self._field(body, "id"))

    def new_version(self, record_id):
        self.get_record(record_id)
        body = self.request("POST", self.url("versions", id=record_id))
        return str(self._field(body, "id"))

    def update_draft(self, draft_id, payload):
        self.request("PUT", self.url("draft", id=draft_id), json=payload)

    def upload_file(self, draft_id, path):
        path = Path(path)
        data = path.read_bytes()
        files_url = self.url("draft_files", id=draft_id)
        self.request("POST", files_url, json=[{"key": path.name}])
        self.request("PUT", f"{files_url}/{path.name}/content", data=data,
                     headers={"Content-Type": "application/octet-stream"})
        self.request("POST", f"{files_url}/{path.name}/commit")
        return len(data)

    def publish(self, draft_id):
        body = self.request("POST", self.url("publish", id=draft_id))
        record_id = str(self._field(body, "id"))
        pid = self._field(body, "pids", "doi", "identifier")
        url = (body.get("links") or {}).get("self_html")
        return record_id, pid, url


class InvenioLegacyClient(_Client):
    default_paths = LEGACY_API_PATHS

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._buckets = {}

    def _remember(self, body):
        dep_id = str(self._field(body, "id"))
        self._buckets[dep_id] = self._field(body, "links", "bucket")
        return dep_id

    def get_record(self, record_id):
        return self.request("GET", self.url("deposition", id=record_id))

    def create_draft(self, payload):
        return self._remember(self.request("POST", self.url("depositions"), json={"metadata": payload}))

    def new_version(self, record_id):
        self.get_record(record_id)
        body = self.request("POST", self.url("newversion", id=record_id))
        draft_url = self._field(body, "links", "latest_draft")
        return self._remember(self.request("GET", draft_url))

    def update_draft(self, draft_id, payload):
        self._remember(self.request("PUT", self.url("deposition", id=draft_id), json={"metadata": payload}))

    def upload_file(self, draft_id, path):
        path = Path(path)
        data = path.read_bytes()
        bucket = self._buckets[str(draft_id)]
        self.request("PUT", f"{bucket}/{path.name}", data=data,
                     headers={"Content-Type": "application/octet-stream"})
        return len(data)

    def publish(self, draft_id):
        body = self.request("POST", self.url("publish", id=draft_id))
        record_id = str(self._field(body, "id"))
        pid = self._field(body, "doi")
        links = body.get("links") or {}
        return record_id, pid, links.get("record_html") or links.get("html")


# -- plugins ------------------------------------------------------------------

class InvenioRDMDepositPlugin(DepositWorkflow):
    settings_class = InvenioSettings
    client_class = InvenioRDMClient
    projector = staticmethod(project_to_invenio)

    def prepare(self, ctx):
        settings = ctx.settings or InvenioSettings.model_validate(ctx.section())
        target = ctx.plugin_name
        if not settings.token:
            raise AuthError(
                f"no auth token configured for deposit target {target!r}; set "
                f"deposit.{target}.auth_token or HERMES_DEPOSIT__{target.upper()}__AUTH_TOKEN"
            )
        if not settings.site_url:
            raise ConfigError(f"deposit.{target}.site_url is not configured")
        self.settings = settings
        self.client = self.client_class(settings.site_url, settings.token, settings.api_paths, timeout=ctx.timeout)

    def project(self, ctx, record):
        return self.projector(record, self.settings)

    def create_or_select(self, ctx, payload):
        if self.settings.record_id is not None:
            draft_id = self.client.new_version(self.settings.record_id)
            self.client.update_draft(draft_id, payload)
            ctx.logger.info("created new version draft %s of record %s", draft_id, self.settings.record_id)
        else:
            draft_id = self.client.create_draft(payload)
            ctx.logger.info("created draft %s", draft_id)
        return draft_id

    def upload(self, ctx, draft_id, record):
        uploaded = []
        for name in self.settings.files:
            path = ctx.path(name)
            size = self.client.upload_file(draft_id, path)
            uploaded.append((name, size))
        if not uploaded:
            ctx.logger.warning("no files configured in deposit.%s.files; depositing metadata only", ctx.plugin_name)
        return uploaded

    def publish(self, ctx, draft_id):
        record_id, pid, url = self.client.publish(draft_id)
        ctx.logger.info("published record %s with DOI %s", record_id, pid)
        return {"record_id": record_id, "pid": pid, "record_url": url}


class InvenioDepositPlugin(InvenioRDMDepositPlugin):
    client_class = InvenioLegacyClient
    projector = staticmethod(project_to_legacy)
