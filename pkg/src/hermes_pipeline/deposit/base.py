"""Deposit receipts and the shared deposit sub-workflow."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime

from ..errors import CreateError, DepositError, ProjectError, PublishError, UploadError
from ..model import utcnow
from ..plugins import DepositPlugin


@dataclass(frozen=True)
class DepositReceipt:
    target: str
    record_id: str | None = None
    pid: str | None = None
    record_url: str | None = None
    uploaded_files: tuple = ()
    published_at: datetime = field(default_factory=utcnow)
    curated: bool = False

    def to_json(self):
        data = asdict(self)
        data["uploaded_files"] = [list(item) for item in self.uploaded_files]
        data["published_at"] = self.published_at.isoformat()
        return data

    def serialize(self):
        return (json.dumps(self.to_json(), indent=2) + "\n").encode("utf-8")

    @classmethod
    def from_json(cls, data):
        return cls(
            target=data["target"],
            record_id=data.get("record_id"),
            pid=data.get("pid"),
            record_url=data.get("record_url"),
            uploaded_files=tuple((path, int(size)) for path, size in data.get("uploaded_files", [])),
            published_at=datetime.fromisoformat(data["published_at"]),
            curated=bool(data.get("curated", False)),
        )

    @classmethod
    def deserialize(cls, data):
        return cls.from_json(json.loads(data))


_STEP_ERRORS = {
    "project": ProjectError,
    "create": CreateError,
    "upload": UploadError,
    "publish": PublishError,
}


def _run_step(step, func, *args):
    try:
        return func(*args)
    except DepositError as exc:
        # keep the concrete type (HttpError, AuthError ...) and tag the step
        if exc.step is None:
            exc.step = step
            exc.args = (f"{step} step failed: {exc}",) + exc.args[1:]
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise _STEP_ERRORS[step](f"{step} step failed: {exc}") from exc


class DepositWorkflow(DepositPlugin):
    """project -> create or select -> upload -> publish.

    Subclasses implement the four steps; :meth:`prepare` runs first and is
    where preconditions that must hold before any I/O are checked.
    """

    name = "deposit"

    def prepare(self, ctx):
        pass

    def project(self, ctx, record):
        raise NotImplementedError

    def create_or_select(self, ctx, payload):
        raise NotImplementedError

    def upload(self, ctx, container, record):
        raise NotImplementedError

    def publish(self, ctx, container):
        raise NotImplementedError

    def __call__(self, ctx, record):
        self.prepare(ctx)
        payload = _run_step("project", self.project, ctx, record)
        container = _run_step("create", self.create_or_select, ctx, payload)
        uploaded = _run_step("upload", self.upload, ctx, container, record)
        published = _run_step("publish", self.publish, ctx, container) or {}
        return DepositReceipt(
            target=ctx.plugin_name,
            uploaded_files=tuple(uploaded or ()),
            **published,
        )
