"""Deposit target writing a CodeMeta file."""

from __future__ import annotations

from pathlib import Path

from ..cache import atomic_write
from ..config import FileDepositSettings
from ..errors import UploadError
from ..model import serialize
from .base import DepositReceipt, DepositWorkflow


def deposit_file(record, filename):
    path = Path(filename)
    data = serialize(record)
    try:
        atomic_write(path, data)
    except OSError as exc:
        raise UploadError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return DepositReceipt(target="file", uploaded_files=((str(filename), len(data)),))


class FileDepositPlugin(DepositWorkflow):
    settings_class = FileDepositSettings

    def project(self, ctx, record):
        return record

    def create_or_select(self, ctx, payload):
        settings = ctx.settings or FileDepositSettings()
        return payload, settings.filename

    def upload(self, ctx, container, record):
        payload, filename = container
        receipt = deposit_file(payload, ctx.path(filename))
        return [(filename, size) for _path, size in receipt.uploaded_files]

    def publish(self, ctx, container):
        return {}
