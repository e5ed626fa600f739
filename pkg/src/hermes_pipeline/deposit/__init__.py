"""The deposit phase: publish the curated (or processed) record to a target."""

from __future__ import annotations

from .base import DepositReceipt, DepositWorkflow
from .file import FileDepositPlugin, deposit_file
from .invenio import (
    InvenioDepositPlugin,
    InvenioLegacyClient,
    InvenioRDMClient,
    InvenioRDMDepositPlugin,
    project_to_invenio,
    project_to_legacy,
)

__all__ = [
    "DepositReceipt",
    "DepositWorkflow",
    "FileDepositPlugin",
    "InvenioDepositPlugin",
    "InvenioLegacyClient",
    "InvenioRDMClient",
    "InvenioRDMDepositPlugin",
    "deposit_file",
    "project_to_invenio",
    "project_to_legacy",
    "run_deposit",
]


def run_deposit(ctx, record, plugin=None):
    """Run the deposit target named by ``ctx.plugin_name`` on ``record``."""
    if plugin is None:
        from ..plugins import default_registry

        plugin = default_registry(ctx.config).lookup("deposit", ctx.plugin_name).factory()
    return plugin(ctx, record)
