"""Example third-party harvester: adds a configured grant as funding metadata.

Registered through the ``hermes.harvest`` entry point group rather than as a
built-in, so it exercises the same path an external package would use.
"""

from ..config import PluginSettings
from ..model import HarvestResult, MetadataRecord
from ..plugins import HarvestPlugin


class FundingSettings(PluginSettings):
    grant_id: str = ""


def harvest_funding(ctx):
    settings = ctx.settings if isinstance(ctx.settings, FundingSettings) else \
        FundingSettings.model_validate(ctx.section("harvest", "funding"))
    if settings.grant_id:
        return HarvestResult(MetadataRecord({"funding": settings.grant_id}), {"added": True})
    return HarvestResult(MetadataRecord(), {"added": False})


class FundingHarvestPlugin(HarvestPlugin):
    settings_class = FundingSettings

    def __call__(self, ctx):
        return harvest_funding(ctx)
