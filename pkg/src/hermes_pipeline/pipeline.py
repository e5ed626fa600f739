"""Run one phase of the pipeline against a working directory.

Each phase takes the working-directory lock, checks that its predecessor has
completed, drops its own marker and all later ones, does its work and writes
its marker last.  An interrupted phase therefore never looks complete.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .cache import CacheStore, Phase
from .config import CONFIG_FILENAME, read_config, resolve
from .curate import CURATE_ARTIFACT, PROCESS_ARTIFACT, curate_artifact
from .deposit.base import DepositReceipt
from .errors import (
    ConfigError,
    DepositError,
    PluginContractError,
    PluginFailure,
    StaleCache,
)
from .model import HarvestResult, MetadataRecord, ProvenanceTag, deserialize, serialize, utcnow
from .plugins import default_registry, make_context
from .process import attach_provenance, collate, parse_time, strip_provenance

_log = logging.getLogger(__name__)

REPORT_ARTIFACT = "report"
RECEIPT_PREFIX = "receipt-"


@dataclass
class PhaseReport:
    phase: Phase
    succeeded: list = field(default_factory=list)
    failed: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    receipt: DepositReceipt | None = None


@dataclass
class _Run:
    phase: Phase
    config: object
    registry: object
    cache: CacheStore
    working_dir: Path
    timeout: float
    invocation: str
    report: PhaseReport

    def context(self, group, name):
        return make_context(self.config, self.working_dir, group, name, self.registry,
                            cache=self.cache, invocation=self.invocation, timeout=self.timeout)

    def plugin(self, group, name):
        return self.registry.lookup(group, name).factory()


def _failed(run, name, exc):
    _log.error("plugin %s (hermes.%s) failed: %s", name, run.phase.value, exc)
    _log.debug("traceback of plugin %s", name, exc_info=exc)
    run.report.failed[name] = str(exc) or type(exc).__name__


def _reported(exc):
    exc.reported = True
    return exc


def _harvest(run):
    sources = run.config.sources
    if not sources:
        raise ConfigError(f"no sources configured: set harvest.sources in {CONFIG_FILENAME}")
    run.cache.clear_artifacts(Phase.HARVEST)
    for name in sources:
        try:
            ctx = run.context("harvest", name)
            result = run.plugin("harvest", name)(ctx)
            if not isinstance(result, HarvestResult):
                raise PluginContractError(f"returned {type(result).__name__}, not a HarvestResult")
        except Exception as exc:  # noqa: BLE001 - every plugin failure is reported, none is fatal alone
            _failed(run, name, exc)
            continue
        doc = {"source": name, "collected_at": utcnow().isoformat(), **result.to_json()}
        data = (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")
        run.report.artifacts.append(run.cache.store_artifact(Phase.HARVEST, name, data))
        run.report.succeeded.append(name)
        _log.info("harvested %d term(s) from %s", len(result.metadata), name)
    if run.report.failed:
        raise PluginFailure("harvest", run.report.failed)


def _load_harvest(cache, sources):
    results, collected_at = [], {}
    for name in sources:
        if not cache.has_artifact(Phase.HARVEST, name):
            raise StaleCache(f"source {name!r} has no harvest output; run 'hermes harvest' again")
        doc = json.loads(cache.load_artifact(Phase.HARVEST, name))
        results.append((name, HarvestResult.from_json(doc)))
        collected_at[name] = parse_time(doc["collected_at"])
    return results, collected_at


def _process(run):
    results, collected_at = _load_harvest(run.cache, run.config.sources)
    record, report = collate(results, collected_at)
    for name in run.config.process_execute:
        before = record
        try:
            record = run.plugin("process", name)(run.context("process", name), record)
            if not isinstance(record, MetadataRecord):
                raise PluginContractError(f"returned {type(record).__name__}, not a MetadataRecord")
        except Exception as exc:  # noqa: BLE001
            _failed(run, name, exc)
            raise PluginFailure("process", run.report.failed) from exc
        record = strip_provenance(record)
        for term in set(report.field_provenance) - set(record.fields):
            del report.field_provenance[term]
        for term in record.fields:
            if term not in before.fields or before.fields[term] != record.fields[term]:
                report.field_provenance[term] = ProvenanceTag(source=f"process:{name}", collected_at=utcnow())
        run.report.succeeded.append(name)
    attached = attach_provenance(record, report)
    run.report.artifacts.append(run.cache.store_artifact(Phase.PROCESS, PROCESS_ARTIFACT, serialize(attached)))
    run.report.artifacts.append(run.cache.store_artifact(Phase.PROCESS, REPORT_ARTIFACT, report.serialize()))
    _log.info("collated %d source(s) into %d term(s); %d conflict(s)",
              len(results), len(record), len(report.conflicts))
    for conflict in report.conflicts:
        _log.info("conflict on %s: value from %s discarded", conflict.term, conflict.losing_source)


def _curate(run):
    name = run.config.curate_method
    reviewer = None
    if name:
        plugin = run.plugin("curate", name)
        ctx = run.context("curate", name)
        reviewer = lambda record: plugin(ctx, record)  # noqa: E731
        reviewer.name = name
    curate_artifact(run.cache, reviewer)
    run.report.artifacts.append(run.cache.artifact_path(Phase.CURATE, CURATE_ARTIFACT))
    if name:
        run.report.succeeded.append(name)


def receipts(cache):
    return [n for n in cache.artifacts(Phase.DEPOSIT) if n.startswith(RECEIPT_PREFIX)]


def latest_receipt(cache):
    names = receipts(cache)
    if not names:
        raise StaleCache("no deposit receipt found; run 'hermes deposit' first")
    return DepositReceipt.deserialize(cache.load_artifact(Phase.DEPOSIT, names[-1]))


def _deposit(run):
    target = run.config.deposit_target
    if not target:
        raise ConfigError(f"no deposit target configured: set deposit.target in {CONFIG_FILENAME}")
    curated = run.cache.has_marker(Phase.CURATE)
    if curated:
        data = run.cache.load_artifact(Phase.CURATE, CURATE_ARTIFACT)
    else:
        data = run.cache.load_artifact(Phase.PROCESS, PROCESS_ARTIFACT)
        _log.info("curate has not run; depositing the uncurated process output")
    record = deserialize(data)
    try:
        receipt = run.plugin("deposit", target)(run.context("deposit", target), record)
    except (DepositError, ConfigError) as exc:
        _log.error("plugin %s (hermes.deposit) failed: %s", target, exc)
        raise _reported(exc)
    except Exception as exc:  # noqa: BLE001
        _failed(run, target, exc)
        raise PluginFailure("deposit", run.report.failed) from exc
    receipt = dataclasses.replace(receipt, curated=curated)
    name = f"{RECEIPT_PREFIX}{len(receipts(run.cache)) + 1:04d}"
    run.report.artifacts.append(run.cache.store_artifact(Phase.DEPOSIT, name, receipt.serialize()))
    run.report.succeeded.append(target)
    run.report.receipt = receipt
    _log.info("deposited to %s%s", target, f": {receipt.pid}" if receipt.pid else "")


def _postprocess(run):
    receipt = latest_receipt(run.cache)
    run.report.receipt = receipt
    for name in run.config.postprocess_execute:
        try:
            run.plugin("postprocess", name)(run.context("postprocess", name), receipt)
        except Exception as exc:  # noqa: BLE001
            _failed(run, name, exc)
            continue
        run.report.succeeded.append(name)
    if run.report.failed:
        raise PluginFailure("postprocess", run.report.failed)


_HANDLERS = {
    Phase.HARVEST: _harvest,
    Phase.PROCESS: _process,
    Phase.CURATE: _curate,
    Phase.DEPOSIT: _deposit,
    Phase.POSTPROCESS: _postprocess,
}


def load_pipeline_config(working_dir, config_path=None, env=None, overrides=None, registry=None):
    path = Path(config_path) if config_path else Path(working_dir) / CONFIG_FILENAME
    return resolve(read_config(path), env=os.environ if env is None else env, cli_overrides=overrides,
                   registry=registry)


def run_phase(phase, working_dir=".", config=None, *, config_path=None, env=None, overrides=None,
              timeout=30.0, invocation="library", registry=None):
    """Run ``phase`` in ``working_dir`` and return a :class:`PhaseReport`.

    ``config`` may be a resolved :class:`PipelineConfig`; otherwise it is read
    from ``config_path`` (default ``<working_dir>/hermes.toml``) with ``env``
    and ``overrides`` applied on top.
    """
    phase = Phase(phase)
    working_dir = Path(working_dir)
    cache = CacheStore(working_dir)
    with cache.lock():
        cache.check_order(phase)
        if config is None:
            config = load_pipeline_config(working_dir, config_path, env, overrides, registry)
        registry = registry or default_registry(config)
        cache.invalidate_from(phase)
        run = _Run(phase, config, registry, cache, working_dir, timeout, invocation, PhaseReport(phase))
        _log.debug("running %s in %s", phase.value, working_dir)
        _HANDLERS[phase](run)
        cache.write_marker(phase)
    _log.info("%s completed", phase.value)
    return run.report
