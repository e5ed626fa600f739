"""Working cache under ``.hermes/`` and the phase order it enforces.

Layout::

    .hermes/
        lock
        harvest/<plugin>.json   harvest/harvest.marker
        process/collated.json   process/report.json   process/process.marker
        curate/curated.json     curate/curate.marker
        deposit/receipt-0001.json ...                   deposit/deposit.marker
        postprocess/postprocess.marker

A marker is an empty file whose mtime is the completion time of its phase.
"""

from __future__ import annotations

import contextlib
import enum
import os
import re
import shutil
import stat
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import filelock

from .errors import ArtifactNotFound, NameInvalid, PhaseOrderViolation, PipelineLocked

CACHE_DIRNAME = ".hermes"
_NAME_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.-]{0,127}$")


class Phase(str, enum.Enum):
    HARVEST = "harvest"
    PROCESS = "process"
    CURATE = "curate"
    DEPOSIT = "deposit"
    POSTPROCESS = "postprocess"

    def __str__(self):
        return self.value

    @property
    def index(self):
        return list(Phase).index(self)

    @property
    def requires(self):
        """The phase whose marker must exist before this one may run."""
        return _REQUIRES[self]

    @property
    def downstream(self):
        return list(Phase)[self.index + 1:]


# curate is optional: deposit only needs a processed record
_REQUIRES = {
    Phase.HARVEST: None,
    Phase.PROCESS: Phase.HARVEST,
    Phase.CURATE: Phase.PROCESS,
    Phase.DEPOSIT: Phase.PROCESS,
    Phase.POSTPROCESS: Phase.DEPOSIT,
}


def _check_name(name):
    if not isinstance(name, str) or not _NAME_RE.match(name) or ".." in name:
        raise NameInvalid(f"invalid artifact name {name!r}")
    return name


def atomic_write(path, data):
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with contextlib.suppress(FileNotFoundError):
            os.chmod(tmp, stat.S_IMODE(path.stat().st_mode))
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


class CacheStore:
    def __init__(self, working_dir="."):
        self.working_dir = Path(working_dir)
        self.root = self.working_dir / CACHE_DIRNAME

    def phase_dir(self, phase, create=False):
        path = self.root / Phase(phase).value
        if create:
            path.mkdir(parents=True, exist_ok=True)
        return path

    # -- artifacts ------------------------------------------------------------

    def artifact_path(self, phase, name):
        return self.phase_dir(phase) / f"{_check_name(name)}.json"

    def store_artifact(self, phase, name, data):
        path = self.artifact_path(phase, name)
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write(path, bytes(data))
        return path

    def load_artifact(self, phase, name):
        path = self.artifact_path(phase, name)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise ArtifactNotFound(f"no {Phase(phase).value} artifact named {name!r}") from None

    def has_artifact(self, phase, name):
        return self.artifact_path(phase, name).is_file()

    def artifacts(self, phase):
        path = self.phase_dir(phase)
        if not path.is_dir():
            return []
        return sorted(p.stem for p in path.glob("*.json"))

    def clear_artifacts(self, phase):
        for name in self.artifacts(phase):
            self.artifact_path(phase, name).unlink()

    # -- markers ----------------------------------------------------------------

    def marker_path(self, phase):
        phase = Phase(phase)
        return self.phase_dir(phase) / f"{phase.value}.marker"

    def has_marker(self, phase):
        return self.marker_path(phase).is_file()

    def marker_time(self, phase):
        path = self.marker_path(phase)
        if not path.is_file():
            return None
        return datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc)

    def write_marker(self, phase):
        path = self.marker_path(phase)
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write(path, b"")

    def remove_marker(self, phase):
        with contextlib.suppress(FileNotFoundError):
            self.marker_path(phase).unlink()

    def invalidate_from(self, phase):
        """Drop the markers of ``phase`` and of every later phase."""
        phase = Phase(phase)
        for later in [phase, *phase.downstream]:
            self.remove_marker(later)

    def check_order(self, phase):
        required = Phase(phase).requires
        if required is not None and not self.has_marker(required):
            raise PhaseOrderViolation(Phase(phase), required)

    # -- exclusion ----------------------------------------------------------------

    @contextlib.contextmanager
    def lock(self):
        self.root.mkdir(parents=True, exist_ok=True)
        lock = filelock.FileLock(str(self.root / "lock"), timeout=0)
        try:
            lock.acquire()
        except filelock.Timeout:
            raise PipelineLocked(
                f"another hermes run holds {self.root / 'lock'}; "
                "only one pipeline may run per working directory"
            ) from None
        try:
            yield self
        finally:
            lock.release()


def clean(working_dir="."):
    """Remove the cache directory; missing caches are fine."""
    root = Path(working_dir) / CACHE_DIRNAME
    try:
        shutil.rmtree(root)
    except FileNotFoundError:
        pass
