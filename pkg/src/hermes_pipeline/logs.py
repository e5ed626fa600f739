"""Logging setup: a visible ``hermes.log`` plus standard output.

Secret values (auth tokens) registered through :func:`register_secret` are
scrubbed from every record before any handler formats it.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

LOG_FILENAME = "hermes.log"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
MASK = "********"

_secrets: set[str] = set()
_installed: list[logging.Handler] = []


def register_secret(value):
    if value and isinstance(value, str) and len(value) >= 4:
        _secrets.add(value)


def scrub(text):
    for secret in sorted(_secrets, key=len, reverse=True):
        text = text.replace(secret, MASK)
    return text


class RedactingFilter(logging.Filter):
    def filter(self, record):
        if _secrets:
            record.msg = scrub(record.getMessage())
            record.args = None
            if record.exc_info and not record.exc_text:
                record.exc_text = scrub(logging.Formatter().formatException(record.exc_info))
            elif record.exc_text:
                record.exc_text = scrub(record.exc_text)
        return True


def configure_logging(working_dir=".", verbosity=0, stream=None):
    """Route ``hermes_pipeline`` logging to ``<working_dir>/hermes.log`` and stdout.

    Returns the log file path, or ``None`` when the file could not be opened.
    Calling it again replaces the handlers installed by the previous call.
    """
    root = logging.getLogger("hermes_pipeline")
    for handler in _installed:
        root.removeHandler(handler)
        handler.close()
    _installed.clear()

    level = logging.DEBUG if verbosity > 0 else logging.INFO
    root.setLevel(logging.DEBUG)
    root.propagate = False
    formatter = logging.Formatter(LOG_FORMAT)
    redactor = RedactingFilter()

    console = logging.StreamHandler(stream if stream is not None else sys.stdout)
    console.setLevel(level)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    console.addFilter(redactor)
    root.addHandler(console)
    _installed.append(console)

    log_path = Path(working_dir) / LOG_FILENAME
    try:
        file_handler = logging.FileHandler(log_path, encoding="utf-8")
    except OSError as exc:
        root.warning("cannot write log file %s (%s); logging to standard output only", log_path, exc)
        return None
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    file_handler.addFilter(redactor)
    root.addHandler(file_handler)
    _installed.append(file_handler)
    return log_path


def shutdown_logging():
    root = logging.getLogger("hermes_pipeline")
    for handler in _installed:
        root.removeHandler(handler)
        handler.close()
    _installed.clear()
    root.propagate = True
