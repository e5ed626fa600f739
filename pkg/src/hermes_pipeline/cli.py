"""The ``hermes`` command."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__
from .cache import CacheStore, clean as clean_cache
from .cache import Phase
from .errors import HermesError
from .logs import configure_logging, shutdown_logging
from .pipeline import run_phase

_log = logging.getLogger("hermes_pipeline.cli")

EPILOG = """\b
Exit codes:
  0  success
  1  usage error, or another run holds the working directory lock
  2  configuration error
  3  phase order violation (run the missing phase first)
  4  plugin failure
  5  deposit or network failure

\b
Settings are read from hermes.toml, then from HERMES_* environment variables
(HERMES_DEPOSIT__TARGET sets deposit.target), then from -O key=value options.
"""


def _parse_overrides(ctx, param, values):
    parsed = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise click.BadParameter(f"expected dotted.key=value, got {item!r}", ctx=ctx, param=param)
        parsed[key.strip()] = value
    return parsed


def common_options(func):
    """Options accepted both before and after the sub-command name."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
                     help="Configuration file (default: <working-dir>/hermes.toml)."),
        click.option("--working-dir", type=click.Path(file_okay=False, path_type=Path),
                     help="Directory to run in (default: current directory)."),
        click.option("-v", "--verbose", count=True, help="Log debug output to standard output."),
        click.option("--timeout-seconds", type=click.FloatRange(min=0, min_open=True),
                     help="Network timeout in seconds (default 30)."),
        click.option("-O", "overrides", multiple=True, metavar="KEY=VALUE", callback=_parse_overrides,
                     help="Override a setting, e.g. -O deposit.target=file. Repeatable."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _settings(ctx, config_path, working_dir, verbose, timeout_seconds, overrides):
    base = ctx.find_object(dict) or {}
    return {
        "config_path": config_path or base.get("config_path"),
        "working_dir": working_dir or base.get("working_dir") or Path("."),
        "verbose": verbose + base.get("verbose", 0),
        "timeout": timeout_seconds or base.get("timeout_seconds") or 30.0,
        "overrides": {**base.get("overrides", {}), **overrides},
    }


@click.group(epilog=EPILOG, context_settings={"help_option_names": ["-h", "--help"]})
@common_options
@click.version_option(__version__, prog_name="hermes")
@click.pass_context
def cli(ctx, config_path, working_dir, verbose, timeout_seconds, overrides):
    """Harvest, process, curate, deposit and post-process software metadata.

    Run the phases in order; each phase needs the one before it (curate is
    optional).
    """
    ctx.obj = {
        "config_path": config_path,
        "working_dir": working_dir,
        "verbose": verbose,
        "timeout_seconds": timeout_seconds,
        "overrides": overrides,
    }


@cli.command("help")
@click.pass_context
def help_command(ctx):
    """Show help page and exit."""
    click.echo(ctx.parent.get_help())


@cli.command("clean")
@common_options
@click.pass_context
def clean_command(ctx, **kwargs):
    """Clean up caches from previous hermes runs."""
    opts = _settings(ctx, **kwargs)
    configure_logging(opts["working_dir"], opts["verbose"])
    with CacheStore(opts["working_dir"]).lock():
        clean_cache(opts["working_dir"])
    _log.info("removed cache in %s", opts["working_dir"])


def _phase_command(phase, summary):
    @common_options
    @click.pass_context
    def command(ctx, **kwargs):
        opts = _settings(ctx, **kwargs)
        configure_logging(opts["working_dir"], opts["verbose"])
        run_phase(
            phase,
            opts["working_dir"],
            config_path=opts["config_path"],
            overrides=opts["overrides"],
            timeout=opts["timeout"],
            invocation="cli",
        )

    command.__doc__ = summary
    return cli.command(phase.value)(command)


_phase_command(Phase.HARVEST, "Harvest metadata from the configured sources.")
_phase_command(Phase.PROCESS, "Process the harvested metadata into one record.")
_phase_command(Phase.CURATE, "Curate the processed metadata (copies it unchanged).")
_phase_command(Phase.DEPOSIT, "Deposit the curated metadata to the configured target.")
_phase_command(Phase.POSTPROCESS, "Feed deposit results back into the repository.")


def main(argv=None):
    """Entry point; returns the process exit code."""
    try:
        result = cli.main(args=argv, prog_name="hermes", standalone_mode=False)
        return result if isinstance(result, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except HermesError as exc:
        if not logging.getLogger("hermes_pipeline").handlers:
            click.echo(f"error: {exc}", err=True)
        elif not getattr(exc, "reported", False):
            _log.error("%s", exc)
        return exc.exit_code
    finally:
        shutdown_logging()


if __name__ == "__main__":
    sys.exit(main())
