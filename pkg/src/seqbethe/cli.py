"""Command line interface: ``seqbethe {spectrum,sequential,semiclassical,verify}``.

Exit codes: 0 all gated checks pass, 1 a check failed, 2 configuration
error, 3 numerical failure (non-convergence) in a gated check.
"""
from __future__ import annotations

import json
import logging
import sys

import click

from .config import RunConfig
from .errors import ConfigError
from .experiments import RUNNERS
from .report import EXIT_CONFIG, EXIT_NUMERICAL

log = logging.getLogger("seqbethe")


def _common(f):
    f = click.option("--debug", is_flag=True, help="Per-iteration solver traces.")(f)
    f = click.option("--quiet", is_flag=True, help="Only print the summary line.")(f)
    f = click.option("--seed", type=int, default=None, help="Override the sampling seed.")(f)
    f = click.option("--tol", type=float, default=None,
                     help="Override every small-is-good tolerance.")(f)
    f = click.option("--out", "out", type=click.Path(dir_okay=False), default=None,
                     help="Report path (JSON); CSV tables are written beside it.")(f)
    f = click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
                     help="YAML run configuration.")(f)
    return f


def _setup_logging(quiet, debug):
    level = logging.DEBUG if debug else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def _run(command, config, out, tol, seed, quiet, debug):
    _setup_logging(quiet, debug)
    try:
        cfg = RunConfig.load(config, command) if config else RunConfig(command=command)
        cfg = cfg.with_overrides(tol=tol, seed=seed)
    except ConfigError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        rep = RUNNERS[command](cfg)
    except ConfigError as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    target = out or cfg.out
    doc = rep.write(target) if target else rep.document()
    summ = doc["summary"]
    if not quiet:
        for c in doc["checks"]:
            if c["gated"] and not c["pass"]:
                click.echo(f"FAIL {c['name']} [{c['inputs_digest']}] value={json.dumps(c['value'])} "
                           f"tol={c['tolerance']}")
    click.echo(f"{command}: {summ['n_gated'] - summ['n_failed']}/{summ['n_gated']} gated checks "
               f"passed ({summ['n_informational_failed']} informational failures)"
               + (f"; report {target}" if target else ""))
    sys.exit(summ["exit_code"])


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Bethe-ansatz laboratory: spectra, sequential roots, small-ħ limit."""


@main.command()
@_common
def spectrum(**kw):
    """Bethe eigenvalues vs dense diagonalization, per charge sector."""
    _run("spectrum", **kw)


@main.command()
@_common
def sequential(**kw):
    """Pinch tracking, Z, eigenvalue compatibility and residue checks."""
    _run("sequential", **kw)


@main.command()
@_common
def semiclassical(**kw):
    """Small-ħ expansion, root scaling and classical residue checks."""
    _run("semiclassical", **kw)


@main.command()
@_common
def verify(**kw):
    """Full invariant suite plus the completeness probe."""
    _run("verify", **kw)


__all__ = ["main", "EXIT_NUMERICAL"]
