"""Command-line entry point: ``subheat predict|estimate|verify``.

Exit codes:
    0  success (verify: every selected suite passed)
    1  verify: at least one suite failed
    2  bad configuration or argument
    3  unsupported regime/domain combination
    4  sampler runaway
    70 unexpected internal error (traceback with -vv)
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click
from rich.console import Console

from subheat import __version__
from subheat.commands.estimate import cmd_estimate
from subheat.commands.predict import cmd_predict
from subheat.commands.verify import cmd_verify
from subheat.config import RunConfig, build_config
from subheat.errors import SubheatError
from subheat.log import configure

logger = logging.getLogger(__name__)

EXIT_SUITE_FAILED = 1
EXIT_INTERNAL = 70


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("wrote %s", out)
    else:
        click.echo(text, nl=False)


def run_options(func: Callable) -> Callable:
    """Options shared by every subcommand; all default to None so unset flags defer to the config file."""
    options = [
        click.option("--exponent", help="stable:<b>, tempered:<b>,<theta> or mixed:<b1>*<w1>+..."),
        click.option("--domain", help="interval:<a>,<b> or disk:<R>"),
        click.option("--time-change", "time_change", type=click.Choice(["sub", "inv"]), help="subordinator or inverse"),
        click.option("--t", "t", type=float, help="single time (overrides --t-ladder)"),
        click.option("--t-ladder", "t_ladder", help="comma-separated, strictly decreasing times"),
        click.option("--paths", type=int, help="Monte Carlo paths per estimate"),
        click.option("--seed", type=int, help="64-bit seed (default: $SUBHEAT_SEED, else 0)"),
        click.option("--workers", type=int, help="worker processes"),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), help="output format"),
        click.option("--out", type=click.Path(dir_okay=False), help="write output here instead of stdout"),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="key=value file"),
        click.option("--tolerance", multiple=True, help="<suite>=<x>, repeatable"),
        click.option("--grid-step", "grid_step", type=float, help="inverse grid step (default t * 1e-3)"),
        click.option("--refine-bisections", "refine_bisections", type=int, help="halvings of the crossing step"),
        click.option("-v", "--verbose", count=True, help="-v info, -vv debug"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _config(params: Dict[str, Any]) -> RunConfig:
    params = dict(params)
    config_file = params.pop("config_file", None)
    params["format"] = params.pop("fmt", None)
    if not params.get("verbose"):
        params["verbose"] = None
    if not params.get("quick"):
        params["quick"] = None
    return build_config(params, config_file)


def handle_errors(func: Callable) -> Callable:
    """Turn SubheatError into its exit code with a one-line message on stderr.

    Anything else is a bug and exits with EXIT_INTERNAL, never the suite-failure code.
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        configure(kwargs.get("verbose") or 0)
        try:
            func(*args, **kwargs)
        except SubheatError as exc:
            Console(stderr=True).print(f"[red]error:[/red] {exc}", markup=True, highlight=False)
            sys.exit(exc.exit_code)
        except click.ClickException:
            raise
        except Exception as exc:
            logger.debug("unexpected error", exc_info=True)
            Console(stderr=True).print(f"[red]internal error:[/red] {exc!r}", markup=True, highlight=False)
            sys.exit(EXIT_INTERNAL)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="subheat")
def main() -> None:
    """Heat contents of Brownian motion time-changed by subordinators."""


@main.command()
@run_options
@handle_errors
def predict(**params: Any) -> None:
    """Small-time rate and limit constant for the configured exponent and domain."""
    config = _config(params)
    configure(config.verbose)
    _emit(cmd_predict(config), config.out)


@main.command()
@run_options
@handle_errors
def estimate(**params: Any) -> None:
    """Monte Carlo heat contents along the t ladder, with ratios to the predicted rate."""
    config = _config(params)
    configure(config.verbose)
    _emit(cmd_estimate(config), config.out)


@main.command()
@run_options
@click.option("--suite", help="suite name, comma-separated names, or 'all'")
@click.option("--quick", is_flag=True, default=False, help="reduced path counts")
@handle_errors
def verify(**params: Any) -> None:
    """Run acceptance suites; exit 1 if any check fails."""
    config = _config(params)
    configure(config.verbose)
    text, passed = cmd_verify(config, Console(stderr=True))
    _emit(text, config.out)
    if not passed:
        sys.exit(EXIT_SUITE_FAILED)


if __name__ == "__main__":
    main()
