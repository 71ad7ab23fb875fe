"""``subheat verify``: run acceptance suites and summarise pass/fail."""

from __future__ import annotations

import logging
from typing import Any, Dict, List, Optional, Tuple

from rich.console import Console
from rich.table import Table

from subheat.commands import format_number, to_json
from subheat.config import RunConfig
from subheat.suites import SuiteResult, run_suites

logger = logging.getLogger(__name__)


def summary(config: RunConfig, results: List[SuiteResult]) -> Dict[str, Any]:
    return {
        "passed": all(r.passed for r in results),
        "seed": config.seed,
        "quick": config.quick,
        "suites": [r.to_dict() for r in results],
    }


def print_table(results: List[SuiteResult], console: Console) -> None:
    table = Table(title="subheat verify")
    for column in ("suite", "target", "achieved", "tolerance", "result"):
        table.add_column(column)
    for r in results:
        verdict = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, f"{r.target:.6g}", f"{r.achieved:.6g}", format_number(r.tolerance), verdict)
    console.print(table)


def cmd_verify(config: RunConfig, console: Optional[Console] = None) -> Tuple[str, bool]:
    """JSON summary of the selected suites and whether all of them passed."""
    results = run_suites(config)
    if console is not None:
        print_table(results, console)
    payload = summary(config, results)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("%d check(s) failed: %s", len(failed), ", ".join(failed))
    return to_json(payload), payload["passed"]
