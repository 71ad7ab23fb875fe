"""``subheat estimate``: Monte Carlo heat contents along a t ladder."""

from __future__ import annotations

import logging
import math
from typing import Any, Dict, List, Optional

from subheat.asymptotics import RateFunction, predict_regular, predict_spectral
from subheat.commands import render
from subheat.config import RunConfig
from subheat.errors import DomainError, UnsupportedConfiguration
from subheat.estimators import (
    estimate_regular,
    estimate_spectral_disk,
    estimate_spectral_inverse,
    estimate_spectral_subordinate,
)
from subheat.oracles import Disk, Domain
from subheat.samplers import TimeChangeKind
from subheat.streams import Estimate, RandomStream

logger = logging.getLogger(__name__)

COLUMNS = ("t", "quantity", "value", "stderr", "rate_value", "ratio", "n_paths", "seed")
QUANTITIES = ("spectral", "regular")


def quantities_for(dom: Domain) -> tuple:
    return ("spectral",) if isinstance(dom, Disk) else QUANTITIES


def run_estimate(config: RunConfig, quantity: str, t: float, stream: RandomStream) -> Estimate:
    exp, dom, kind = config.exponent_value, config.domain_value, config.kind
    common = dict(grid_step=config.grid_step, refine_bisections=config.refine_bisections)
    if isinstance(dom, Disk):
        return estimate_spectral_disk(exp, dom, t, config.paths, stream, kind, config.workers, **common)
    if quantity == "regular":
        return estimate_regular(exp, dom, t, config.paths, stream, kind, config.workers, **common)
    if kind is TimeChangeKind.SUBORDINATOR:
        return estimate_spectral_subordinate(exp, dom, t, config.paths, stream, config.workers)
    return estimate_spectral_inverse(exp, dom, t, config.paths, stream, config.workers, **common)


def _rate(config: RunConfig, quantity: str) -> Optional[RateFunction]:
    predict = predict_regular if quantity == "regular" else predict_spectral
    try:
        return predict(config.exponent_value, config.domain_value, config.kind).rate
    except UnsupportedConfiguration as exc:
        logger.warning("no rate for %s content: %s", quantity, exc)
        return None


def _rate_value(rate: Optional[RateFunction], t: float) -> float:
    if rate is None:
        return math.nan
    try:
        return float(rate(t))
    except DomainError:
        return math.nan  # rates live on (0, 1)


def estimate_rows(config: RunConfig) -> List[Dict[str, Any]]:
    """One row per (t, quantity); path streams are keyed by ladder position and quantity."""
    names = quantities_for(config.domain_value)
    rates = {q: _rate(config, q) for q in names}
    rows = []
    for i, t in enumerate(config.t_ladder):
        for j, quantity in enumerate(names):
            stream = RandomStream(config.seed, i * len(QUANTITIES) + j)
            est = run_estimate(config, quantity, t, stream)
            rate_value = _rate_value(rates[quantity], t)
            numerator = est.complement if quantity == "spectral" else est.value
            rows.append({
                "t": float(t),
                "quantity": quantity,
                "value": float(est.value),
                "stderr": float(est.stderr),
                "rate_value": rate_value,
                "ratio": numerator / rate_value if rate_value > 0.0 else math.nan,
                "n_paths": int(est.n_paths),
                "seed": int(config.seed),
            })
    return rows


def cmd_estimate(config: RunConfig) -> str:
    return render(estimate_rows(config), COLUMNS, config.format)
