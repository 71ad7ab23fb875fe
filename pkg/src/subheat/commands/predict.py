"""``subheat predict``: closed-form small-time rates and constants."""

from __future__ import annotations

from typing import Any, Dict, List

from subheat.asymptotics import predict_regular, predict_spectral
from subheat.commands import render
from subheat.config import RunConfig
from subheat.oracles import Disk

COLUMNS = ("quantity", "theorem_tag", "rate", "constant")


def prediction_rows(config: RunConfig) -> List[Dict[str, Any]]:
    exp, dom, kind = config.exponent_value, config.domain_value, config.kind
    predictions = [predict_spectral(exp, dom, kind)]
    if not isinstance(dom, Disk):
        predictions.append(predict_regular(exp, dom, kind))
    return [
        {"quantity": p.quantity, "theorem_tag": p.theorem_tag, "rate": p.rate.name, "constant": float(p.constant)}
        for p in predictions
    ]


def cmd_predict(config: RunConfig) -> str:
    """Rows of (quantity, theorem_tag, rate, constant); unsupported regimes raise."""
    return render(prediction_rows(config), COLUMNS, config.format)
