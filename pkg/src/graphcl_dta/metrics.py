"""Evaluation metrics: MSE, concordance index and r2m."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

logger = logging.getLogger(__name__)


class MetricError(ValueError):
    pass


@dataclass
class MetricsReport:
    mse: float
    ci: float
    r2m: float
    n: int
    pairs: int  # comparable pairs T
    config_digest: str = ""
    label: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _vectors(p, y):
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise MetricError(f"length mismatch: {p.size} predictions vs {y.size} affinities")
    return p, y


def mse_metric(p, y) -> float:
    p, y = _vectors(p, y)
    if p.size == 0:
        raise MetricError("empty evaluation set")
    d = p - y
    return float(np.mean(d * d))


def concordance_index(p, y, block: int = 2048) -> tuple[float, int]:
    """CI over ordered pairs with y_i > y_j; prediction ties score 0.5.

    Exact O(n^2) enumeration, done in row blocks to bound memory.
    Returns ``(ci, T)`` where T is the number of comparable pairs.
    """
    p, y = _vectors(p, y)
    if p.size < 2:
        raise MetricError("concordance index needs at least 2 samples")
    concordant = ties = total = 0
    for s in range(0, p.size, block):
        yi, pi = y[s:s + block, None], p[s:s + block, None]
        comparable = yi > y[None, :]
        total += int(comparable.sum())
        concordant += int((comparable & (pi > p[None, :])).sum())
        ties += int((comparable & (pi == p[None, :])).sum())
    if total == 0:
        raise MetricError("no comparable pairs")
    return (concordant + 0.5 * ties) / total, total


def r_squared_m(p, y) -> float:
    """r2 * (1 - sqrt(r2 - r0^2)), r0^2 from the least-squares fit through the origin."""
    p, y = _vectors(p, y)
    if p.size < 3:
        raise MetricError("r2m needs at least 3 samples")
    if np.var(p) == 0 or np.var(y) == 0:
        raise MetricError("r2m undefined for zero-variance input")
    r = np.corrcoef(p, y)[0, 1]
    r2 = float(r * r)
    k = np.dot(p, y) / np.dot(p, p)
    resid = y - k * p
    yc = y - y.mean()
    r02 = float(1.0 - np.dot(resid, resid) / np.dot(yc, yc))
    gap = r2 - r02
    if gap < 0:
        logger.info("r2m: r2 - r0^2 = %.3g < 0, clamped to 0", gap)
        gap = 0.0
    return float(r2 * (1.0 - np.sqrt(gap)))


def evaluate_predictions(p, y, config_digest: str = "", label: str = "") -> MetricsReport:
    ci, pairs = concordance_index(p, y)
    return MetricsReport(mse=mse_metric(p, y), ci=ci, r2m=r_squared_m(p, y), n=int(np.size(p)),
                         pairs=pairs, config_digest=config_digest, label=label)
