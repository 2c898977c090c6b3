"""Evaluation metrics: SRCC, PLCC, KRCC and RMSE per score dimension.

Rank correlations use the standard tie-aware conventions: average ranks
for Spearman, tau-b for Kendall.  RMSE is computed on the raw MOS scale;
an optional four-parameter logistic remapping of the predictions is
available for comparability with quality-assessment pipelines that fit
one before computing error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import rankdata

from .core import ValidationError

DIMENSIONS = ("quality", "consistency")


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite values")
    return v


def _check_pair(x, y, min_n: int = 2) -> tuple[np.ndarray, np.ndarray]:
    xv, yv = _as_vector(x, "x"), _as_vector(y, "y")
    if xv.shape != yv.shape:
        raise ValidationError(f"length mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    if xv.shape[0] < min_n:
        raise ValidationError(f"need at least {min_n} points, got {xv.shape[0]}")
    return xv, yv


def plcc(x, y) -> float:
    """Pearson product-moment correlation."""
    xv, yv = _check_pair(x, y)
    xc, yc = xv - xv.mean(), yv - yv.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise ValidationError("correlation undefined: zero variance input")
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def srcc(x, y) -> float:
    """Spearman rank-order correlation; ties receive average ranks."""
    xv, yv = _check_pair(x, y)
    return plcc(rankdata(xv), rankdata(yv))


def krcc(x, y) -> float:
    """Tie-adjusted Kendall rank correlation (tau-b)."""
    xv, yv = _check_pair(x, y)
    dx = np.sign(xv[:, None] - xv[None, :])
    dy = np.sign(yv[:, None] - yv[None, :])
    iu = np.triu_indices(len(xv), k=1)
    sx, sy = dx[iu], dy[iu]
    concordant_minus_discordant = float((sx * sy).sum())
    n_x = float((sx != 0).sum())  # pairs not tied in x
    n_y = float((sy != 0).sum())
    if n_x == 0.0 or n_y == 0.0:
        raise ValidationError("tau undefined: all values tied in one input")
    return float(np.clip(concordant_minus_discordant / np.sqrt(n_x * n_y), -1.0, 1.0))


def rmse(x, y) -> float:
    """Root mean squared error, raw scale."""
    xv, yv = _check_pair(x, y, min_n=1)
    return float(np.sqrt(np.mean((xv - yv) ** 2)))


def _logistic4(x, beta1, beta2, beta3, beta4):
    return (beta1 - beta2) / (1.0 + np.exp(-(x - beta3) / np.abs(beta4) + 1e-12)) + beta2


def logistic_rescale(pred, target) -> np.ndarray:
    """Fit a monotone 4-parameter logistic mapping pred -> target scale."""
    pv, tv = _check_pair(pred, target)
    p0 = [float(tv.max()), float(tv.min()), float(pv.mean()), float(pv.std() + 1e-6)]
    try:
        popt, _ = curve_fit(_logistic4, pv, tv, p0=p0, maxfev=20000)
        return _logistic4(pv, *popt)
    except RuntimeError:
        return pv.copy()  # fit did not converge; fall back to raw predictions


@dataclass
class MetricReport:
    """The four metrics for each score dimension of one evaluation run."""

    per_dimension: dict[str, dict[str, float]]
    n: int

    def validate(self) -> None:
        if self.n < 2:
            raise ValidationError(f"metric report needs n >= 2, got {self.n}")
        for dim, vals in self.per_dimension.items():
            for key in ("srcc", "plcc", "krcc"):
                if not -1.0 <= vals[key] <= 1.0:
                    raise ValidationError(f"{dim}.{key} = {vals[key]} outside [-1, 1]")
            if vals["rmse"] < 0:
                raise ValidationError(f"{dim}.rmse = {vals['rmse']} negative")

    def to_json(self) -> dict:
        return {"n": self.n, **{d: dict(v) for d, v in self.per_dimension.items()}}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def from_json(cls, doc: dict) -> "MetricReport":
        per_dim = {d: dict(doc[d]) for d in doc if d != "n"}
        return cls(per_dimension=per_dim, n=int(doc["n"]))


def compute_all(pred, target) -> dict[str, float]:
    return {
        "srcc": srcc(pred, target),
        "plcc": plcc(pred, target),
        "krcc": krcc(pred, target),
        "rmse": rmse(pred, target),
    }


def evaluate(
    predictions: dict[str, tuple[float, float]],
    aggregates,
    use_logistic_rescale: bool = False,
) -> MetricReport:
    """Score (quality, consistency) predictions against aggregated MOS.

    predictions maps sample_id -> (predicted quality, predicted
    consistency); aggregates is a list of subjective.AggregateRecord.
    Every predicted id must have an aggregate.
    """
    mos = {a.sample_id: (a.mos_quality, a.mos_consistency) for a in aggregates}
    missing = [sid for sid in predictions if sid not in mos]
    if missing:
        raise ValidationError(f"no aggregate for predicted sample(s): {sorted(missing)[:5]}")
    ids = sorted(predictions)
    if len(ids) < 2:
        raise ValidationError(f"need at least 2 evaluated samples, got {len(ids)}")

    per_dim: dict[str, dict[str, float]] = {}
    for col, dim in enumerate(DIMENSIONS):
        p = np.array([predictions[i][col] for i in ids], dtype=np.float64)
        t = np.array([mos[i][col] for i in ids], dtype=np.float64)
        p_for_rmse = logistic_rescale(p, t) if use_logistic_rescale else p
        per_dim[dim] = {
            "srcc": srcc(p, t),
            "plcc": plcc(p, t),
            "krcc": krcc(p, t),
            "rmse": rmse(p_for_rmse, t),
        }
    report = MetricReport(per_dimension=per_dim, n=len(ids))
    report.validate()
    return report
