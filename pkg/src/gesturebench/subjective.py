"""Raw rater judgments -> per-sample MOS pairs and emotion labels.

Pipeline: per-rater Z-score normalization to the 0-100 range, outlier
subject screening by leave-one-out rank correlation, arithmetic-mean MOS
per sample and dimension, and majority-vote emotion congruence (ESBA).
Analytics on top: per-method score ranges and per-(method, emotion)
congruence accuracy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    DatasetManifest,
    EmotionLabel,
    FormatError,
    SourceMethod,
    ValidationError,
)
from .metrics import srcc

DEFAULT_SLIDER_RANGE = (1.0, 100.0)
DEFAULT_OUTLIER_TAU = 0.2

QUALITY = "quality"
CONSISTENCY = "consistency"
MOS_DIMENSIONS = (QUALITY, CONSISTENCY)


@dataclass(frozen=True)
class RatingRecord:
    """One rater's raw judgment of one sample."""

    rater_id: str
    sample_id: str
    quality_raw: float
    consistency_raw: float
    emotion_vote: bool  # True = congruent
    timestamp: float

    def raw(self, dim: str) -> float:
        if dim == QUALITY:
            return self.quality_raw
        if dim == CONSISTENCY:
            return self.consistency_raw
        raise ValueError(f"unknown dimension {dim!r}")

    def validate(self, slider_range: tuple[float, float] = DEFAULT_SLIDER_RANGE) -> None:
        lo, hi = slider_range
        for dim in MOS_DIMENSIONS:
            v = self.raw(dim)
            if not lo <= v <= hi:
                raise ValidationError(
                    f"rating by {self.rater_id!r} on {self.sample_id!r}: "
                    f"{dim}_raw = {v} outside slider range [{lo}, {hi}]"
                )


@dataclass
class AggregateRecord:
    sample_id: str
    mos_quality: float
    mos_consistency: float
    esba: bool
    n_raters: int
    excluded_raters: list[str] = field(default_factory=list)


@dataclass
class CongruenceTable:
    """Per-(method, emotion) fraction of samples voted emotionally congruent."""

    accuracy: dict[tuple[SourceMethod, EmotionLabel], float]
    support: dict[tuple[SourceMethod, EmotionLabel], int]


def zscore_normalize(values) -> np.ndarray:
    """Standardize one rater's raw scores and map them onto [0, 100].

    z = (r - mean) / population std, then z' = 100 * (z + 3) / 6 clipped
    to [0, 100].  A zero-variance rater maps every rating to 50.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("cannot normalize an empty rating list")
    std = float(v.std())  # population (1/n) convention
    # relative threshold: a constant list whose mean is not exactly
    # representable leaves rounding residue ~1e-16 * |v|, which must not
    # be amplified to full-scale z-scores
    if std <= 1e-12 * max(1.0, float(np.abs(v).max())):
        return np.full_like(v, 50.0)
    z = (v - v.mean()) / std
    return np.clip(100.0 * (z + 3.0) / 6.0, 0.0, 100.0)


def latest_per_rater_sample(records: list[RatingRecord]) -> list[RatingRecord]:
    """Resolve resubmissions: the last record per (rater, sample) wins."""
    latest: dict[tuple[str, str], RatingRecord] = {}
    for r in records:
        latest[(r.rater_id, r.sample_id)] = r
    return list(latest.values())


def normalized_by_rater(records: list[RatingRecord], dim: str) -> dict[str, dict[str, float]]:
    """rater_id -> {sample_id -> normalized score} for one dimension."""
    by_rater: dict[str, list[RatingRecord]] = {}
    for r in latest_per_rater_sample(records):
        by_rater.setdefault(r.rater_id, []).append(r)
    out: dict[str, dict[str, float]] = {}
    for rater, recs in by_rater.items():
        recs = sorted(recs, key=lambda r: r.sample_id)
        normalized = zscore_normalize([r.raw(dim) for r in recs])
        out[rater] = {r.sample_id: float(z) for r, z in zip(recs, normalized)}
    return out


def _loo_correlation(rater: str, table: dict[str, dict[str, float]]) -> float | None:
    """Spearman correlation of one rater against the leave-one-out mean.

    Computed over samples the rater shares with at least one other
    rater; None when undefined (too few common samples or zero rank
    variance on either side).
    """
    own = table[rater]
    common: list[str] = []
    loo_means: list[float] = []
    for sid, value in own.items():
        others = [table[r][sid] for r in table if r != rater and sid in table[r]]
        if others:
            common.append(sid)
            loo_means.append(float(np.mean(others)))
    if len(common) < 2:
        return None
    own_values = [own[sid] for sid in common]
    try:
        return srcc(own_values, loo_means)
    except ValidationError:
        return None  # zero rank variance on one side


def exclude_outlier_subjects(
    records: list[RatingRecord],
    dim: str,
    tau: float = DEFAULT_OUTLIER_TAU,
) -> tuple[list[RatingRecord], list[str]]:
    """Drop raters whose leave-one-out rank correlation falls below tau.

    Screening is simultaneous: every rater is compared against the mean
    of all the others, outliers included.  Raters whose correlation is
    undefined are retained (exclusion requires positive evidence of
    disagreement).
    """
    records = latest_per_rater_sample(records)
    raters = sorted({r.rater_id for r in records})
    if len(raters) < 2:
        return records, []
    table = normalized_by_rater(records, dim)
    excluded = []
    for rater in raters:
        rho = _loo_correlation(rater, table)
        if rho is not None and rho < tau:
            excluded.append(rater)
    if len(excluded) == len(raters):
        raise ConfigError(
            f"outlier screening excluded all {len(raters)} raters; threshold tau={tau} too strict"
        )
    filtered = [r for r in records if r.rater_id not in excluded]
    return filtered, excluded


def compute_mos(table: dict[str, dict[str, float]]) -> dict[str, float]:
    """Per-sample arithmetic mean of surviving raters' normalized scores.

    table maps rater_id -> {sample_id -> normalized score}, i.e. the
    output of normalized_by_rater after outlier filtering.
    """
    per_sample: dict[str, list[float]] = {}
    for scores in table.values():
        for sid, z in scores.items():
            per_sample.setdefault(sid, []).append(z)
    return {sid: float(np.mean(zs)) for sid, zs in per_sample.items()}


def compute_esba(votes: list[bool]) -> bool:
    """Majority vote over binary congruence judgments; ties resolve to False."""
    if not votes:
        raise ValidationError("cannot aggregate an empty vote list")
    congruent = sum(bool(v) for v in votes)
    return congruent > len(votes) - congruent


@dataclass
class AggregationResult:
    aggregates: list[AggregateRecord]
    excluded_by_dim: dict[str, list[str]]
    # sample_ids that lost every rating in some dimension, by dimension
    exceptions: dict[str, list[str]]

    @property
    def excluded_union(self) -> list[str]:
        return sorted(set(self.excluded_by_dim[QUALITY]) | set(self.excluded_by_dim[CONSISTENCY]))


def aggregate_ratings(
    records: list[RatingRecord],
    tau: float = DEFAULT_OUTLIER_TAU,
) -> AggregationResult:
    """Full subjective pipeline: screen outliers, average MOS, vote ESBA.

    Outlier screening runs per MOS dimension; the union of the two
    exclusion sets is applied to the emotion vote and reported on each
    AggregateRecord.  Samples left without ratings in a dimension go to
    the exceptions list instead of receiving a score.
    """
    if not records:
        raise ValidationError("no ratings to aggregate")
    records = latest_per_rater_sample(records)

    filtered: dict[str, list[RatingRecord]] = {}
    excluded: dict[str, list[str]] = {}
    for dim in MOS_DIMENSIONS:
        filtered[dim], excluded[dim] = exclude_outlier_subjects(records, dim, tau=tau)
    excluded_union = set(excluded[QUALITY]) | set(excluded[CONSISTENCY])

    mos = {
        dim: compute_mos(normalized_by_rater(filtered[dim], dim)) for dim in MOS_DIMENSIONS
    }

    esba_records = [r for r in records if r.rater_id not in excluded_union]
    votes: dict[str, list[bool]] = {}
    voters: dict[str, int] = {}
    for r in esba_records:
        votes.setdefault(r.sample_id, []).append(r.emotion_vote)
    for sid, vs in votes.items():
        voters[sid] = len(vs)

    all_samples = sorted({r.sample_id for r in records})
    aggregates: list[AggregateRecord] = []
    exceptions: dict[str, list[str]] = {dim: [] for dim in MOS_DIMENSIONS}
    exceptions["esba"] = []
    for sid in all_samples:
        missing = False
        for dim in MOS_DIMENSIONS:
            if sid not in mos[dim]:
                exceptions[dim].append(sid)
                missing = True
        if sid not in votes:
            exceptions["esba"].append(sid)
            missing = True
        if missing:
            continue
        aggregates.append(
            AggregateRecord(
                sample_id=sid,
                mos_quality=mos[QUALITY][sid],
                mos_consistency=mos[CONSISTENCY][sid],
                esba=compute_esba(votes[sid]),
                n_raters=voters[sid],
                excluded_raters=sorted(excluded_union),
            )
        )
    return AggregationResult(aggregates=aggregates, excluded_by_dim=excluded, exceptions=exceptions)


def emotion_congruence_accuracy(
    aggregates: list[AggregateRecord], manifest: DatasetManifest
) -> CongruenceTable:
    """Fraction of congruent ESBA labels per (method, audio emotion)."""
    by_id = manifest.by_id()
    congruent: dict[tuple[SourceMethod, EmotionLabel], int] = {}
    support: dict[tuple[SourceMethod, EmotionLabel], int] = {}
    for a in aggregates:
        sample = by_id.get(a.sample_id)
        if sample is None:
            raise ValidationError(f"aggregate {a.sample_id!r} does not join to any manifest sample")
        key = (sample.method, sample.audio.emotion)
        support[key] = support.get(key, 0) + 1
        congruent[key] = congruent.get(key, 0) + int(a.esba)
    accuracy = {key: congruent[key] / support[key] for key in support}
    return CongruenceTable(accuracy=accuracy, support=support)


@dataclass
class ScoreRange:
    minimum: float
    mean: float
    maximum: float


def score_range_report(
    aggregates: list[AggregateRecord], manifest: DatasetManifest
) -> dict[SourceMethod, dict[str, ScoreRange]]:
    """Per-method min/mean/max of both MOS dimensions."""
    if not aggregates:
        raise ValidationError("no aggregates to report on")
    by_id = manifest.by_id()
    per_method: dict[SourceMethod, dict[str, list[float]]] = {}
    for a in aggregates:
        sample = by_id.get(a.sample_id)
        if sample is None:
            raise ValidationError(f"aggregate {a.sample_id!r} does not join to any manifest sample")
        slot = per_method.setdefault(sample.method, {QUALITY: [], CONSISTENCY: []})
        slot[QUALITY].append(a.mos_quality)
        slot[CONSISTENCY].append(a.mos_consistency)
    report: dict[SourceMethod, dict[str, ScoreRange]] = {}
    for method, dims in per_method.items():
        report[method] = {
            dim: ScoreRange(float(np.min(v)), float(np.mean(v)), float(np.max(v)))
            for dim, v in dims.items()
        }
    return report


# -- on-disk formats -----------------------------------------------------


def rating_to_json(r: RatingRecord) -> dict:
    return {
        "rater_id": r.rater_id,
        "sample_id": r.sample_id,
        "quality_raw": r.quality_raw,
        "consistency_raw": r.consistency_raw,
        "emotion_vote": r.emotion_vote,
        "timestamp": r.timestamp,
    }


def rating_from_json(obj: dict) -> RatingRecord:
    try:
        return RatingRecord(
            rater_id=obj["rater_id"],
            sample_id=obj["sample_id"],
            quality_raw=float(obj["quality_raw"]),
            consistency_raw=float(obj["consistency_raw"]),
            emotion_vote=bool(obj["emotion_vote"]),
            timestamp=float(obj["timestamp"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad rating record {obj!r}: {e}") from e


def append_ratings(records: list[RatingRecord], path: str | Path) -> None:
    with open(path, "a") as f:
        for r in records:
            f.write(json.dumps(rating_to_json(r)) + "\n")


def read_ratings_log(path: str | Path) -> list[RatingRecord]:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"ratings log not found: {path}")
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(rating_from_json(json.loads(line)))
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {e.msg}") from e
    return records


def write_aggregates_csv(aggregates: list[AggregateRecord], path_or_file) -> None:
    close = False
    if isinstance(path_or_file, (str, Path)):
        f = open(path_or_file, "w", newline="")
        close = True
    else:
        f = path_or_file
    try:
        w = csv.writer(f)
        w.writerow(["sample_id", "mos_quality", "mos_consistency", "esba", "n_raters"])
        for a in aggregates:
            w.writerow(
                [a.sample_id, f"{a.mos_quality:.6f}", f"{a.mos_consistency:.6f}", int(a.esba), a.n_raters]
            )
    finally:
        if close:
            f.close()


def read_aggregates_csv(path: str | Path) -> list[AggregateRecord]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [
        AggregateRecord(
            sample_id=row["sample_id"],
            mos_quality=float(row["mos_quality"]),
            mos_consistency=float(row["mos_consistency"]),
            esba=bool(int(row["esba"])),
            n_raters=int(row["n_raters"]),
        )
        for row in rows
    ]
