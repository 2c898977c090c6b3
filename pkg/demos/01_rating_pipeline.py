"""
From raw slider ratings to Mean Opinion Scores
==============================================

Every rater uses the 1-100 sliders differently: some compress the top
of the scale, some anchor low.  The aggregation pipeline removes those
private response scales with per-rater Z-score normalization, screens
out raters who disagree with everyone else, and majority-votes the
binary emotion judgment.
"""

import numpy as np

from gesturebench.subjective import (
    RatingRecord,
    aggregate_ratings,
    zscore_normalize,
)

# Z-score normalization maps a rater's raw values onto a shared 0-100
# scale: z = (x - mean) / std, then 100 * (z + 3) / 6, clipped.
raw = np.array([10.0, 20.0, 30.0])
print("raw ratings:       ", raw)
print("normalized:        ", np.round(zscore_normalize(raw), 4))

# the normalized values ignore affine scale differences entirely:
# a rater scoring twice as high with an offset produces the same curve
print("affine transformed:", np.round(zscore_normalize(2.0 * raw + 15.0), 4))

# -- a tiny experiment: 3 honest raters and 1 reversed-scale rater ---------
# two samples, "good" and "bad"; honest raters roughly agree, the fourth
# rater has their scale upside down.
samples = {"good": 80.0, "bad": 25.0}
records = []
stamp = 0.0
for rater, (a, b) in {"r1": (1.0, 0.0), "r2": (0.7, 12.0), "r3": (0.9, 4.0)}.items():
    for sid, score in samples.items():
        stamp += 1.0
        records.append(
            RatingRecord(
                rater_id=rater,
                sample_id=sid,
                quality_raw=a * score + b,
                consistency_raw=a * (score - 5.0) + b,
                emotion_vote=sid == "good",
                timestamp=stamp,
            )
        )
for sid, score in samples.items():
    stamp += 1.0
    records.append(
        RatingRecord(
            rater_id="reversed",
            sample_id=sid,
            quality_raw=101.0 - score,
            consistency_raw=101.0 - score,
            emotion_vote=sid != "good",
            timestamp=stamp,
        )
    )

result = aggregate_ratings(records)
print("\nexcluded raters per dimension:", result.excluded_by_dim)
for agg in result.aggregates:
    print(
        f"{agg.sample_id:>5}: MOS quality {agg.mos_quality:6.2f}  "
        f"consistency {agg.mos_consistency:6.2f}  congruent={agg.esba}  "
        f"raters={agg.n_raters}"
    )

# the reversed rater was dropped by leave-one-out rank screening, so the
# good sample ends up above the bad one on both dimensions.
