"""
Analytics over aggregated ratings
=================================

Two tables close the loop on a rating campaign: per-method score
ranges (does the known-good method actually score highest?) and
per-(method, emotion) congruence accuracy (how often did the majority
call the gesture emotionally matched to the audio?).  On synthetic
data we can compare both against the planted construction.  Majority
votes are binomial draws, so the accuracy estimate needs real support;
800 audio clips give 100 samples per (method, emotion) cell.
"""

import tempfile
from pathlib import Path

import numpy as np

from gesturebench.core import SourceMethod
from gesturebench.subjective import (
    aggregate_ratings,
    emotion_congruence_accuracy,
    score_range_report,
)
from gesturebench.synth import SynthConfig, generate_dataset, generate_ratings

root = Path(tempfile.mkdtemp(prefix="gesturebench_demo_"))
# manifest-only generation: analytics never touch the media files
config = SynthConfig(n_audio=800, seed=3)
manifest = generate_dataset(config, root, write_media=False)
result = aggregate_ratings(generate_ratings(manifest, config))
print(f"{len(result.aggregates)} aggregates, excluded raters: {result.excluded_union or 'none'}")

# -- score ranges per method -----------------------------------------------------
ranges = score_range_report(result.aggregates, manifest)
print("\nquality MOS by method          min    mean     max")
ordered = sorted(ranges, key=lambda m: -ranges[m]["quality"].mean)
for method in ordered:
    r = ranges[method]["quality"]
    print(f"{method.value:>24}  {r.minimum:6.2f}  {r.mean:6.2f}  {r.maximum:6.2f}")

# the reference motion is planted at the top of the quality scale
print("\nhighest mean quality:", ordered[0].value)

# -- congruence accuracy vs the planted rates ------------------------------------
table = emotion_congruence_accuracy(result.aggregates, manifest)
rates = config.congruence_rates
gt_rows = sorted(
    (k for k in table.accuracy if k[0] is SourceMethod.GROUND_TRUTH),
    key=lambda k: k[1].value,
)
print("\nground truth rows            accuracy  planted  support")
for method, emotion in gt_rows:
    key = (method, emotion)
    print(
        f"{method.value:>16} {emotion.value:>10}   {table.accuracy[key]:7.3f}"
        f"  {rates[key]:7.3f}  {table.support[key]:7d}"
    )

errors = np.array([abs(table.accuracy[k] - rates[k]) for k in table.accuracy])
support = min(table.support.values())
print(f"\nall {len(errors)} cells at support {support}:")
print(f"  mean |accuracy - planted rate| = {errors.mean():.4f}")
print(f"  max  |accuracy - planted rate| = {errors.max():.4f}")
