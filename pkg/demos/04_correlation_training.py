"""
Training against rank correlation, not absolute error
=====================================================

Perceptual scores only carry ordinal meaning across a batch, so the
loss normalizes predictions and targets and penalizes correlation
misalignment.  Cross-validation folds group by audio clip: a clip
heard during training never reappears at test time under a different
generation method.
"""

import tempfile
from pathlib import Path

import torch

from gesturebench.features import EncoderConfig
from gesturebench.model import plcc_loss
from gesturebench.subjective import aggregate_ratings
from gesturebench.synth import SynthConfig, generate_dataset, generate_ratings
from gesturebench.training import TrainConfig, lr_schedule, make_folds, train_fold

# the loss is invariant to affine rescaling of the predictions
p = torch.tensor([0.2, 0.5, 0.9, 0.4])
t = torch.tensor([10.0, 30.0, 80.0, 20.0])
print("loss(p, t)          =", float(plcc_loss(p, t)))
print("loss(5*p + 3, t)    =", float(plcc_loss(5.0 * p + 3.0, t)))
print("loss on anti-ranking=", float(plcc_loss(-p, t)))

# -- a small but real run -------------------------------------------------------
out = Path(tempfile.mkdtemp(prefix="gesturebench_demo_"))
synth = SynthConfig(n_audio=8, seed=5, frame_size=32, write_container=False)
manifest = generate_dataset(synth, out)
aggregates = aggregate_ratings(generate_ratings(manifest, synth)).aggregates

config = TrainConfig(
    epochs=4,
    k_folds=2,
    seed=0,
    lr_peak=1e-3,
    encoder=EncoderConfig(C=16, frame_size=32, vision_window=(1, 2, 2), fusion_hidden=16),
)

# warmup then linear decay; the peak sits at the end of the warmup leg
total = config.epochs * 5
points = [0, total // 10, total // 2, total]
print("\nlr schedule:", {s: round(lr_schedule(s, total, config), 6) for s in points})

folds = make_folds(manifest, config.k_folds, config.seed)
fold = folds[0]
print(f"\nfold 0: {len(fold.train_sample_ids)} train / {len(fold.test_sample_ids)} test samples")

history = train_fold(fold, config, manifest, aggregates, out, out_dir=out / "run")
print("epoch losses:", [round(v, 4) for v in history.epoch_losses])
for dim, metrics in history.metrics.per_dimension.items():
    print(f"{dim:>12}: " + "  ".join(f"{k}={v:.3f}" for k, v in metrics.items()))
print(f"checkpoint: {history.checkpoint_path}")
