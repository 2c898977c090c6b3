"""Training loop, warmup/decay schedule, and grouped k-fold harness.

Folds partition distinct audio ids, not samples: every rendition of an
audio clip (all source methods) lands on the same side of a split, so a
clip heard during training never reappears under another method at test
time.  Each fold trains the full scorer with the correlation-aligned
loss and reports the four evaluation metrics on its held-out samples.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import ConfigError, ContractError, DatasetManifest, ValidationError, load_motion
from .features import EncoderConfig, audio_to_logmel, sample_frames
from .metrics import MetricReport
from .metrics import evaluate as evaluate_metrics
from .model import GestureScorer, total_loss
from .subjective import AggregateRecord


@dataclass
class TrainConfig:
    lr_peak: float = 1e-4
    batch_size: int = 10
    epochs: int = 20
    warmup_fraction: float = 0.1
    seed: int = 0
    k_folds: int = 5
    device: str = "cpu"
    loss: str = "plcc"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ConfigError(f"warmup_fraction must be in (0, 1), got {self.warmup_fraction}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.k_folds < 2:
            raise ConfigError(f"k_folds must be >= 2, got {self.k_folds}")
        if self.lr_peak <= 0:
            raise ConfigError(f"lr_peak must be > 0, got {self.lr_peak}")
        self.encoder.validate()


@dataclass
class FoldSplit:
    fold_index: int
    train_sample_ids: list[str]
    test_sample_ids: list[str]

    def validate(self, manifest: DatasetManifest) -> None:
        train, test = set(self.train_sample_ids), set(self.test_sample_ids)
        if train & test:
            raise ValidationError(f"fold {self.fold_index}: train and test overlap")
        audio_of = {s.sample_id: s.audio.id for s in manifest.samples}
        train_audio = {audio_of[i] for i in train}
        test_audio = {audio_of[i] for i in test}
        if train_audio & test_audio:
            raise ValidationError(
                f"fold {self.fold_index}: audio ids {sorted(train_audio & test_audio)[:3]} "
                "appear on both sides of the split"
            )


@dataclass
class RunHistory:
    fold_index: int
    epoch_losses: list[float]
    metrics: MetricReport
    checkpoint_path: str | None = None

    def validate(self, epochs: int) -> None:
        if len(self.epoch_losses) != epochs:
            raise ValidationError(
                f"history has {len(self.epoch_losses)} epoch losses, expected {epochs}"
            )


def _rng(seed: int, *tokens) -> np.random.Generator:
    digest = hashlib.blake2s("\x1f".join(str(t) for t in tokens).encode()).digest()
    return np.random.default_rng([seed, *np.frombuffer(digest, dtype=np.uint32).tolist()])


def make_folds(manifest: DatasetManifest, k: int, seed: int) -> list[FoldSplit]:
    """Shuffle distinct audio ids and partition them into k near-equal folds."""
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    audio_ids = manifest.audio_ids()
    if len(audio_ids) < k:
        raise ValidationError(f"need at least {k} distinct audio ids, got {len(audio_ids)}")
    order = list(_rng(seed, "folds").permutation(audio_ids))
    groups = np.array_split(order, k)
    by_audio: dict[str, list[str]] = {}
    for s in manifest.samples:
        by_audio.setdefault(s.audio.id, []).append(s.sample_id)
    folds = []
    for i, group in enumerate(groups):
        test_audio = set(group.tolist())
        test = [sid for a in audio_ids if a in test_audio for sid in by_audio[a]]
        train = [sid for a in audio_ids if a not in test_audio for sid in by_audio[a]]
        fold = FoldSplit(fold_index=i, train_sample_ids=train, test_sample_ids=test)
        fold.validate(manifest)
        folds.append(fold)
    return folds


def lr_schedule(step: int, total_steps: int, config: TrainConfig) -> float:
    """Linear ramp to lr_peak over the warmup steps, then linear decay to 0."""
    if not 0 <= step <= total_steps:
        raise ContractError(f"step {step} outside [0, {total_steps}]")
    warmup = config.warmup_fraction * total_steps
    if step <= warmup:
        return config.lr_peak * step / warmup if warmup > 0 else config.lr_peak
    return config.lr_peak * (total_steps - step) / (total_steps - warmup)


# -- input preparation ---------------------------------------------------------


class TensorCache:
    """Per-sample model inputs, decoded once and kept in memory.

    Audio spectrograms are cached per file, so the clips shared by
    several methods are decoded a single time.
    """

    def __init__(self, manifest: DatasetManifest, root: str | Path, encoder: EncoderConfig):
        self.manifest = manifest
        self.by_id = manifest.by_id()
        self.root = Path(root)
        self.encoder = encoder
        self._samples: dict[str, tuple[torch.Tensor, torch.Tensor, torch.Tensor]] = {}
        self._audio: dict[str, torch.Tensor] = {}

    def get(self, sample_id: str) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        if sample_id not in self._samples:
            s = self.by_id[sample_id]
            if s.audio.path not in self._audio:
                spect = audio_to_logmel(self.root / s.audio.path, self.encoder)
                self._audio[s.audio.path] = torch.from_numpy(spect).float()
            frames, _ = sample_frames(self.root / s.video_path, self.encoder.n_frames)
            motion = load_motion(self.root / s.motion_path).frames
            self._samples[sample_id] = (
                torch.from_numpy(frames).float(),
                self._audio[s.audio.path],
                torch.from_numpy(motion).float(),
            )
        return self._samples[sample_id]

    def batch(self, sample_ids: list[str]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        frames, spects, motions = zip(*(self.get(i) for i in sample_ids))
        return torch.stack(frames), torch.stack(spects), torch.stack(motions)


def _target_table(
    aggregates: list[AggregateRecord], sample_ids: list[str], what: str
) -> dict[str, tuple[float, float]]:
    table = {a.sample_id: (a.mos_quality, a.mos_consistency) for a in aggregates}
    missing = [i for i in sample_ids if i not in table]
    if missing:
        raise ValidationError(f"aggregates do not cover {what} sample {missing[0]!r}")
    return table


# -- training ----------------------------------------------------------------------


def predict_scores(
    model: GestureScorer, cache: TensorCache, sample_ids: list[str], batch_size: int
) -> dict[str, tuple[float, float]]:
    """Forward every sample in eval mode; returns (quality, consistency) pairs."""
    model.eval()
    out: dict[str, tuple[float, float]] = {}
    with torch.no_grad():
        for lo in range(0, len(sample_ids), batch_size):
            ids = sample_ids[lo : lo + batch_size]
            scores = model(*cache.batch(ids))
            for sid, row in zip(ids, scores):
                out[sid] = (float(row[0]), float(row[1]))
    return out


def train_fold(
    fold: FoldSplit,
    config: TrainConfig,
    manifest: DatasetManifest,
    aggregates: list[AggregateRecord],
    root: str | Path,
    out_dir: str | Path | None = None,
    cache: TensorCache | None = None,
) -> RunHistory:
    """Optimize the scorer on the fold's train split, evaluate on its test split."""
    config.validate()
    fold.validate(manifest)
    targets = _target_table(aggregates, fold.train_sample_ids, "training")
    _target_table(aggregates, fold.test_sample_ids, "test")
    if cache is None:
        cache = TensorCache(manifest, root, config.encoder)

    torch.manual_seed(config.seed * 1000 + fold.fold_index)
    model = GestureScorer(config.encoder).to(config.device)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr_peak)

    train_ids = list(fold.train_sample_ids)
    steps_per_epoch = max(len(train_ids) // config.batch_size, 0)
    tail = len(train_ids) - steps_per_epoch * config.batch_size
    if tail >= 2:
        steps_per_epoch += 1  # keep the tail batch unless its loss is undefined
    if steps_per_epoch == 0:
        raise ValidationError(
            f"fold {fold.fold_index}: {len(train_ids)} training samples cannot form a batch of >= 2"
        )
    total_steps = config.epochs * steps_per_epoch

    epoch_losses: list[float] = []
    step = 0
    for epoch in range(config.epochs):
        model.train()
        order = list(_rng(config.seed, "batches", fold.fold_index, epoch).permutation(train_ids))
        batch_losses = []
        for b in range(steps_per_epoch):
            ids = order[b * config.batch_size : (b + 1) * config.batch_size]
            if len(ids) < 2:
                continue
            step += 1
            lr = lr_schedule(step, total_steps, config)
            for group in optimizer.param_groups:
                group["lr"] = lr
            frames, spects, motions = cache.batch(ids)
            pred = model(frames, spects, motions)
            target = torch.tensor([targets[i] for i in ids], dtype=pred.dtype)
            loss = total_loss(pred, target, config.loss)
            if not torch.isfinite(loss):
                raise ContractError(
                    f"non-finite loss at step {step} (epoch {epoch}), batch {ids}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            batch_losses.append(float(loss.detach()))
        epoch_losses.append(float(np.mean(batch_losses)))

    predictions = predict_scores(model, cache, fold.test_sample_ids, config.batch_size)
    report = evaluate_metrics(
        predictions, [a for a in aggregates if a.sample_id in set(fold.test_sample_ids)]
    )

    checkpoint_path = None
    if out_dir is not None:
        fold_dir = Path(out_dir) / f"fold{fold.fold_index}"
        fold_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_path = str(fold_dir / "checkpoint.pt")
        save_scorer(model, checkpoint_path)
        report.save(fold_dir / "metrics.json")
        history_doc = {
            "fold_index": fold.fold_index,
            "epoch_losses": epoch_losses,
            "checkpoint": checkpoint_path,
            "n_train": len(train_ids),
            "n_test": len(fold.test_sample_ids),
        }
        (fold_dir / "history.json").write_text(json.dumps(history_doc, indent=1) + "\n")

    history = RunHistory(
        fold_index=fold.fold_index,
        epoch_losses=epoch_losses,
        metrics=report,
        checkpoint_path=checkpoint_path,
    )
    history.validate(config.epochs)
    return history


def save_scorer(model: GestureScorer, path: str | Path) -> None:
    from .features import save_checkpoint

    save_checkpoint(
        {"vision": model.vision, "audio": model.audio, "motion": model.motion, "head": model.head},
        path,
    )


def load_scorer(config: EncoderConfig, path: str | Path) -> GestureScorer:
    from .core import FormatError
    from .features import load_checkpoint

    model = GestureScorer(config)
    for prefix, module in (
        ("vision", model.vision),
        ("audio", model.audio),
        ("motion", model.motion),
        ("head", model.head),
    ):
        report = load_checkpoint(module, path, prefix=prefix)
        if not report.clean:
            raise FormatError(f"checkpoint {path} does not match the {prefix} module: {report}")
    return model


@dataclass
class CrossValidationResult:
    histories: list[RunHistory]
    summary: dict[str, dict[str, dict[str, float]]]  # dimension -> metric -> mean/std


def summarize_folds(reports: list[MetricReport]) -> dict[str, dict[str, dict[str, float]]]:
    summary: dict[str, dict[str, dict[str, float]]] = {}
    for dim in reports[0].per_dimension:
        summary[dim] = {}
        for metric in reports[0].per_dimension[dim]:
            values = np.array([r.per_dimension[dim][metric] for r in reports])
            summary[dim][metric] = {
                "mean": float(values.mean()),
                "std": float(values.std()),
            }
    return summary


def cross_validate(
    config: TrainConfig,
    manifest: DatasetManifest,
    aggregates: list[AggregateRecord],
    root: str | Path,
    out_dir: str | Path | None = None,
) -> CrossValidationResult:
    """Run train_fold over make_folds(manifest, k_folds) and summarize."""
    config.validate()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(config_to_json(config), indent=1) + "\n")
    folds = make_folds(manifest, config.k_folds, config.seed)
    cache = TensorCache(manifest, root, config.encoder)
    histories = [
        train_fold(fold, config, manifest, aggregates, root, out_dir=out_dir, cache=cache)
        for fold in folds
    ]
    summary = summarize_folds([h.metrics for h in histories])
    if out_dir is not None:
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return CrossValidationResult(histories=histories, summary=summary)


def config_to_json(config: TrainConfig) -> dict:
    doc = asdict(config)
    doc["encoder"]["vision_window"] = list(config.encoder.vision_window)
    doc["encoder"]["audio_patch"] = list(config.encoder.audio_patch)
    return doc
