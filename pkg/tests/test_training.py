"""Fold harness, learning-rate schedule, and training-loop behavior."""

import json

import numpy as np
import pytest
import torch

from gesturebench.core import ContractError, ValidationError
from gesturebench.features import EncoderConfig
from gesturebench.metrics import MetricReport
from gesturebench.subjective import AggregateRecord, aggregate_ratings
from gesturebench.synth import SynthConfig, generate_dataset, generate_manifest, generate_ratings
from gesturebench.training import (
    FoldSplit,
    TensorCache,
    TrainConfig,
    config_to_json,
    cross_validate,
    load_scorer,
    lr_schedule,
    make_folds,
    predict_scores,
    summarize_folds,
    train_fold,
)

TINY_ENCODER = dict(
    C=16, frame_size=32, vision_window=(1, 2, 2), fusion_hidden=16, motion_dim=24
)


@pytest.fixture(scope="module")
def trainset(tmp_path_factory):
    """A small rendered dataset plus aggregated targets, built once."""
    config = SynthConfig(n_audio=8, seed=11, frame_size=32, write_container=False)
    root = tmp_path_factory.mktemp("trainset")
    manifest = generate_dataset(config, root)
    aggregates = aggregate_ratings(generate_ratings(manifest, config)).aggregates
    return manifest, aggregates, root


def tiny_config(**overrides) -> TrainConfig:
    kwargs = dict(epochs=2, k_folds=2, encoder=EncoderConfig(**TINY_ENCODER))
    kwargs.update(overrides)
    config = TrainConfig(**kwargs)
    config.validate()
    return config


# -- folds ------------------------------------------------------------------


def test_folds_partition_samples(small_manifest):
    folds = make_folds(small_manifest, k=4, seed=0)
    assert len(folds) == 4
    all_ids = {s.sample_id for s in small_manifest.samples}
    covered = set()
    for fold in folds:
        test = set(fold.test_sample_ids)
        assert test.isdisjoint(set(fold.train_sample_ids))
        assert test.isdisjoint(covered)
        assert set(fold.train_sample_ids) | test == all_ids
        covered |= test
    assert covered == all_ids


def test_folds_group_by_audio(small_manifest):
    audio_of = {s.sample_id: s.audio.id for s in small_manifest.samples}
    for fold in make_folds(small_manifest, k=4, seed=3):
        train_audio = {audio_of[i] for i in fold.train_sample_ids}
        test_audio = {audio_of[i] for i in fold.test_sample_ids}
        assert not train_audio & test_audio
        # whole renditions move together: every test audio contributes all methods
        per_audio = {}
        for sid in fold.test_sample_ids:
            per_audio.setdefault(audio_of[sid], []).append(sid)
        assert all(len(v) == len(small_manifest.methods()) for v in per_audio.values())


def test_folds_near_equal_audio_groups(small_manifest):
    sizes = []
    audio_of = {s.sample_id: s.audio.id for s in small_manifest.samples}
    for fold in make_folds(small_manifest, k=3, seed=1):
        sizes.append(len({audio_of[i] for i in fold.test_sample_ids}))
    assert max(sizes) - min(sizes) <= 1
    assert sum(sizes) == len(small_manifest.audio_ids())


def test_folds_deterministic_and_seeded(small_manifest):
    a = make_folds(small_manifest, k=4, seed=5)
    b = make_folds(small_manifest, k=4, seed=5)
    assert [f.test_sample_ids for f in a] == [f.test_sample_ids for f in b]
    c = make_folds(small_manifest, k=4, seed=6)
    assert [f.test_sample_ids for f in a] != [f.test_sample_ids for f in c]


def test_folds_validation(small_manifest):
    with pytest.raises(ValidationError, match="k must be >= 2"):
        make_folds(small_manifest, k=1, seed=0)
    with pytest.raises(ValidationError, match="distinct audio ids"):
        make_folds(small_manifest, k=999, seed=0)


def test_fold_split_rejects_leak(small_manifest):
    folds = make_folds(small_manifest, k=2, seed=0)
    leaked = FoldSplit(
        fold_index=0,
        train_sample_ids=folds[0].train_sample_ids + folds[0].test_sample_ids[:1],
        test_sample_ids=folds[0].test_sample_ids,
    )
    with pytest.raises(ValidationError, match="overlap"):
        leaked.validate(small_manifest)
    audio_of = {s.sample_id: s.audio.id for s in small_manifest.samples}
    test_audio = audio_of[folds[0].test_sample_ids[0]]
    sibling = next(
        s.sample_id
        for s in small_manifest.samples
        if s.audio.id == test_audio and s.sample_id not in folds[0].test_sample_ids[:1]
    )
    crossed = FoldSplit(
        fold_index=0,
        train_sample_ids=[sibling],
        test_sample_ids=folds[0].test_sample_ids[:1],
    )
    with pytest.raises(ValidationError, match="both sides"):
        crossed.validate(small_manifest)


# -- learning-rate schedule -----------------------------------------------------


def test_lr_schedule_worked_points():
    config = tiny_config(lr_peak=1e-4, warmup_fraction=0.1)
    total = 100
    assert lr_schedule(0, total, config) == 0.0
    assert lr_schedule(10, total, config) == pytest.approx(1e-4, rel=1e-12)
    assert lr_schedule(55, total, config) == pytest.approx(0.5e-4, rel=1e-12)
    assert lr_schedule(100, total, config) == 0.0
    assert lr_schedule(5, total, config) == pytest.approx(0.5e-4, rel=1e-12)


def test_lr_schedule_shape_properties():
    config = tiny_config(lr_peak=3e-3, warmup_fraction=0.25)
    total = 80
    values = [lr_schedule(s, total, config) for s in range(total + 1)]
    assert max(values) == pytest.approx(3e-3, rel=1e-12)
    warmup = int(0.25 * total)
    assert all(b > a for a, b in zip(values[:warmup], values[1 : warmup + 1]))
    assert all(b < a for a, b in zip(values[warmup:-1], values[warmup + 1 :]))
    steps = np.diff(values)
    assert np.max(np.abs(steps)) < 3e-3 / (0.25 * total) + 1e-12  # no jumps


def test_lr_schedule_rejects_out_of_range():
    config = tiny_config()
    with pytest.raises(ContractError):
        lr_schedule(-1, 10, config)
    with pytest.raises(ContractError):
        lr_schedule(11, 10, config)


def test_train_config_validation():
    from gesturebench.core import ConfigError

    with pytest.raises(ConfigError, match="batch_size"):
        tiny_config(batch_size=1)
    with pytest.raises(ConfigError, match="warmup_fraction"):
        tiny_config(warmup_fraction=0.0)
    with pytest.raises(ConfigError, match="epochs"):
        tiny_config(epochs=0)
    with pytest.raises(ConfigError, match="k_folds"):
        tiny_config(k_folds=1)
    with pytest.raises(ConfigError, match="lr_peak"):
        tiny_config(lr_peak=0.0)


# -- tensor cache ----------------------------------------------------------------


def test_cache_shares_audio_across_methods(trainset):
    manifest, _, root = trainset
    cache = TensorCache(manifest, root, EncoderConfig(**TINY_ENCODER))
    _, audio_a, _ = cache.get("a0000__emage")
    _, audio_b, _ = cache.get("a0000__syntalker")
    assert audio_a is audio_b
    _, audio_c, _ = cache.get("a0001__emage")
    assert audio_c is not audio_a


def test_cache_batch_shapes(trainset):
    manifest, _, root = trainset
    cache = TensorCache(manifest, root, EncoderConfig(**TINY_ENCODER))
    ids = [s.sample_id for s in manifest.samples[:3]]
    frames, spects, motions = cache.batch(ids)
    assert frames.shape == (3, 8, 32, 32, 3)
    assert spects.shape[0] == 3 and spects.shape[1] == 2  # two 5 s segments
    assert motions.shape == (3, 150, 24)


# -- training loop ----------------------------------------------------------------


def test_train_fold_descends_and_is_deterministic(trainset, tmp_path):
    manifest, aggregates, root = trainset
    config = tiny_config(epochs=3, lr_peak=1e-3, seed=2)
    folds = make_folds(manifest, config.k_folds, config.seed)
    cache = TensorCache(manifest, root, config.encoder)

    first = train_fold(folds[0], config, manifest, aggregates, root, out_dir=tmp_path, cache=cache)
    second = train_fold(folds[0], config, manifest, aggregates, root, cache=cache)

    assert first.epoch_losses == second.epoch_losses
    assert len(first.epoch_losses) == config.epochs
    assert all(np.isfinite(v) for v in first.epoch_losses)
    assert first.epoch_losses[-1] < first.epoch_losses[0]
    assert set(first.metrics.per_dimension) == {"quality", "consistency"}
    assert first.metrics.n == len(folds[0].test_sample_ids)

    fold_dir = tmp_path / "fold0"
    assert (fold_dir / "checkpoint.pt").exists()
    assert (fold_dir / "metrics.json").exists()
    history = json.loads((fold_dir / "history.json").read_text())
    assert history["fold_index"] == 0
    assert history["epoch_losses"] == first.epoch_losses
    assert history["n_train"] == len(folds[0].train_sample_ids)


def test_checkpoint_reload_reproduces_predictions(trainset, tmp_path):
    manifest, aggregates, root = trainset
    config = tiny_config(epochs=1, seed=3)
    folds = make_folds(manifest, config.k_folds, config.seed)
    cache = TensorCache(manifest, root, config.encoder)
    history = train_fold(
        folds[0], config, manifest, aggregates, root, out_dir=tmp_path, cache=cache
    )
    reloaded = load_scorer(config.encoder, history.checkpoint_path)
    ids = folds[0].test_sample_ids[:6]
    torch.manual_seed(0)
    model = load_scorer(config.encoder, history.checkpoint_path)
    a = predict_scores(model, cache, ids, config.batch_size)
    b = predict_scores(reloaded, cache, ids, config.batch_size)
    assert a == b
    assert set(a) == set(ids)


def test_missing_aggregate_is_named(trainset):
    manifest, aggregates, root = trainset
    config = tiny_config()
    folds = make_folds(manifest, config.k_folds, config.seed)
    dropped = folds[0].train_sample_ids[0]
    partial = [a for a in aggregates if a.sample_id != dropped]
    with pytest.raises(ValidationError, match=dropped):
        train_fold(folds[0], config, manifest, aggregates=partial, root=root)


def test_too_few_training_samples():
    from gesturebench.core import SourceMethod
    from tests.conftest import build_manifest

    manifest = build_manifest(n_audio=2, methods=[SourceMethod.GROUND_TRUTH])
    sids = [s.sample_id for s in manifest.samples]
    fold = FoldSplit(fold_index=0, train_sample_ids=sids[:1], test_sample_ids=sids[1:])
    aggregates = [
        AggregateRecord(sample_id=sid, mos_quality=50.0, mos_consistency=50.0, esba=True, n_raters=3)
        for sid in sids
    ]
    with pytest.raises(ValidationError, match="cannot form a batch"):
        train_fold(fold, tiny_config(), manifest, aggregates, root=".")


# -- cross-validation --------------------------------------------------------------


def test_summarize_folds_arithmetic():
    def report(q_srcc, c_srcc):
        return MetricReport(
            per_dimension={
                "quality": {"srcc": q_srcc, "plcc": 0.5, "krcc": 0.4, "rmse": 10.0},
                "consistency": {"srcc": c_srcc, "plcc": 0.5, "krcc": 0.4, "rmse": 10.0},
            },
            n=5,
        )

    summary = summarize_folds([report(0.8, 0.6), report(0.6, 0.2)])
    assert summary["quality"]["srcc"] == {"mean": pytest.approx(0.7), "std": pytest.approx(0.1)}
    assert summary["consistency"]["srcc"] == {
        "mean": pytest.approx(0.4),
        "std": pytest.approx(0.2),
    }
    assert summary["quality"]["rmse"] == {"mean": pytest.approx(10.0), "std": pytest.approx(0.0)}


def test_cross_validate_run_directory(trainset, tmp_path):
    manifest, aggregates, root = trainset
    config = tiny_config(epochs=1, seed=4)
    result = cross_validate(config, manifest, aggregates, root, out_dir=tmp_path)
    assert len(result.histories) == config.k_folds
    assert (tmp_path / "config.json").exists()
    assert (tmp_path / "summary.json").exists()
    for i in range(config.k_folds):
        for name in ("checkpoint.pt", "metrics.json", "history.json"):
            assert (tmp_path / f"fold{i}" / name).exists()
    echoed = json.loads((tmp_path / "config.json").read_text())
    assert echoed["epochs"] == 1
    assert echoed["encoder"]["C"] == 16
    saved_summary = json.loads((tmp_path / "summary.json").read_text())
    assert saved_summary == result.summary


def test_config_to_json_serializes_tuples():
    doc = config_to_json(tiny_config())
    assert doc["encoder"]["vision_window"] == [1, 2, 2]
    assert isinstance(doc["encoder"]["audio_patch"], list)
    json.dumps(doc)
