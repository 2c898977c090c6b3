"""Synthetic dataset generator: determinism, composition, planted signals."""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from gesturebench.core import (
    EmotionLabel,
    SourceMethod,
    ValidationError,
    check_media_alignment,
    load_manifest,
    load_motion,
)
from gesturebench.metrics import srcc
from gesturebench.subjective import aggregate_ratings, emotion_congruence_accuracy
from gesturebench.synth import (
    ADVERSARY_ID,
    PlantedTruth,
    SynthConfig,
    beat_times,
    default_congruence_rates,
    generate_dataset,
    generate_manifest,
    generate_ratings,
    planted_truth,
    render_audio,
    render_motion,
)


@pytest.fixture(scope="module")
def media_pair(tmp_path_factory):
    """The same small dataset written twice, for byte-level comparisons."""
    config = SynthConfig(n_audio=8, seed=7)
    dirs = []
    for name in ("run_a", "run_b"):
        out = tmp_path_factory.mktemp(name)
        generate_dataset(config, out)
        dirs.append(out)
    return config, dirs[0], dirs[1]


# -- composition ---------------------------------------------------------------


def test_composition_280_samples():
    manifest = generate_manifest(SynthConfig(n_audio=40))
    assert len(manifest.samples) == 280
    per_stratum = {}
    for s in manifest.samples:
        per_stratum.setdefault((s.method, s.audio.emotion), set()).add(s.audio.id)
    assert len(per_stratum) == 56
    assert all(len(v) == 5 for v in per_stratum.values())


def test_emotion_strata_equal():
    manifest = generate_manifest(SynthConfig(n_audio=16))
    per_emotion = {}
    for s in manifest.samples:
        per_emotion.setdefault(s.audio.emotion, set()).add(s.audio.id)
    assert set(per_emotion) == set(EmotionLabel)
    assert all(len(v) == 2 for v in per_emotion.values())


def test_sample_ids_unique_and_joined():
    manifest = generate_manifest(SynthConfig(n_audio=8))
    ids = [s.sample_id for s in manifest.samples]
    assert len(set(ids)) == len(ids) == 56
    assert all(s.sample_id == f"{s.audio.id}__{s.method.value}" for s in manifest.samples)


def test_n_audio_must_be_multiple_of_8():
    with pytest.raises(ValidationError, match="multiple of 8"):
        SynthConfig(n_audio=7).validate()
    with pytest.raises(ValidationError, match="multiple of 8"):
        SynthConfig(n_audio=0).validate()


def test_config_probability_bounds():
    rates = default_congruence_rates()
    rates[(SourceMethod.EMAGE, EmotionLabel.ANGER)] = 1.5
    with pytest.raises(ValidationError, match="congruence rate"):
        SynthConfig(congruence_rates=rates).validate()
    with pytest.raises(ValidationError, match="vote_fidelity"):
        SynthConfig(vote_fidelity=-0.1).validate()
    with pytest.raises(ValidationError, match="raters"):
        SynthConfig(raters=0).validate()
    with pytest.raises(ValidationError, match="rater_noise"):
        SynthConfig(rater_noise=-1.0).validate()


# -- determinism ------------------------------------------------------------------


def test_dataset_byte_identical_across_runs(media_pair):
    config, a, b = media_pair
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    assert (a / "audio/a0000.wav").read_bytes() == (b / "audio/a0000.wav").read_bytes()
    sid = "a0003__syntalker"
    assert (a / sid / "motion.txt").read_bytes() == (b / sid / "motion.txt").read_bytes()
    assert (a / sid / "frames/0000.png").read_bytes() == (b / sid / "frames/0000.png").read_bytes()


def test_ratings_deterministic():
    config = SynthConfig(n_audio=8, seed=9)
    manifest = generate_manifest(config)
    first = generate_ratings(manifest, config)
    second = generate_ratings(manifest, config)
    assert first == second


def test_seed_changes_truth():
    t0 = planted_truth(SynthConfig(n_audio=8, seed=0))
    t1 = planted_truth(SynthConfig(n_audio=8, seed=1))
    assert set(t0) == set(t1)
    assert any(t0[sid].quality != t1[sid].quality for sid in t0)


# -- planted truth -------------------------------------------------------------


def test_truth_bounds():
    truth = planted_truth(SynthConfig(n_audio=16, seed=2))
    for t in truth.values():
        assert 5.0 <= t.quality <= 95.0
        assert 5.0 <= t.consistency <= 95.0
        assert 0.0 <= t.congruence_rate <= 1.0
        assert isinstance(t.congruent, bool)


def test_quality_gap_zero_gives_identical_method_distributions():
    gap = {m: 50.0 for m in SourceMethod}
    truth = planted_truth(SynthConfig(n_audio=40, seed=3, quality_gap=gap))
    by_method = {}
    for sid, t in truth.items():
        by_method.setdefault(sid.split("__")[1], []).append(t.quality)
    means = {m: float(np.mean(v)) for m, v in by_method.items()}
    spread = SynthConfig().score_spread
    assert all(abs(v - 50.0) < 2.5 for v in means.values())
    assert all(50.0 - spread <= q <= 50.0 + spread for qs in by_method.values() for q in qs)


def test_default_rates_cover_all_strata():
    rates = default_congruence_rates()
    assert len(rates) == 56
    assert all(0.15 <= r <= 0.95 for r in rates.values())
    by_method = {}
    for (m, _), r in rates.items():
        by_method.setdefault(m, []).append(r)
    means = {m: float(np.mean(v)) for m, v in by_method.items()}
    gt_mean = means.pop(SourceMethod.GROUND_TRUTH)
    assert gt_mean > max(means.values())


# -- media artifacts ------------------------------------------------------------


def test_beat_times_grid():
    config = SynthConfig(n_audio=8, seed=7)
    beats = beat_times(config, "a0000", EmotionLabel.NEUTRAL)
    assert beats[0] >= 0 and beats[-1] < config.duration
    gaps = np.diff(beats)
    assert np.allclose(gaps, gaps[0], atol=1e-9)
    faster = beat_times(config, "a0000", EmotionLabel.DISGUST)
    assert np.diff(faster)[0] < gaps[0]


def test_audio_clicks_sit_on_beats():
    config = SynthConfig(n_audio=8, seed=7)
    wave = render_audio(config, "a0000", EmotionLabel.NEUTRAL)
    assert wave.shape == (160000,)
    assert np.max(np.abs(wave)) <= 0.89 + 1e-9
    beats = beat_times(config, "a0000", EmotionLabel.NEUTRAL)
    win = int(0.02 * config.sample_rate)

    def rms(t0):
        i = int(t0 * config.sample_rate)
        return float(np.sqrt(np.mean(wave[i : i + win] ** 2)))

    on_beat = [rms(t) for t in beats]
    off_beat = [rms(t) for t in (beats[:-1] + beats[1:]) / 2]
    assert min(on_beat) > max(off_beat)


def test_wav_file_format(media_pair):
    _, root, _ = media_pair
    rate, data = wavfile.read(root / "audio/a0001.wav")
    assert rate == 16000
    assert data.dtype == np.int16
    assert len(data) == 160000
    assert np.abs(data).max() <= int(0.89 * 32767) + 1


def _flat_truth(quality, consistency):
    return PlantedTruth(quality=quality, consistency=consistency, congruence_rate=0.5, congruent=True)


def test_low_quality_motion_is_jerkier():
    config = SynthConfig(n_audio=8, seed=7)
    args = ("a0000__emage", "a0000", EmotionLabel.NEUTRAL)
    low = render_motion(config, *args, _flat_truth(10, 50)).frames
    high = render_motion(config, *args, _flat_truth(90, 50)).frames
    jerk = lambda f: np.mean(np.abs(np.diff(f, axis=0)))
    assert jerk(low) > 2.0 * jerk(high)
    # postural slump: the trailing dims sag as quality drops
    assert low[:, -2:].mean() - high[:, -2:].mean() > 0.8


def test_consistency_adds_beat_locked_pulses():
    config = SynthConfig(n_audio=8, seed=7)
    args = ("a0000__emage", "a0000", EmotionLabel.NEUTRAL)
    weak = render_motion(config, *args, _flat_truth(50, 10)).frames
    strong = render_motion(config, *args, _flat_truth(50, 90)).frames
    diff = strong - weak
    t = np.arange(weak.shape[0]) / config.motion_fps
    template = np.zeros_like(t)
    for tb in beat_times(config, "a0000", EmotionLabel.NEUTRAL):
        template += np.exp(-((t - tb) ** 2) / (2 * 0.06**2))
    assert np.corrcoef(diff[:, 0], template)[0, 1] > 0.999
    assert np.allclose(diff[:, 6:], 0.0)


def test_motion_shape_and_header(media_pair):
    config, root, _ = media_pair
    motion = load_motion(root / "a0002__lom/motion.txt")
    assert motion.frames.shape == (150, 24)
    assert motion.fps == 15.0
    assert np.all(np.isfinite(motion.frames))


def test_video_frames_and_sidecar(media_pair):
    config, root, _ = media_pair
    frames_dir = root / "a0000__emage/frames"
    pngs = sorted(frames_dir.glob("*.png"))
    assert len(pngs) == 60  # 10 s at 6 fps
    sidecar = json.loads((frames_dir / "fps.json").read_text())
    assert sidecar["fps"] == 6.0
    # motion actually drives pixels
    assert pngs[0].read_bytes() != pngs[30].read_bytes()
    assert (root / "a0000__emage/clip.avi").exists()


def test_media_alignment_clean(media_pair):
    _, root, _ = media_pair
    manifest = load_manifest(root / "manifest.json")
    assert check_media_alignment(manifest, root) == []


def test_write_media_false_is_manifest_only(tmp_path):
    config = SynthConfig(n_audio=8, seed=1)
    manifest = generate_dataset(config, tmp_path, write_media=False)
    assert [p.name for p in tmp_path.iterdir()] == ["manifest.json"]
    records = generate_ratings(manifest, config)
    assert len(records) == 56 * config.raters


# -- simulated raters ---------------------------------------------------------


def test_ratings_cover_all_samples_and_raters():
    config = SynthConfig(n_audio=8, seed=0, raters=5)
    manifest = generate_manifest(config)
    records = generate_ratings(manifest, config)
    assert len(records) == 56 * 5
    assert {r.rater_id for r in records} == {f"rater{k:02d}" for k in range(5)}
    assert all(1.0 <= r.quality_raw <= 100.0 for r in records)
    assert all(1.0 <= r.consistency_raw <= 100.0 for r in records)
    stamps = [r.timestamp for r in records]
    assert stamps == sorted(stamps) and len(set(stamps)) == len(stamps)


def test_ratings_reject_foreign_manifest():
    config = SynthConfig(n_audio=8, seed=0)
    manifest = generate_manifest(SynthConfig(n_audio=16, seed=0))
    with pytest.raises(ValidationError, match="no planted truth"):
        generate_ratings(manifest, config)


def test_noiseless_recovery_is_exact():
    config = SynthConfig(n_audio=8, seed=4, rater_noise=0.0)
    manifest = generate_manifest(config)
    truth = planted_truth(config)
    result = aggregate_ratings(generate_ratings(manifest, config))
    ids = [a.sample_id for a in result.aggregates]
    assert srcc([a.mos_quality for a in result.aggregates], [truth[i].quality for i in ids]) == 1.0
    assert (
        srcc([a.mos_consistency for a in result.aggregates], [truth[i].consistency for i in ids])
        == 1.0
    )
    assert result.excluded_union == []


@pytest.mark.parametrize("noise", [6.0, 10.0])
def test_noisy_recovery_srcc(noise):
    config = SynthConfig(n_audio=40, seed=0, rater_noise=noise)
    manifest = generate_manifest(config)
    truth = planted_truth(config)
    aggregates = aggregate_ratings(generate_ratings(manifest, config)).aggregates
    assert len(aggregates) == 280
    ids = [a.sample_id for a in aggregates]
    for dim, attr in (("quality", "mos_quality"), ("consistency", "mos_consistency")):
        got = srcc([getattr(a, attr) for a in aggregates], [getattr(truth[i], dim) for i in ids])
        assert got >= 0.95, f"{dim} SRCC {got} at noise {noise}"


def test_adversary_excluded_exactly():
    config = SynthConfig(n_audio=8, seed=0, adversary=True)
    manifest = generate_manifest(config)
    result = aggregate_ratings(generate_ratings(manifest, config))
    assert result.excluded_by_dim == {"quality": [ADVERSARY_ID], "consistency": [ADVERSARY_ID]}
    assert all(a.n_raters == config.raters for a in result.aggregates)


def test_all_congruent_when_rates_are_one():
    rates = {key: 1.0 for key in default_congruence_rates()}
    config = SynthConfig(n_audio=8, seed=5, congruence_rates=rates, vote_fidelity=1.0)
    manifest = generate_manifest(config)
    assert all(t.congruent for t in planted_truth(config).values())
    aggregates = aggregate_ratings(generate_ratings(manifest, config)).aggregates
    assert all(a.esba for a in aggregates)


def test_congruence_accuracy_tracks_planted_fraction():
    # At stratum support 5 the accuracy matches the fraction actually
    # planted; agreement with the generating rate needs support >= 100
    # before the binomial noise shrinks inside the same bound.
    config = SynthConfig(n_audio=40, seed=1)
    manifest = generate_manifest(config)
    truth = planted_truth(config)
    aggregates = aggregate_ratings(generate_ratings(manifest, config)).aggregates
    table = emotion_congruence_accuracy(aggregates, manifest)
    assert set(table.support.values()) == {5}

    stratum_of = {s.sample_id: (s.method, s.audio.emotion) for s in manifest.samples}
    planted = {}
    for sid, key in stratum_of.items():
        planted.setdefault(key, []).append(truth[sid].congruent)
    for key, accuracy in table.accuracy.items():
        assert abs(accuracy - float(np.mean(planted[key]))) <= 0.15
