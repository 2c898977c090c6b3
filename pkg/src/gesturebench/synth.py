"""Deterministic synthetic dataset generator with planted ground truth.

Every pipeline stage is testable without the real dataset: the generator
produces procedural audio, motion, and rendered videos whose measurable
properties encode known quality/consistency scores, plus simulated rater
logs that exercise normalization, outlier screening, and majority voting.

Planted structure:

* gesture quality    -- high-frequency motion tremor (and a small postural
  slump) grow as quality drops; smooth motion means high quality
* consistency        -- motion pulses at the audio beat times, pulse
  amplitude proportional to the planted consistency score
* emotion congruence -- a per-sample Bernoulli label with a per-(method,
  emotion) rate, echoed by every rater with fixed fidelity

All randomness is derived from (config.seed, purpose, ids), so any part
of the truth can be recomputed without the media files.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .core import (
    AudioClip,
    DatasetManifest,
    EmotionLabel,
    MotionSequence,
    SampleRecord,
    SourceMethod,
    ValidationError,
    make_sample_id,
    save_manifest,
    save_motion,
)
from .subjective import RatingRecord

EMOTIONS = tuple(EmotionLabel)

# per-method planted score baselines, spread over the scale so method
# ranking is recoverable; ground truth sits at the top
DEFAULT_QUALITY_BASE = {
    SourceMethod.EMAGE: 35.0,
    SourceMethod.MAMBATALK: 45.0,
    SourceMethod.SYNTALKER: 55.0,
    SourceMethod.LOM: 40.0,
    SourceMethod.MOTIONCRAFT: 65.0,
    SourceMethod.GESTURELSM: 50.0,
    SourceMethod.GROUND_TRUTH: 82.0,
}
DEFAULT_CONSISTENCY_BASE = {
    SourceMethod.EMAGE: 42.0,
    SourceMethod.MAMBATALK: 60.0,
    SourceMethod.SYNTALKER: 38.0,
    SourceMethod.LOM: 52.0,
    SourceMethod.MOTIONCRAFT: 47.0,
    SourceMethod.GESTURELSM: 64.0,
    SourceMethod.GROUND_TRUTH: 80.0,
}


def default_congruence_rates() -> dict[tuple[SourceMethod, EmotionLabel], float]:
    """Planted per-(method, emotion) probabilities, spread over [0.15, 0.95]."""
    rates = {}
    for i, method in enumerate(SourceMethod):
        base = 0.9 if method.is_ground_truth else 0.25 + 0.09 * i
        for j, emotion in enumerate(EMOTIONS):
            rates[(method, emotion)] = min(0.95, max(0.15, base + 0.03 * (j - 3.5)))
    return rates


@dataclass
class SynthConfig:
    n_audio: int = 40
    methods: tuple[SourceMethod, ...] = tuple(SourceMethod)
    seed: int = 0
    quality_gap: dict[SourceMethod, float] = field(
        default_factory=lambda: dict(DEFAULT_QUALITY_BASE)
    )
    consistency_gap: dict[SourceMethod, float] = field(
        default_factory=lambda: dict(DEFAULT_CONSISTENCY_BASE)
    )
    congruence_rates: dict[tuple[SourceMethod, EmotionLabel], float] = field(
        default_factory=default_congruence_rates
    )
    raters: int = 18
    rater_noise: float = 6.0
    adversary: bool = False  # inject one reversed-scale rater
    vote_fidelity: float = 0.9  # probability a rater echoes the planted emotion label
    score_spread: float = 12.0  # per-sample uniform jitter around the method base
    duration: float = 10.0
    sample_rate: int = 16000
    motion_fps: float = 15.0
    motion_dim: int = 24
    video_fps: float = 6.0
    frame_size: int = 64
    write_container: bool = True

    def validate(self) -> None:
        if self.n_audio < 8 or self.n_audio % 8 != 0:
            raise ValidationError(
                f"n_audio must be a positive multiple of 8 (equal emotion strata), got {self.n_audio}"
            )
        if not self.methods:
            raise ValidationError("methods must be non-empty")
        for key, rate in self.congruence_rates.items():
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"congruence rate for {key} must be in [0, 1], got {rate}")
        if not 0.0 <= self.vote_fidelity <= 1.0:
            raise ValidationError(f"vote_fidelity must be in [0, 1], got {self.vote_fidelity}")
        if self.raters < 1:
            raise ValidationError(f"raters must be >= 1, got {self.raters}")
        if self.rater_noise < 0:
            raise ValidationError(f"rater_noise must be >= 0, got {self.rater_noise}")
        if self.motion_dim < 8:
            raise ValidationError(f"motion_dim must be >= 8, got {self.motion_dim}")


def _rng(seed: int, *tokens) -> np.random.Generator:
    """Stream seeded by (seed, tokens); stable across platforms and runs."""
    digest = hashlib.blake2s("\x1f".join(str(t) for t in tokens).encode()).digest()
    return np.random.default_rng([seed, *np.frombuffer(digest, dtype=np.uint32).tolist()])


# -- planted truth ---------------------------------------------------------


@dataclass(frozen=True)
class PlantedTruth:
    quality: float
    consistency: float
    congruence_rate: float
    congruent: bool


def audio_meta(config: SynthConfig, index: int) -> tuple[str, EmotionLabel, str]:
    """(audio_id, emotion, speaker) for audio #index; emotions cycle evenly."""
    return f"a{index:04d}", EMOTIONS[index % len(EMOTIONS)], f"spk{index % 4}"


def beat_times(config: SynthConfig, audio_id: str, emotion: EmotionLabel) -> np.ndarray:
    """Beat instants (seconds) shared by the audio clicks and motion pulses."""
    e = EMOTIONS.index(emotion)
    tempo = 1.6 + 0.22 * e  # Hz
    phase = float(_rng(config.seed, "beat", audio_id).uniform(0.0, 1.0 / tempo))
    n = int((config.duration - phase) * tempo) + 1
    times = phase + np.arange(n) / tempo
    return times[times < config.duration]


def planted_truth(config: SynthConfig) -> dict[str, PlantedTruth]:
    """Recompute the full planted truth table from the config alone."""
    config.validate()
    truth: dict[str, PlantedTruth] = {}
    for i in range(config.n_audio):
        audio_id, emotion, _ = audio_meta(config, i)
        for method in config.methods:
            sample_id = make_sample_id(audio_id, method)
            rng = _rng(config.seed, "truth", sample_id)
            s = config.score_spread
            quality = float(np.clip(_method_base(config.quality_gap, method) + rng.uniform(-s, s), 5, 95))
            consistency = float(
                np.clip(_method_base(config.consistency_gap, method) + rng.uniform(-s, s), 5, 95)
            )
            rate = config.congruence_rates.get((method, emotion), 0.5)
            congruent = bool(rng.random() < rate)
            truth[sample_id] = PlantedTruth(quality, consistency, rate, congruent)
    return truth


def _method_base(gap: dict[SourceMethod, float], method: SourceMethod) -> float:
    return float(gap.get(method, 50.0))


# -- media synthesis ----------------------------------------------------------


def render_audio(config: SynthConfig, audio_id: str, emotion: EmotionLabel) -> np.ndarray:
    """Emotion-keyed tone plus clicks at the planted beat times, in [-1, 1]."""
    rng = _rng(config.seed, "audiowave", audio_id)
    n = int(round(config.duration * config.sample_rate))
    t = np.arange(n) / config.sample_rate
    e = EMOTIONS.index(emotion)
    carrier = 170.0 + 28.0 * e
    wave = 0.28 * np.sin(2 * np.pi * carrier * t + 0.4 * np.sin(2 * np.pi * 0.5 * t))
    wave += 0.02 * rng.standard_normal(n)
    click_len = int(0.05 * config.sample_rate)
    envelope = np.exp(-np.arange(click_len) / (0.012 * config.sample_rate))
    click = 0.55 * envelope * np.sin(2 * np.pi * 1000.0 * np.arange(click_len) / config.sample_rate)
    for tb in beat_times(config, audio_id, emotion):
        start = int(round(tb * config.sample_rate))
        stop = min(start + click_len, n)
        wave[start:stop] += click[: stop - start]
    peak = np.max(np.abs(wave))
    if peak > 0.89:
        wave *= 0.89 / peak
    return wave


def render_motion(
    config: SynthConfig, sample_id: str, audio_id: str, emotion: EmotionLabel, truth: PlantedTruth
) -> MotionSequence:
    """Smooth base trajectories + quality-keyed tremor + beat-locked pulses."""
    rng = _rng(config.seed, "motion", sample_id)
    n = int(round(config.duration * config.motion_fps))
    d = config.motion_dim
    t = np.arange(n) / config.motion_fps

    frames = np.zeros((n, d))
    for j in range(d):
        for amp_range in ((0.3, 0.8), (0.08, 0.25)):
            amp = rng.uniform(*amp_range)
            freq = rng.uniform(0.15, 0.9)
            phase = rng.uniform(0, 2 * np.pi)
            frames[:, j] += amp * np.sin(2 * np.pi * freq * t + phase)

    # low quality -> tremor (jerkiness) plus a constant postural slump
    tremor = 0.9 * (1.0 - truth.quality / 100.0)
    frames += tremor * rng.standard_normal((n, d))
    frames[:, d - 2 :] += 1.5 * (1.0 - truth.quality / 100.0)

    # high consistency -> strong pulses at the audio beat times
    pulse_amp = 1.3 * truth.consistency / 100.0
    pulse = np.zeros(n)
    for tb in beat_times(config, audio_id, emotion):
        pulse += np.exp(-((t - tb) ** 2) / (2 * 0.06**2))
    for j in range(6):
        frames[:, j] += pulse_amp * (1 if j % 2 == 0 else -1) * pulse

    return MotionSequence(frames=frames, fps=config.motion_fps)


def _skeleton_points(pose: np.ndarray, size: int) -> list[tuple]:
    """2D stick figure: segments as ((x0,y0),(x1,y1)) plus a head circle."""
    s = size / 64.0
    hip = (32 * s, 46 * s)
    lean = 0.12 * pose[0]
    neck = (hip[0] + 18 * s * math.sin(lean), hip[1] - 18 * s * math.cos(lean))
    head = (neck[0] + 4 * s * math.sin(lean), neck[1] - 4 * s * math.cos(lean))

    def arm(side: float, upper: float, lower: float) -> list[tuple]:
        a1 = math.pi / 2 + side * (0.7 + 0.5 * upper)
        elbow = (neck[0] + side * s + 9 * s * math.sin(a1), neck[1] + 9 * s * math.cos(a1))
        a2 = a1 + side * (0.5 + 0.6 * lower)
        hand = (elbow[0] + 8 * s * math.sin(a2), elbow[1] + 8 * s * math.cos(a2))
        return [(neck, elbow), (elbow, hand)]

    segments = [(hip, neck)]
    segments += arm(-1.0, float(pose[1]), float(pose[2]))
    segments += arm(+1.0, float(pose[3]), float(pose[4]))
    for side in (-1.0, 1.0):
        knee = (hip[0] + side * 4 * s + 1.5 * s * pose[5], hip[1] + 8 * s)
        foot = (knee[0] + side * 2 * s, knee[1] + 8 * s)
        segments += [(hip, knee), (knee, foot)]
    return [("head", head, 4.5 * s)] + [("seg", a, b) for a, b in segments]


def render_frame(pose: np.ndarray, size: int) -> Image.Image:
    img = Image.new("RGB", (size, size), (245, 245, 245))
    draw = ImageDraw.Draw(img)
    for item in _skeleton_points(pose, size):
        if item[0] == "head":
            _, (x, y), r = item
            draw.ellipse([x - r, y - r, x + r, y + r], outline=(20, 20, 20), width=2)
        else:
            _, (x0, y0), (x1, y1) = item
            draw.line([x0, y0, x1, y1], fill=(20, 20, 20), width=2)
    return img


def render_video(config: SynthConfig, motion: MotionSequence, video_dir: Path) -> None:
    """Rasterize the motion as numbered frames plus an fps sidecar."""
    import json

    video_dir.mkdir(parents=True, exist_ok=True)
    n_frames = int(round(config.duration * config.video_fps))
    images = []
    for k in range(n_frames):
        mi = min(int(round(k * config.motion_fps / config.video_fps)), motion.n_frames - 1)
        img = render_frame(motion.frames[mi], config.frame_size)
        img.save(video_dir / f"{k:04d}.png")
        images.append(img)
    (video_dir / "fps.json").write_text(json.dumps({"fps": config.video_fps}) + "\n")
    if config.write_container:
        _write_container(images, config.video_fps, video_dir.parent / "clip.avi")


def _write_container(images: list[Image.Image], fps: float, path: Path) -> None:
    try:
        import cv2
    except ImportError:
        return
    size = images[0].size
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), fps, size)
    if not writer.isOpened():
        return
    for img in images:
        writer.write(np.asarray(img)[:, :, ::-1])
    writer.release()


# -- dataset assembly -----------------------------------------------------------


def generate_manifest(config: SynthConfig) -> DatasetManifest:
    """The manifest alone (paths relative to the dataset root); no I/O."""
    config.validate()
    samples = []
    for i in range(config.n_audio):
        audio_id, emotion, speaker = audio_meta(config, i)
        clip = AudioClip(
            id=audio_id,
            path=f"audio/{audio_id}.wav",
            sample_rate=config.sample_rate,
            duration=config.duration,
            emotion=emotion,
            speaker_id=speaker,
        )
        for method in config.methods:
            sample_id = make_sample_id(audio_id, method)
            samples.append(
                SampleRecord(
                    sample_id=sample_id,
                    method=method,
                    audio=clip,
                    motion_path=f"{sample_id}/motion.txt",
                    video_path=f"{sample_id}/frames",
                )
            )
    manifest = DatasetManifest(version="1", motion_dim=config.motion_dim, samples=samples)
    manifest.validate()
    return manifest


def generate_dataset(
    config: SynthConfig, out_dir: str | Path, write_media: bool = True
) -> DatasetManifest:
    """Write manifest.json (and, unless disabled, all media) under out_dir.

    write_media=False produces only the manifest, for aggregation-scale
    experiments where thousands of samples are rated but never decoded.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = generate_manifest(config)
    truth = planted_truth(config)

    if write_media:
        (out_dir / "audio").mkdir(exist_ok=True)
        rendered_audio: set[str] = set()
        for s in manifest.samples:
            if s.audio.id not in rendered_audio:
                rendered_audio.add(s.audio.id)
                wave = render_audio(config, s.audio.id, s.audio.emotion)
                _write_wav(out_dir / s.audio.path, wave, config.sample_rate)
            motion = render_motion(config, s.sample_id, s.audio.id, s.audio.emotion, truth[s.sample_id])
            (out_dir / s.sample_id).mkdir(exist_ok=True)
            save_motion(motion, out_dir / s.motion_path)
            render_video(config, motion, out_dir / s.video_path)

    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


def _write_wav(path: Path, wave: np.ndarray, rate: int) -> None:
    from scipy.io import wavfile

    wavfile.write(path, rate, (np.clip(wave, -1, 1) * 32767).astype(np.int16))


# -- simulated raters -------------------------------------------------------------

ADVERSARY_ID = "adversary"


def generate_ratings(manifest: DatasetManifest, config: SynthConfig) -> list[RatingRecord]:
    """Simulate the subjective experiment over every sample in the manifest.

    Each honest rater applies a private positive affine response scale to
    (planted score + noise); emotion votes echo the planted per-sample
    label at vote_fidelity.  With config.adversary, one extra rater
    rates on a reversed scale (101 - honest value).
    """
    config.validate()
    truth = planted_truth(config)
    missing = [s.sample_id for s in manifest.samples if s.sample_id not in truth]
    if missing:
        raise ValidationError(
            f"manifest sample {missing[0]!r} has no planted truth; config mismatch"
        )

    rater_ids = [f"rater{k:02d}" for k in range(config.raters)]
    scales = {}
    for rater_id in rater_ids:
        r = _rng(config.seed, "rater", rater_id)
        scales[rater_id] = (float(r.uniform(0.6, 0.95)), float(r.uniform(2.0, 6.0)))
    if config.adversary:
        rater_ids.append(ADVERSARY_ID)
        scales[ADVERSARY_ID] = (1.0, 0.0)

    records = []
    timestamp = 1_700_000_000.0
    for s in manifest.samples:
        t = truth[s.sample_id]
        for rater_id in rater_ids:
            rng = _rng(config.seed, "rating", rater_id, s.sample_id)
            a, b = scales[rater_id]
            noisy_q = t.quality + config.rater_noise * rng.standard_normal()
            noisy_c = t.consistency + config.rater_noise * rng.standard_normal()
            quality = float(np.clip(a * noisy_q + b, 1, 100))
            consistency = float(np.clip(a * noisy_c + b, 1, 100))
            if rater_id == ADVERSARY_ID:
                quality, consistency = 101.0 - quality, 101.0 - consistency
                quality = float(np.clip(quality, 1, 100))
                consistency = float(np.clip(consistency, 1, 100))
            vote = t.congruent if rng.random() < config.vote_fidelity else not t.congruent
            records.append(
                RatingRecord(
                    rater_id=rater_id,
                    sample_id=s.sample_id,
                    quality_raw=quality,
                    consistency_raw=consistency,
                    emotion_vote=vote,
                    timestamp=timestamp,
                )
            )
            timestamp += 1.0
    return records
