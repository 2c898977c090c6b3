"""Domain types, dataset manifest and validation shared by all modules.

A dataset is described by a JSON manifest listing one sample per
(audio clip, source method) pair.  Motion sequences live in sidecar
files: a 3-line header (frame count, parameter dimension, fps) followed
by one whitespace-separated row of pose parameters per frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """A file does not parse as the expected on-disk format."""


class ValidationError(ValueError):
    """Parsed data violates a documented invariant."""


class ContractError(ValueError):
    """An in-memory value violates a shape or range contract."""


class MediaError(RuntimeError):
    """A media file cannot be decoded."""


class ConfigError(ValueError):
    """A configuration value is unusable."""


class EmotionLabel(Enum):
    """The eight emotion categories audio clips are recorded with."""

    NEUTRAL = "neutral"
    HAPPINESS = "happiness"
    ANGER = "anger"
    SADNESS = "sadness"
    CONTEMPT = "contempt"
    SURPRISE = "surprise"
    FEAR = "fear"
    DISGUST = "disgust"


class SourceMethod(Enum):
    """The six gesture generators plus the ground-truth marker."""

    EMAGE = "emage"
    MAMBATALK = "mambatalk"
    SYNTALKER = "syntalker"
    LOM = "lom"
    MOTIONCRAFT = "motioncraft"
    GESTURELSM = "gesturelsm"
    GROUND_TRUTH = "ground_truth"

    @property
    def is_ground_truth(self) -> bool:
        return self is SourceMethod.GROUND_TRUTH


GENERATED_METHODS = tuple(m for m in SourceMethod if not m.is_ground_truth)


def make_sample_id(audio_id: str, method: SourceMethod) -> str:
    """Deterministic sample key: ``<audio_id>__<method>``."""
    return f"{audio_id}__{method.value}"


@dataclass(frozen=True)
class AudioClip:
    id: str
    path: str
    sample_rate: int
    duration: float
    emotion: EmotionLabel
    speaker_id: str

    def validate(self) -> None:
        if self.duration <= 0:
            raise ValidationError(f"audio {self.id!r}: duration must be > 0, got {self.duration}")
        if self.sample_rate <= 0:
            raise ValidationError(f"audio {self.id!r}: sample_rate must be > 0, got {self.sample_rate}")


@dataclass
class MotionSequence:
    """Pose-parameter time series, frames shaped [T, D] (rotations in radians)."""

    frames: np.ndarray
    fps: float

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    @property
    def duration(self) -> float:
        return self.n_frames / self.fps

    def validate(self) -> None:
        if self.frames.ndim != 2:
            raise ValidationError(f"motion frames must be 2-D [T, D], got shape {self.frames.shape}")
        if self.n_frames < 1:
            raise ValidationError("motion sequence must contain at least one frame")
        if self.fps <= 0:
            raise ValidationError(f"motion fps must be > 0, got {self.fps}")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError("motion frames contain non-finite values")


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    method: SourceMethod
    audio: AudioClip
    motion_path: str
    video_path: str

    def validate(self) -> None:
        self.audio.validate()
        expected = make_sample_id(self.audio.id, self.method)
        if self.sample_id != expected:
            raise ValidationError(
                f"sample {self.sample_id!r}: id must be {expected!r} (audio id + method)"
            )


@dataclass
class DatasetManifest:
    version: str
    motion_dim: int
    samples: list[SampleRecord] = field(default_factory=list)

    def validate(self) -> None:
        seen_ids: set[str] = set()
        seen_pairs: set[tuple[str, SourceMethod]] = set()
        for s in self.samples:
            s.validate()
            if s.sample_id in seen_ids:
                raise ValidationError(f"duplicate sample_id {s.sample_id!r}")
            seen_ids.add(s.sample_id)
            pair = (s.audio.id, s.method)
            if pair in seen_pairs:
                raise ValidationError(
                    f"sample {s.sample_id!r}: (audio id, method) pair appears more than once"
                )
            seen_pairs.add(pair)

    def by_id(self) -> dict[str, SampleRecord]:
        return {s.sample_id: s for s in self.samples}

    def audio_ids(self) -> list[str]:
        """Distinct audio ids in first-appearance order."""
        out: list[str] = []
        seen: set[str] = set()
        for s in self.samples:
            if s.audio.id not in seen:
                seen.add(s.audio.id)
                out.append(s.audio.id)
        return out

    def methods(self) -> list[SourceMethod]:
        out: list[SourceMethod] = []
        seen: set[SourceMethod] = set()
        for s in self.samples:
            if s.method not in seen:
                seen.add(s.method)
                out.append(s.method)
        return out


def _sample_to_json(s: SampleRecord) -> dict:
    return {
        "sample_id": s.sample_id,
        "method": s.method.value,
        "audio": {
            "id": s.audio.id,
            "path": s.audio.path,
            "sample_rate": s.audio.sample_rate,
            "duration": s.audio.duration,
            "emotion": s.audio.emotion.value,
            "speaker_id": s.audio.speaker_id,
        },
        "motion_path": s.motion_path,
        "video_path": s.video_path,
    }


def _sample_from_json(obj: dict, where: str) -> SampleRecord:
    try:
        a = obj["audio"]
        return SampleRecord(
            sample_id=obj["sample_id"],
            method=SourceMethod(obj["method"]),
            audio=AudioClip(
                id=a["id"],
                path=a["path"],
                sample_rate=int(a["sample_rate"]),
                duration=float(a["duration"]),
                emotion=EmotionLabel(a["emotion"]),
                speaker_id=a["speaker_id"],
            ),
            motion_path=obj["motion_path"],
            video_path=obj["video_path"],
        )
    except KeyError as e:
        raise FormatError(f"{where}: missing field {e.args[0]!r}") from e
    except ValueError as e:
        raise FormatError(f"{where}: {e}") from e


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {
        "version": manifest.version,
        "motion_dim": manifest.motion_dim,
        "samples": [_sample_to_json(s) for s in manifest.samples],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read and fully validate a manifest file.

    Raises FormatError for parse problems (naming the offending field)
    and ValidationError for invariant violations (naming the sample_id).
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    for key in ("version", "motion_dim", "samples"):
        if key not in doc:
            raise FormatError(f"{path}: missing top-level key {key!r}")
    samples = [
        _sample_from_json(obj, f"{path}: samples[{i}]") for i, obj in enumerate(doc["samples"])
    ]
    manifest = DatasetManifest(
        version=str(doc["version"]), motion_dim=int(doc["motion_dim"]), samples=samples
    )
    manifest.validate()
    return manifest


# -- composition checks -------------------------------------------------

DESIGN_AUDIO_PER_EMOTION = 25
DESIGN_METHOD_COUNT = 7


@dataclass
class CompositionReport:
    audio_per_emotion: dict[EmotionLabel, int]
    samples_per_method: dict[SourceMethod, int]
    n_samples: int
    n_audio: int
    flags: list[str]

    @property
    def ok(self) -> bool:
        return not self.flags


def validate_composition(manifest: DatasetManifest) -> CompositionReport:
    """Report per-emotion audio counts and per-method sample counts.

    Flags deviations from the reference design (8 emotions x 25 audio
    clips, 7 source methods); never raises.
    """
    emotion_of_audio: dict[str, EmotionLabel] = {}
    per_method: dict[SourceMethod, int] = {}
    for s in manifest.samples:
        emotion_of_audio[s.audio.id] = s.audio.emotion
        per_method[s.method] = per_method.get(s.method, 0) + 1

    per_emotion = {e: 0 for e in EmotionLabel}
    for emo in emotion_of_audio.values():
        per_emotion[emo] += 1

    flags: list[str] = []
    n_methods = len(per_method)
    if n_methods != DESIGN_METHOD_COUNT:
        flags.append(f"method count {n_methods} != {DESIGN_METHOD_COUNT}")
    for e in EmotionLabel:
        if per_emotion[e] != DESIGN_AUDIO_PER_EMOTION:
            flags.append(
                f"emotion {e.value}: {per_emotion[e]} audio clips != {DESIGN_AUDIO_PER_EMOTION}"
            )
    counts = sorted(set(per_method.values()))
    if len(counts) > 1:
        flags.append(f"uneven samples per method: {counts}")

    return CompositionReport(
        audio_per_emotion=per_emotion,
        samples_per_method=per_method,
        n_samples=len(manifest.samples),
        n_audio=len(emotion_of_audio),
        flags=flags,
    )


# -- motion sequence files ----------------------------------------------


def save_motion(motion: MotionSequence, path: str | Path) -> None:
    """Write the 3-line header (T, D, fps) followed by T rows of D values."""
    motion.validate()
    with open(path, "w") as f:
        f.write(f"{motion.n_frames}\n{motion.dim}\n{motion.fps:g}\n")
        np.savetxt(f, motion.frames, fmt="%.8g")


def load_motion(path: str | Path) -> MotionSequence:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"motion file not found: {path}")
    with open(path) as f:
        try:
            n_frames = int(f.readline())
            dim = int(f.readline())
            fps = float(f.readline())
        except ValueError as e:
            raise FormatError(f"{path}: bad header, expected 3 lines T/D/fps: {e}") from e
        frames = np.loadtxt(f, dtype=np.float64, ndmin=2)
    if frames.shape != (n_frames, dim):
        raise FormatError(
            f"{path}: header declares {(n_frames, dim)} but body has shape {frames.shape}"
        )
    motion = MotionSequence(frames=frames, fps=fps)
    motion.validate()
    return motion


def check_media_alignment(manifest: DatasetManifest, root: str | Path = ".") -> list[str]:
    """Verify audio/motion durations agree within one motion frame.

    Returns a list of problem descriptions (empty when everything lines
    up).  Separate from load_manifest so manifests remain manipulable
    without the media files present.
    """
    root = Path(root)
    problems: list[str] = []
    for s in manifest.samples:
        mpath = root / s.motion_path
        if not mpath.exists():
            problems.append(f"{s.sample_id}: motion file missing ({mpath})")
            continue
        motion = load_motion(mpath)
        if motion.dim != manifest.motion_dim:
            problems.append(
                f"{s.sample_id}: motion dim {motion.dim} != manifest motion_dim {manifest.motion_dim}"
            )
        tol = 1.0 / motion.fps
        if not math.isclose(motion.duration, s.audio.duration, abs_tol=tol + 1e-9):
            problems.append(
                f"{s.sample_id}: motion duration {motion.duration:.3f}s vs "
                f"audio {s.audio.duration:.3f}s differs by more than one frame"
            )
    return problems
