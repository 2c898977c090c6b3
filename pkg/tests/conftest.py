import itertools

import pytest

from gesturebench.core import (
    AudioClip,
    DatasetManifest,
    EmotionLabel,
    SampleRecord,
    SourceMethod,
    make_sample_id,
)


def build_manifest(n_audio: int, methods=None, motion_dim: int = 24) -> DatasetManifest:
    """Synthetic in-memory manifest: n_audio clips cycled over the 8 emotions."""
    methods = list(methods or SourceMethod)
    emotions = list(EmotionLabel)
    samples = []
    for a, method in itertools.product(range(n_audio), methods):
        audio_id = f"a{a:04d}"
        clip = AudioClip(
            id=audio_id,
            path=f"audio/{audio_id}.wav",
            sample_rate=16000,
            duration=10.0,
            emotion=emotions[a % len(emotions)],
            speaker_id=f"spk{a % 4}",
        )
        samples.append(
            SampleRecord(
                sample_id=make_sample_id(audio_id, method),
                method=method,
                audio=clip,
                motion_path=f"motion/{audio_id}__{method.value}.txt",
                video_path=f"video/{audio_id}__{method.value}",
            )
        )
    return DatasetManifest(version="test", motion_dim=motion_dim, samples=samples)


@pytest.fixture
def small_manifest() -> DatasetManifest:
    return build_manifest(8)
