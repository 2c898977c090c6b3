"""
Three branches, one shape algebra
=================================

The scorer sees each sample through three encoders: video frames
through a shifted-window vision transformer, audio through a log-Mel
spectrogram transformer, and the pose sequence through a summary-token
transformer.  All three end in (batch, tokens, C) so the fusion head
can treat them uniformly.
"""

import tempfile
from pathlib import Path

import torch

from gesturebench.features import (
    EncoderConfig,
    audio_to_logmel,
    logmel_spectrogram,
    load_wav_mono,
    sample_frames,
    uniform_frame_indices,
)
from gesturebench.model import GestureScorer
from gesturebench.synth import SynthConfig, generate_dataset

out = Path(tempfile.mkdtemp(prefix="gesturebench_demo_"))
synth = SynthConfig(n_audio=8, seed=7, frame_size=64)
manifest = generate_dataset(synth, out)
sample = manifest.samples[0]

config = EncoderConfig()  # C=128, 8 frames, 5 s audio segments
print(f"hidden width C={config.C}, frames per clip N_v={config.n_frames}")

# -- vision input: 8 frames sampled uniformly from the rendered video ---------
indices = uniform_frame_indices(60, config.n_frames)
print("frame indices chosen from 60 rendered frames:", indices)
frames, padded = sample_frames(out / sample.video_path, config.n_frames)
print("frames array:", frames.shape, "padded:", padded)

# -- audio input: log-Mel spectrogram per 5-second segment ---------------------
wave = load_wav_mono(out / sample.audio.path, config.sample_rate)
single = logmel_spectrogram(wave[: 5 * config.sample_rate], config)
print("one segment's log-Mel spectrogram:", single.shape)
segments = audio_to_logmel(out / sample.audio.path, config)
print("full clip, segmented:", segments.shape)

# -- motion input is used raw: (frames, pose dims) -----------------------------
from gesturebench.core import load_motion

motion = load_motion(out / sample.motion_path)
print("motion sequence:", motion.frames.shape, f"at {motion.fps} fps")

# -- the full scorer maps all of that to two scores ----------------------------
torch.manual_seed(0)
model = GestureScorer(config)
model.eval()
batch_frames = torch.from_numpy(frames).float().unsqueeze(0)
batch_audio = torch.from_numpy(segments).float().unsqueeze(0)
batch_motion = torch.from_numpy(motion.frames).float().unsqueeze(0)

with torch.no_grad():
    bundle = model.extract(batch_frames, batch_audio, batch_motion)
    scores = model(batch_frames, batch_audio, batch_motion)

print("\nfeature bundle shapes:")
print("  F_v (vision):", tuple(bundle.F_v.shape))
print("  F_a (audio): ", tuple(bundle.F_a.shape))
print("  F_m (motion):", tuple(bundle.F_m.shape))
print("scores (quality, consistency):", scores.squeeze(0).tolist())
