"""Single-modality encoders and their media-to-input frontends.

Three branches share one hidden width C:

* vision  -- uniformly sampled frames, patch embedding, transformer
  blocks with 3D shifted-window self-attention; output (B, N_v, C)
* audio   -- consecutive 5-second segments as Hamming-windowed log-Mel
  spectrograms, patch embedding, per-segment transformer; (B, N_a, C)
* motion  -- full pose-parameter sequence, no temporal subsampling,
  sinusoidal positions plus a learnable summary token; (B, 1, C)

Desk-scale mode builds small randomly initialized encoders with the
full shape semantics; pretrained-adapter mode loads weights through the
checkpoint adapter at the bottom of this module.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image

from .core import ConfigError, ContractError, FormatError, MediaError

LOG_POWER_FLOOR = 1e-10


@dataclass
class EncoderConfig:
    C: int = 128
    n_frames: int = 8  # N_v, sampled video frames
    clip_seconds: float = 5.0  # audio segment length
    sample_rate: int = 16000
    mel_bins: int = 128
    win_ms: float = 25.0
    hop_ms: float = 10.0
    frame_size: int = 64  # H = W fed to the vision branch
    vision_patch: int = 16
    vision_window: tuple[int, int, int] = (2, 4, 4)
    vision_layers: int = 2
    vision_heads: int = 4
    audio_patch: tuple[int, int] = (32, 16)
    audio_layers: int = 2
    audio_heads: int = 4
    motion_dim: int = 24
    motion_layers: int = 2
    motion_heads: int = 4
    fusion_hidden: int = 128
    backbone_mode: str = "desk-scale"  # or "pretrained-adapter"
    checkpoint_path: str | None = None

    def validate(self) -> None:
        if self.C < 1:
            raise ConfigError(f"hidden dimension C must be >= 1, got {self.C}")
        if self.n_frames < 1:
            raise ConfigError(f"n_frames must be >= 1, got {self.n_frames}")
        if self.clip_seconds <= 0:
            raise ConfigError(f"clip_seconds must be > 0, got {self.clip_seconds}")
        if self.backbone_mode not in ("desk-scale", "pretrained-adapter"):
            raise ConfigError(f"unknown backbone_mode {self.backbone_mode!r}")
        if self.backbone_mode == "pretrained-adapter" and not self.checkpoint_path:
            raise ConfigError("pretrained-adapter mode requires checkpoint_path")


@dataclass
class FeatureBundle:
    """The per-branch features with shared batch size and hidden width."""

    F_v: torch.Tensor  # (B, N_v, C)
    F_a: torch.Tensor  # (B, N_a, C)
    F_m: torch.Tensor  # (B, 1, C)

    def validate(self) -> None:
        b, _, c = self.F_v.shape
        for name, t in (("F_v", self.F_v), ("F_a", self.F_a), ("F_m", self.F_m)):
            if t.ndim != 3:
                raise ContractError(f"{name} must be 3-D, got shape {tuple(t.shape)}")
            if t.shape[0] != b or t.shape[2] != c:
                raise ContractError(
                    f"{name} shape {tuple(t.shape)} disagrees with shared (B={b}, C={c})"
                )
            if not torch.isfinite(t).all():
                raise ContractError(f"{name} contains non-finite values")
        if self.F_m.shape[1] != 1:
            raise ContractError(f"F_m must have a single token, got {self.F_m.shape[1]}")


# -- video frontend -------------------------------------------------------

_FRAME_RE = re.compile(r"(\d+)\.(png|jpg|jpeg|bmp)$", re.IGNORECASE)


def uniform_frame_indices(total: int, n: int) -> list[int]:
    """Temporally uniform indices, first and last frame inclusive.

    For n >= 2: index_i = round(i * (total-1) / (n-1)); a single frame
    picks the middle one, floor((total-1)/2).
    """
    if total < 1 or n < 1:
        raise ContractError(f"need total >= 1 and n >= 1, got {total}, {n}")
    if n == 1:
        return [(total - 1) // 2]
    step = (total - 1) / (n - 1)
    return [int(math.floor(i * step + 0.5)) for i in range(n)]


def _list_frame_files(video_dir: Path) -> list[Path]:
    frames = [(int(m.group(1)), p) for p in video_dir.iterdir() if (m := _FRAME_RE.search(p.name))]
    frames.sort()
    return [p for _, p in frames]


def _frame_selection(total: int, n_frames: int) -> tuple[list[int], bool]:
    """Uniform sampling when enough frames exist; last-frame padding otherwise."""
    if total < n_frames:
        return list(range(total)) + [total - 1] * (n_frames - total), True
    return uniform_frame_indices(total, n_frames), False


def sample_frames(video: str | Path, n_frames: int) -> tuple[np.ndarray, bool]:
    """Load N_v uniformly sampled RGB frames from a video reference.

    The reference is either a directory of numbered image frames or a
    container file decodable by OpenCV.  Returns (frames, padded):
    frames float32 in [0, 1] shaped (N_v, H, W, 3); padded is True when
    the video was shorter than N_v and the last frame was repeated.
    """
    if n_frames < 1:
        raise ContractError(f"n_frames must be >= 1, got {n_frames}")
    video = Path(video)
    if video.is_dir():
        files = _list_frame_files(video)
        if not files:
            raise MediaError(f"no image frames found in {video}")
        indices, padded = _frame_selection(len(files), n_frames)
        out = []
        for i in indices:
            with Image.open(files[i]) as img:
                out.append(np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0)
        return np.stack(out), padded
    if not video.exists():
        raise MediaError(f"video not found: {video}")
    return _sample_frames_container(video, n_frames)


def _sample_frames_container(video: Path, n_frames: int) -> tuple[np.ndarray, bool]:
    try:
        import cv2
    except ImportError as e:  # pragma: no cover - opencv present in supported envs
        raise MediaError(f"cannot decode container {video}: OpenCV unavailable") from e
    cap = cv2.VideoCapture(str(video))
    if not cap.isOpened():
        raise MediaError(f"cannot decode video: {video}")
    frames = []
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        frames.append(np.asarray(frame[:, :, ::-1], dtype=np.float32) / 255.0)
    cap.release()
    if not frames:
        raise MediaError(f"video has no decodable frames: {video}")
    indices, padded = _frame_selection(len(frames), n_frames)
    return np.stack([frames[i] for i in indices]), padded


def video_fps(video: str | Path) -> float:
    """fps of a frames directory (sidecar json) or container file."""
    video = Path(video)
    if video.is_dir():
        sidecar = video / "fps.json"
        if not sidecar.exists():
            raise FormatError(f"frames directory {video} lacks fps.json sidecar")
        return float(json.loads(sidecar.read_text())["fps"])
    import cv2

    cap = cv2.VideoCapture(str(video))
    if not cap.isOpened():
        raise MediaError(f"cannot open video: {video}")
    fps = cap.get(cv2.CAP_PROP_FPS)
    cap.release()
    return float(fps)


# -- audio frontend -------------------------------------------------------


def load_wav_mono(path: str | Path, target_rate: int) -> np.ndarray:
    """Read a WAV file as mono float64 in [-1, 1], resampled to target_rate."""
    from scipy.io import wavfile

    path = Path(path)
    if not path.exists():
        raise MediaError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        raise MediaError(f"cannot decode audio {path}: {e}") from e
    wave = np.asarray(data, dtype=np.float64)
    if np.issubdtype(data.dtype, np.integer):
        wave = wave / float(np.iinfo(data.dtype).max)
    if wave.ndim == 2:
        wave = wave.mean(axis=1)
    if rate != target_rate:
        from scipy.signal import resample_poly

        frac = Fraction(target_rate, rate).limit_denominator(1000)
        wave = resample_poly(wave, frac.numerator, frac.denominator)
    return wave


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters (HTK scale) over the rfft bins, (n_mels, n_fft//2+1)."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_bins)
    mel_pts = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for i in range(n_mels):
        lo, center, hi = mel_pts[i], mel_pts[i + 1], mel_pts[i + 2]
        rising = (fft_freqs - lo) / max(center - lo, 1e-12)
        falling = (hi - fft_freqs) / max(hi - center, 1e-12)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def logmel_spectrogram(wave: np.ndarray, config: EncoderConfig) -> np.ndarray:
    """Hamming-windowed log-Mel spectrogram of one segment, (frames, mel_bins)."""
    win = int(round(config.win_ms * config.sample_rate / 1000.0))
    hop = int(round(config.hop_ms * config.sample_rate / 1000.0))
    if len(wave) < win:
        wave = np.pad(wave, (0, win - len(wave)))
    window = np.hamming(win)
    n_steps = 1 + (len(wave) - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_steps)[:, None]
    frames = wave[idx] * window[None, :]
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    fb = mel_filterbank(config.mel_bins, win, config.sample_rate)
    mel = power @ fb.T
    return np.log(np.maximum(mel, LOG_POWER_FLOOR))


def segment_waveform(wave: np.ndarray, config: EncoderConfig) -> list[np.ndarray]:
    """Split into consecutive clip_seconds chunks, last one zero-padded."""
    if len(wave) == 0:
        raise MediaError("zero-length audio")
    seg_len = int(round(config.clip_seconds * config.sample_rate))
    n_segments = math.ceil(len(wave) / seg_len)
    segments = []
    for i in range(n_segments):
        chunk = wave[i * seg_len : (i + 1) * seg_len]
        if len(chunk) < seg_len:
            chunk = np.pad(chunk, (0, seg_len - len(chunk)))
        segments.append(chunk)
    return segments


def audio_to_logmel(path: str | Path, config: EncoderConfig) -> np.ndarray:
    """Decode audio and return N_a stacked spectrograms (N_a, frames, mel_bins)."""
    wave = load_wav_mono(path, config.sample_rate)
    segments = segment_waveform(wave, config)
    return np.stack([logmel_spectrogram(s, config) for s in segments])


# -- shared transformer pieces --------------------------------------------


class TransformerBlock(nn.Module):
    """Pre-norm block: self-attention + GELU MLP, both residual."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float = 2.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm2(x))


def sinusoidal_positions(length: int, dim: int, dtype, device) -> torch.Tensor:
    position = torch.arange(length, dtype=torch.float64)[:, None]
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    pe = torch.zeros(length, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div[: dim // 2])
    return pe.to(dtype=dtype, device=device)


# -- vision encoder --------------------------------------------------------


class WindowAttention3dBlock(nn.Module):
    """Multi-head self-attention inside (t, h, w) windows of a token grid.

    Shifted variants cyclically roll the grid by half a window before
    partitioning; at desk scale the wraparound interactions this creates
    at grid edges are accepted rather than masked out.
    """

    def __init__(self, dim: int, heads: int, window: tuple[int, int, int], shifted: bool):
        super().__init__()
        self.window = window
        self.shifted = shifted
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        hidden = dim * 2
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def _windowed_attention(self, x: torch.Tensor) -> torch.Tensor:
        b, t, h, w, c = x.shape
        wt, wh, ww = (min(a, b_) for a, b_ in zip(self.window, (t, h, w)))
        pt, ph, pw = (-t) % wt, (-h) % wh, (-w) % ww
        if pt or ph or pw:
            x = nn.functional.pad(x, (0, 0, 0, pw, 0, ph, 0, pt))
        _, tp, hp, wp, _ = x.shape
        if self.shifted:
            x = torch.roll(x, shifts=(-(wt // 2), -(wh // 2), -(ww // 2)), dims=(1, 2, 3))
        x = x.view(b, tp // wt, wt, hp // wh, wh, wp // ww, ww, c)
        x = x.permute(0, 1, 3, 5, 2, 4, 6, 7).reshape(-1, wt * wh * ww, c)
        x = self.attn(x, x, x, need_weights=False)[0]
        x = x.view(b, tp // wt, hp // wh, wp // ww, wt, wh, ww, c)
        x = x.permute(0, 1, 4, 2, 5, 3, 6, 7).reshape(b, tp, hp, wp, c)
        if self.shifted:
            x = torch.roll(x, shifts=(wt // 2, wh // 2, ww // 2), dims=(1, 2, 3))
        return x[:, :t, :h, :w, :]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self._windowed_attention(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class VisionEncoder(nn.Module):
    """Frames -> F_v of shape (B, N_v, C) via windowed 3D attention."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.patch = nn.Conv2d(
            3, config.C, kernel_size=config.vision_patch, stride=config.vision_patch
        )
        self.blocks = nn.ModuleList(
            WindowAttention3dBlock(
                config.C, config.vision_heads, config.vision_window, shifted=(i % 2 == 1)
            )
            for i in range(config.vision_layers)
        )
        self.norm = nn.LayerNorm(config.C)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        if frames.ndim != 5 or frames.shape[-1] != 3:
            raise ContractError(
                f"vision input must be (B, N_v, H, W, 3), got {tuple(frames.shape)}"
            )
        b, nv, h, w, _ = frames.shape
        x = frames.permute(0, 1, 4, 2, 3).reshape(b * nv, 3, h, w)
        x = self.patch(x)  # (B*N_v, C, h', w')
        _, c, hp, wp = x.shape
        x = x.permute(0, 2, 3, 1).reshape(b, nv, hp, wp, c)
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return x.mean(dim=(2, 3)).reshape(b, nv, c)


# -- audio encoder ----------------------------------------------------------


class AudioEncoder(nn.Module):
    """Spectrogram segments -> F_a of shape (B, N_a, C), segments independent."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        pf, pm = config.audio_patch
        self.patch = nn.Conv2d(1, config.C, kernel_size=(pf, pm), stride=(pf, pm))
        self.blocks = nn.ModuleList(
            TransformerBlock(config.C, config.audio_heads) for _ in range(config.audio_layers)
        )
        self.norm = nn.LayerNorm(config.C)

    def forward(self, spectrograms: torch.Tensor) -> torch.Tensor:
        if spectrograms.ndim != 4:
            raise ContractError(
                f"audio input must be (B, N_a, frames, mel_bins), got {tuple(spectrograms.shape)}"
            )
        b, na, nf, nm = spectrograms.shape
        if nm != self.config.mel_bins:
            raise ContractError(f"expected {self.config.mel_bins} mel bins, got {nm}")
        x = spectrograms.reshape(b * na, 1, nf, nm)
        x = self.patch(x)  # (B*N_a, C, f', m')
        x = x.flatten(2).transpose(1, 2)  # tokens
        for block in self.blocks:
            x = block(x)
        x = self.norm(x).mean(dim=1)
        return x.reshape(b, na, self.config.C)


# -- motion encoder ----------------------------------------------------------


class MotionEncoder(nn.Module):
    """Full pose sequence -> F_m (B, 1, C): the learnable summary token state.

    The sequence is embedded frame-by-frame, gets sinusoidal positions,
    and is processed holistically (no temporal subsampling); the extra
    token prepended before the blocks carries the output.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.embed = nn.Linear(config.motion_dim, config.C)
        self.summary_token = nn.Parameter(torch.randn(1, 1, config.C) * 0.02)
        self.blocks = nn.ModuleList(
            TransformerBlock(config.C, config.motion_heads) for _ in range(config.motion_layers)
        )
        self.norm = nn.LayerNorm(config.C)

    def forward(self, motion: torch.Tensor) -> torch.Tensor:
        if motion.ndim != 3:
            raise ContractError(f"motion input must be (B, T, D), got {tuple(motion.shape)}")
        if motion.shape[2] != self.config.motion_dim:
            raise ContractError(
                f"expected motion dim {self.config.motion_dim}, got {motion.shape[2]}"
            )
        if not torch.isfinite(motion).all():
            raise ContractError("motion input contains non-finite values")
        b, t, _ = motion.shape
        x = self.embed(motion)
        x = x + sinusoidal_positions(t, self.config.C, x.dtype, x.device)[None]
        token = self.summary_token.expand(b, 1, -1).to(x.dtype)
        x = torch.cat([token, x], dim=1)
        for block in self.blocks:
            x = block(x)
        return self.norm(x[:, :1, :])


def pool_temporal(features: torch.Tensor) -> torch.Tensor:
    """Arithmetic mean over the token axis: (B, N, C) -> (B, 1, C)."""
    if features.ndim != 3 or features.shape[1] < 1:
        raise ContractError(f"expected (B, N>=1, C), got {tuple(features.shape)}")
    return features.mean(dim=1, keepdim=True)


def build_encoders(config: EncoderConfig) -> tuple[VisionEncoder, AudioEncoder, MotionEncoder]:
    """Construct the three branches; in adapter mode, load their weights."""
    config.validate()
    vision, audio, motion = VisionEncoder(config), AudioEncoder(config), MotionEncoder(config)
    if config.backbone_mode == "pretrained-adapter":
        for prefix, module in (("vision", vision), ("audio", audio), ("motion", motion)):
            report = load_checkpoint(module, config.checkpoint_path, prefix=prefix)
            if not report.clean:
                raise FormatError(
                    f"checkpoint {config.checkpoint_path} does not cover {prefix} encoder: {report}"
                )
    return vision, audio, motion


# -- checkpoint adapter -------------------------------------------------------


@dataclass
class CheckpointReport:
    missing: list[str] = field(default_factory=list)
    unexpected: list[str] = field(default_factory=list)
    mismatched: list[tuple[str, tuple, tuple]] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (self.missing or self.unexpected or self.mismatched)

    def __str__(self) -> str:
        parts = []
        if self.missing:
            parts.append(f"missing={self.missing}")
        if self.unexpected:
            parts.append(f"unexpected={self.unexpected}")
        if self.mismatched:
            parts.append(
                "mismatched=" + str([f"{n}: {e} != {g}" for n, e, g in self.mismatched])
            )
        return "; ".join(parts) if parts else "clean"


def _manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def save_checkpoint(named_modules: dict[str, nn.Module], path: str | Path) -> None:
    """Persist named parameter maps plus a sidecar manifest of shapes."""
    state = {}
    for prefix, module in named_modules.items():
        for name, tensor in module.state_dict().items():
            state[f"{prefix}.{name}"] = tensor
    torch.save(state, path)
    manifest = {name: list(t.shape) for name, t in state.items()}
    _manifest_path(path).write_text(json.dumps(manifest, indent=1) + "\n")


def load_checkpoint(module: nn.Module, path: str | Path, prefix: str = "") -> CheckpointReport:
    """Load parameters under prefix into module, reporting every discrepancy.

    Matching entries are applied even when the report is not clean; the
    caller decides whether a dirty report is fatal.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"checkpoint not found: {path}")
    state = torch.load(path, map_location="cpu", weights_only=True)
    if prefix:
        state = {
            name[len(prefix) + 1 :]: t for name, t in state.items() if name.startswith(prefix + ".")
        }
    own = module.state_dict()
    report = CheckpointReport()
    loadable = {}
    for name, tensor in state.items():
        if name not in own:
            report.unexpected.append(name)
        elif tuple(own[name].shape) != tuple(tensor.shape):
            report.mismatched.append((name, tuple(own[name].shape), tuple(tensor.shape)))
        else:
            loadable[name] = tensor
    report.missing = [name for name in own if name not in state]
    module.load_state_dict(loadable, strict=False)
    return report
