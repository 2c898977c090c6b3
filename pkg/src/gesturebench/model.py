"""Fusion head, the assembled three-branch scorer, and the training loss.

The loss normalizes predictions and targets to zero mean / unit variance
within the batch and combines two mean-squared-error terms, the second
with the predictions rescaled by their correlation with the targets:

    loss = (1/8) * [ MSE(p', t') + MSE(r * p', t') ],   r = mean(p' * t')

It is zero exactly when the normalized vectors coincide, and invariant
to positive affine transforms of the raw predictions.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .core import ContractError, ValidationError
from .features import (
    AudioEncoder,
    EncoderConfig,
    FeatureBundle,
    MotionEncoder,
    VisionEncoder,
    build_encoders,
    pool_temporal,
)

NORMALIZE_EPS = 1e-8
N_SCORE_DIMS = 2  # column 0 = gesture quality, column 1 = audio-gesture consistency


class FusionHead(nn.Module):
    """Fully connected stack mapping the concatenated 3C features to 2 scores."""

    def __init__(self, feature_dim: int, hidden_dim: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(3 * feature_dim, hidden_dim),
            nn.GELU(),
            nn.Linear(hidden_dim, N_SCORE_DIMS),
        )

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        return self.net(fused)


def fuse_and_score(bundle: FeatureBundle, head: FusionHead) -> torch.Tensor:
    """Pool vision/audio tokens, concatenate the three branches, score.

    Returns (B, 2) with column 0 = gesture quality and column 1 =
    audio-gesture consistency.
    """
    bundle.validate()
    fv = pool_temporal(bundle.F_v).squeeze(1)
    fa = pool_temporal(bundle.F_a).squeeze(1)
    fm = bundle.F_m.squeeze(1)
    fused = torch.cat([fv, fa, fm], dim=1)
    scores = head(fused)
    if not torch.isfinite(scores).all():
        raise ContractError("fusion produced non-finite scores")
    return scores


class GestureScorer(nn.Module):
    """The full vision + audio + motion scorer."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.vision, self.audio, self.motion = build_encoders(config)
        self.head = FusionHead(config.C, config.fusion_hidden)

    def extract(
        self, frames: torch.Tensor, spectrograms: torch.Tensor, motion: torch.Tensor
    ) -> FeatureBundle:
        bundle = FeatureBundle(
            F_v=self.vision(frames), F_a=self.audio(spectrograms), F_m=self.motion(motion)
        )
        bundle.validate()
        return bundle

    def forward(
        self, frames: torch.Tensor, spectrograms: torch.Tensor, motion: torch.Tensor
    ) -> torch.Tensor:
        return fuse_and_score(self.extract(frames, spectrograms, motion), self.head)


def normalize_scores(v: torch.Tensor) -> torch.Tensor:
    """(v - mean) / population std along the batch, eps-guarded at zero variance.

    The guard clamps rather than shifts the denominator: a healthy batch is
    normalized exactly, a constant batch maps to zeros instead of NaN.
    """
    v = v.reshape(-1)
    if v.numel() < 2:
        raise ValidationError(f"normalization needs at least 2 values, got {v.numel()}")
    std = v.std(unbiased=False)
    return (v - v.mean()) / std.clamp_min(NORMALIZE_EPS)


def plcc_loss(p: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    """Correlation-aligned loss over one score dimension; differentiable in p."""
    p, t = p.reshape(-1), t.reshape(-1)
    if p.shape != t.shape:
        raise ValidationError(f"shape mismatch: {tuple(p.shape)} vs {tuple(t.shape)}")
    if p.numel() < 2:
        raise ValidationError("batch correlation undefined for fewer than 2 samples")
    p_hat = normalize_scores(p)
    t_hat = normalize_scores(t)
    r = (p_hat * t_hat).mean()  # population covariance of normalized scores
    mse_direct = ((p_hat - t_hat) ** 2).mean()
    mse_scaled = ((r * p_hat - t_hat) ** 2).mean()
    return (mse_direct + mse_scaled) / 8.0


def mse_loss(p: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    """Plain mean squared error on normalized scores (ablation alternative)."""
    return ((normalize_scores(p) - normalize_scores(t)) ** 2).mean()


LOSSES = {"plcc": plcc_loss, "mse": mse_loss}


def total_loss(pred: torch.Tensor, target: torch.Tensor, kind: str = "plcc") -> torch.Tensor:
    """Mean of the per-dimension losses over the two score columns."""
    if pred.shape != target.shape:
        raise ValidationError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    if pred.ndim != 2 or pred.shape[1] != N_SCORE_DIMS:
        raise ValidationError(f"expected (B, {N_SCORE_DIMS}) scores, got {tuple(pred.shape)}")
    loss_fn = LOSSES[kind]
    per_dim = [loss_fn(pred[:, j], target[:, j]) for j in range(N_SCORE_DIMS)]
    return torch.stack(per_dim).mean()
