"""Temporal refinement of frame features and the autoregressive training task.

A one-layer Transformer encoder injects temporal relations into the frozen
per-frame embeddings (sinusoidal positions added at the input); its frame-mean
is the pooled video representation used for scoring.

Training adds a causal Transformer decoder that predicts each frame's frozen
embedding from strictly earlier frames.  The decoder input is the raw feature
sequence shifted right behind a learnable start token, under a causal
self-attention mask; its cross-attention memory is the refined sequence plus
the (broadcast) refined sentence embedding of the true answer, so prediction
is guided by both global video context and language.  The decoder never runs
at inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from videoqa_adapter.errors import ConfigError, ContractError


def sinusoidal_positions(length: int, dim: int, dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    """Standard fixed sin/cos position table of shape (length, dim)."""
    position = torch.arange(length, dtype=dtype, device=device).unsqueeze(1)
    half = torch.arange(0, dim, 2, dtype=dtype, device=device)
    freq = torch.exp(-math.log(10000.0) * half / dim)
    angles = position * freq
    table = torch.zeros(length, dim, dtype=dtype, device=device)
    table[:, 0::2] = torch.sin(angles)
    table[:, 1::2] = torch.cos(angles[:, : dim // 2])
    return table


def causal_mask(length: int, device: torch.device) -> torch.Tensor:
    """Boolean mask where True blocks attention to strictly later positions."""
    return torch.triu(torch.ones(length, length, dtype=torch.bool, device=device), diagonal=1)


@dataclass
class AlignedVideo:
    """Refined frame features (T x C or B x T x C) and their frame-mean."""

    refined: torch.Tensor
    pooled: torch.Tensor


def _check_heads(width: int, num_heads: int) -> None:
    if width % num_heads != 0:
        raise ConfigError(f"width {width} must be divisible by num_heads {num_heads}")


class TemporalEncoder(nn.Module):
    """Transformer encoder over the frame axis; output shape equals input."""

    def __init__(
        self,
        embed_dim: int,
        num_heads: int = 16,
        num_layers: int = 1,
        ff_ratio: int = 4,
        dropout: float = 0.0,
    ):
        super().__init__()
        _check_heads(embed_dim, num_heads)
        self.embed_dim = embed_dim
        layer = nn.TransformerEncoderLayer(
            d_model=embed_dim,
            nhead=num_heads,
            dim_feedforward=embed_dim * ff_ratio,
            dropout=dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=num_layers)

    def forward(self, video: torch.Tensor) -> AlignedVideo:
        squeeze = video.dim() == 2
        if squeeze:
            video = video.unsqueeze(0)
        if video.dim() != 3:
            raise ContractError(f"video must be (T, C) or (B, T, C), got {tuple(video.shape)}")
        if video.shape[-1] != self.embed_dim:
            raise ContractError(f"width mismatch: expected {self.embed_dim}, got {video.shape[-1]}")
        positions = sinusoidal_positions(video.shape[1], self.embed_dim, video.dtype, video.device)
        refined = self.encoder(video + positions)
        pooled = refined.mean(dim=1)
        if squeeze:
            return AlignedVideo(refined=refined.squeeze(0), pooled=pooled.squeeze(0))
        return AlignedVideo(refined=refined, pooled=pooled)


class TemporalDecoder(nn.Module):
    """Causal decoder that reconstructs frame features from history.

    Training-only.  `calls` counts forward invocations so tests can assert the
    module stays untouched during evaluation and inference.
    """

    def __init__(
        self,
        embed_dim: int,
        num_heads: int = 16,
        num_layers: int = 1,
        ff_ratio: int = 4,
        dropout: float = 0.0,
    ):
        super().__init__()
        _check_heads(embed_dim, num_heads)
        self.embed_dim = embed_dim
        self.start_token = nn.Parameter(torch.zeros(embed_dim))
        layer = nn.TransformerDecoderLayer(
            d_model=embed_dim,
            nhead=num_heads,
            dim_feedforward=embed_dim * ff_ratio,
            dropout=dropout,
            batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(layer, num_layers=num_layers)
        self.calls = 0

    def forward(self, video: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        """Predict all T frames; row i sees only raw frames < i plus the memory."""
        self.calls += 1
        squeeze = video.dim() == 2
        if squeeze:
            video = video.unsqueeze(0)
            memory = memory.unsqueeze(0) if memory.dim() == 2 else memory
        if video.dim() != 3 or memory.dim() != 3:
            raise ContractError("video and memory must be (B, T, C)")
        if video.shape[-1] != self.embed_dim or memory.shape[-1] != self.embed_dim:
            raise ContractError(f"width mismatch: expected {self.embed_dim}")
        if video.shape[0] != memory.shape[0]:
            raise ContractError("video and memory batch sizes differ")
        batch, length, _ = video.shape
        start = self.start_token.to(video.dtype).expand(batch, 1, self.embed_dim)
        shifted = torch.cat([start, video[:, :-1, :]], dim=1)
        positions = sinusoidal_positions(length, self.embed_dim, video.dtype, video.device)
        out = self.decoder(shifted + positions, memory, tgt_mask=causal_mask(length, video.device))
        return out.squeeze(0) if squeeze else out


def autoregress(
    video: torch.Tensor,
    guidance_text: torch.Tensor,
    encoded: AlignedVideo,
    decoder: TemporalDecoder,
) -> torch.Tensor:
    """Run the reconstruction decoder with language-fused memory.

    Memory = refined frames + guidance vector broadcast over the frame axis
    (additive fusion).  Given a fixed `encoded`, predicted row i depends only
    on raw frames with index < i.
    """
    refined = encoded.refined
    if guidance_text.shape[-1] != refined.shape[-1]:
        raise ContractError("guidance width differs from refined video width")
    memory = refined + guidance_text.unsqueeze(-2)
    return decoder(video, memory)


def reconstruction_loss(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Sum over frames of squared Euclidean distance between rows.

    2-D inputs give a scalar; 3-D batched inputs give one sum per item.
    """
    if predicted.shape != target.shape:
        raise ContractError(
            f"shape mismatch: predicted {tuple(predicted.shape)} vs target {tuple(target.shape)}"
        )
    diff = predicted - target
    return (diff * diff).sum(dim=(-1, -2))


def feature_psnr(predicted, target) -> float:
    """Peak signal-to-noise ratio in dB over feature matrices.

    Peak is the largest absolute value of the target; equal inputs report
    +infinity.
    """
    predicted = torch.as_tensor(predicted, dtype=torch.float64)
    target = torch.as_tensor(target, dtype=torch.float64)
    if predicted.shape != target.shape:
        raise ContractError(
            f"shape mismatch: predicted {tuple(predicted.shape)} vs target {tuple(target.shape)}"
        )
    mse = ((predicted - target) ** 2).mean().item()
    if mse == 0.0:
        return math.inf
    peak = target.abs().max().item()
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak * peak / mse)
