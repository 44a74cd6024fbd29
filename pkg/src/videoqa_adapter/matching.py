"""Candidate scoring and the training objective.

Each answer candidate is scored by the cosine similarity between the pooled
video representation and its refined sentence embedding.  A softmax over the
raw cosines is reported as probabilities; the multiple-choice hinge loss and
the argmax prediction both act on the raw scores, so the softmax carries no
temperature and affects neither gradients nor ranking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from videoqa_adapter.errors import ConfigError, ContractError, NumericError


@dataclass
class CandidateScores:
    """Raw cosine scores, their softmax, and (for training) the true index."""

    raw: torch.Tensor
    probs: torch.Tensor
    label: Optional[int] = None


def _as_2d(texts) -> torch.Tensor:
    if isinstance(texts, (list, tuple)):
        texts = torch.stack([torch.as_tensor(t) for t in texts])
    if texts.dim() != 2:
        raise ContractError(f"texts must be (k, C), got {tuple(texts.shape)}")
    return texts


def cosine_scores(pooled: torch.Tensor, texts: torch.Tensor) -> torch.Tensor:
    """Cosine similarity between one pooled vector and k candidate vectors."""
    if pooled.dim() != 1:
        raise ContractError(f"pooled must be a vector, got {tuple(pooled.shape)}")
    if texts.shape[-1] != pooled.shape[-1]:
        raise ContractError(
            f"width mismatch: pooled {pooled.shape[-1]} vs texts {texts.shape[-1]}"
        )
    pooled_norm = torch.linalg.vector_norm(pooled)
    if pooled_norm == 0:
        raise NumericError("pooled video representation has zero norm")
    text_norms = torch.linalg.vector_norm(texts, dim=-1)
    zero = (text_norms == 0).nonzero()
    if zero.numel():
        raise NumericError(f"candidate {int(zero[0])} embedding has zero norm")
    return (texts @ pooled) / (text_norms * pooled_norm)


def cosine_scores_batch(pooled: torch.Tensor, texts: torch.Tensor) -> torch.Tensor:
    """Cosine scores for a batch: pooled (B, C) against texts (B, k, C)."""
    if pooled.dim() != 2 or texts.dim() != 3 or pooled.shape[0] != texts.shape[0]:
        raise ContractError("expected pooled (B, C) and texts (B, k, C)")
    if pooled.shape[-1] != texts.shape[-1]:
        raise ContractError("width mismatch between pooled and texts")
    pooled_norm = torch.linalg.vector_norm(pooled, dim=-1, keepdim=True)
    text_norms = torch.linalg.vector_norm(texts, dim=-1)
    if (pooled_norm == 0).any():
        raise NumericError("a pooled video representation has zero norm")
    if (text_norms == 0).any():
        raise NumericError("a candidate embedding has zero norm")
    return torch.einsum("bc,bkc->bk", pooled / pooled_norm, texts / text_norms.unsqueeze(-1))


def score_candidates(video, texts, label: Optional[int] = None) -> CandidateScores:
    """Score k >= 2 candidates against a pooled video representation.

    `video` is an AlignedVideo or the pooled vector itself.
    """
    pooled = video.pooled if hasattr(video, "pooled") else torch.as_tensor(video)
    texts = _as_2d(texts)
    if texts.shape[0] < 2:
        raise ContractError("need at least two candidates")
    raw = cosine_scores(pooled, texts)
    probs = torch.softmax(raw, dim=-1)
    return CandidateScores(raw=raw, probs=probs, label=label)


def hinge_loss(scores: CandidateScores, margin: float = 1.0) -> torch.Tensor:
    """Sum over wrong candidates of max(0, margin + wrong - correct)."""
    if scores.label is None:
        raise ContractError("hinge_loss needs scores.label")
    return hinge_loss_batch(
        scores.raw.unsqueeze(0),
        torch.tensor([scores.label], device=scores.raw.device),
        margin,
    ).squeeze(0)


def hinge_loss_batch(raw: torch.Tensor, labels: torch.Tensor, margin: float = 1.0) -> torch.Tensor:
    """Per-question hinge sums for raw scores (B, k) and labels (B,)."""
    if raw.dim() != 2:
        raise ContractError(f"raw must be (B, k), got {tuple(raw.shape)}")
    if labels.dim() != 1 or labels.shape[0] != raw.shape[0]:
        raise ContractError("labels must be (B,) matching raw")
    if (labels < 0).any() or (labels >= raw.shape[1]).any():
        raise ContractError("label out of range")
    correct = raw.gather(1, labels.unsqueeze(1))
    violations = torch.relu(margin + raw - correct)
    mask = torch.ones_like(raw)
    mask.scatter_(1, labels.unsqueeze(1), 0.0)
    return (violations * mask).sum(dim=1)


def total_loss(hinge, mse, gamma: float):
    """Combined objective: hinge + gamma * reconstruction."""
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    return hinge + gamma * mse


def predict(scores: CandidateScores) -> int:
    """Index of the best candidate; exact ties break to the lowest index."""
    raw = scores.raw.detach().cpu().numpy()
    return int(np.argmax(raw))
