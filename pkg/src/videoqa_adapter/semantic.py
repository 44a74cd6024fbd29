"""Cross-attention refinement of a sentence embedding with video context.

The sentence vector enters a small Transformer decoder as a single-token
query; the (unrefined) per-frame video features are the memory.  Both sides
are first projected to a lower latent width, the decoder output is projected
back, and a learnable per-channel gate scales the branch before a residual
add:

    refined = text + gate * up(decoder(down(text), down(video)))

The gate starts at zero, so an untrained module is exactly the identity and
the branch grows only as training demands.  No positional encoding is applied
to the memory: frames act as a set here; ordering them is the temporal
module's job.
"""

from __future__ import annotations

import torch
from torch import nn

from videoqa_adapter.errors import ConfigError, ContractError, NumericError


def _decoder_stack(width: int, num_heads: int, num_layers: int, ff_ratio: int, dropout: float) -> nn.TransformerDecoder:
    layer = nn.TransformerDecoderLayer(
        d_model=width,
        nhead=num_heads,
        dim_feedforward=width * ff_ratio,
        dropout=dropout,
        batch_first=True,
    )
    return nn.TransformerDecoder(layer, num_layers=num_layers)


class SemanticAligner(nn.Module):
    """Gated residual cross-attention refiner for text embeddings."""

    def __init__(
        self,
        embed_dim: int,
        latent_dim: int = 128,
        num_heads: int = 16,
        num_layers: int = 1,
        ff_ratio: int = 4,
        dropout: float = 0.0,
    ):
        super().__init__()
        if latent_dim % num_heads != 0:
            raise ConfigError(
                f"latent_dim {latent_dim} must be divisible by num_heads {num_heads}"
            )
        self.embed_dim = embed_dim
        self.latent_dim = latent_dim
        self.down = nn.Linear(embed_dim, latent_dim)
        self.decoder = _decoder_stack(latent_dim, num_heads, num_layers, ff_ratio, dropout)
        self.up = nn.Linear(latent_dim, embed_dim)
        self.gate = nn.Parameter(torch.zeros(embed_dim))

    def forward(self, text: torch.Tensor, video: torch.Tensor) -> torch.Tensor:
        """Refine text (B, C) with video (B, T, C); singletons are accepted.

        Output has the text's shape.  The memory may be shared across a batch
        of texts by passing video (T, C) with text (B, C).
        """
        squeeze = text.dim() == 1
        if squeeze:
            text = text.unsqueeze(0)
        if text.dim() != 2:
            raise ContractError(f"text must be (C,) or (B, C), got {tuple(text.shape)}")
        if video.dim() == 2:
            video = video.unsqueeze(0).expand(text.shape[0], -1, -1)
        if video.dim() != 3:
            raise ContractError(f"video must be (T, C) or (B, T, C), got {tuple(video.shape)}")
        if video.shape[0] != text.shape[0]:
            raise ContractError("text and video batch sizes differ")
        if text.shape[-1] != self.embed_dim or video.shape[-1] != self.embed_dim:
            raise ContractError(
                f"width mismatch: module expects {self.embed_dim}, "
                f"got text {text.shape[-1]} and video {video.shape[-1]}"
            )
        query = self.down(text).unsqueeze(1)
        memory = self.down(video)
        decoded = self.decoder(query, memory).squeeze(1)
        branch = self.up(decoded)
        if not torch.isfinite(branch).all():
            raise NumericError("semantic aligner: decoder branch produced non-finite values")
        out = text + self.gate * branch
        if not torch.isfinite(out).all():
            raise NumericError("semantic aligner: residual output is non-finite")
        return out.squeeze(0) if squeeze else out
