"""Frame sampling and frozen-encoder embedding of frames and sentences.

Frames are picked with an anchored plan: a fixed number of anchors spread
uniformly over the video, each expanded to a window of consecutive frames
centered on it (default 8 anchors x 16 frames = 128).  Windows are clamped
into range by duplicating edge frames so every video yields the same T.
Uniform sampling of N frames is the degenerate plan N x 1.

Encoders are pluggable behind a two-method contract (frames -> matrix,
sentences -> matrix).  The hash-seeded stub backend is deterministic and
dependency-free so the full pipeline runs without model weights; the "clip"
entry wraps a real frozen encoder when one is installed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from videoqa_adapter.errors import (
    BackendUnavailableError,
    ConfigError,
    ContractError,
    DataError,
)

DEFAULT_EMBED_DIM = 512


@dataclass(frozen=True)
class FrameSamplePlan:
    """Anchored frame-sampling plan: num_anchors windows of `window` frames."""

    num_anchors: int = 8
    window: int = 16

    def __post_init__(self) -> None:
        if self.num_anchors < 1 or self.window < 1:
            raise ConfigError("frame plan counts must be positive")

    @property
    def total(self) -> int:
        return self.num_anchors * self.window

    @classmethod
    def parse(cls, text: str) -> "FrameSamplePlan":
        """Parse "8x16" (anchored) or "uniform:128" (even sampling)."""
        text = text.strip().lower()
        if text.startswith("uniform:"):
            return cls(num_anchors=int(text.split(":", 1)[1]), window=1)
        if "x" in text:
            anchors, window = text.split("x", 1)
            return cls(num_anchors=int(anchors), window=int(window))
        raise ConfigError(f"cannot parse frame plan {text!r}")


def plan_frames(source_frame_count: int, plan: FrameSamplePlan) -> np.ndarray:
    """Frame indices selected by the plan, nondecreasing and in range.

    Anchors sit at the centers of num_anchors equal segments of the video;
    each window covers [anchor - window//2, anchor + window//2) with every
    index clamped to [0, source_frame_count - 1].
    """
    if source_frame_count < 1:
        raise ContractError("source_frame_count must be >= 1")
    indices = np.empty(plan.total, dtype=np.int64)
    half = plan.window // 2
    for k in range(plan.num_anchors):
        anchor = int((k + 0.5) * source_frame_count / plan.num_anchors)
        start = anchor - half
        window = np.arange(start, start + plan.window, dtype=np.int64)
        np.clip(window, 0, source_frame_count - 1, out=window)
        indices[k * plan.window:(k + 1) * plan.window] = window
    # Windows can overlap on short videos; the selection is returned in
    # temporal order so the sequence is globally nondecreasing.
    indices.sort()
    return indices


@dataclass
class VideoFeatureSequence:
    """Per-frame embeddings of one video: a T x C float32 matrix."""

    video_id: str
    features: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2:
            raise ContractError(f"video {self.video_id!r}: features must be 2-D")
        if not np.isfinite(self.features).all():
            raise DataError(f"video {self.video_id!r}: non-finite feature values")

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class TextEmbedding:
    """Embedding of one sentence: a length-C float32 vector."""

    sentence_id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float32)
        if self.vector.ndim != 1:
            raise ContractError(f"sentence {self.sentence_id!r}: vector must be 1-D")
        if not np.isfinite(self.vector).all():
            raise DataError(f"sentence {self.sentence_id!r}: non-finite values")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


class EncoderBackend:
    """Frozen encoder contract: frames -> T x C, sentences -> k x C."""

    name: str = "base"

    def __init__(self, dim: int = DEFAULT_EMBED_DIM):
        self.dim = int(dim)

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def embed_sentences(self, sentences: list[str]) -> np.ndarray:
        raise NotImplementedError


class StubEncoder(EncoderBackend):
    """Deterministic hash-seeded embeddings; stands in for a real encoder.

    Each frame (by content) and each sentence (by text) maps to a fixed
    standard-normal vector, so identical inputs always embed identically
    across calls, processes, and platforms.
    """

    name = "stub"

    def _vector(self, payload: bytes) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
        rng = np.random.Generator(np.random.PCG64(seed))
        return rng.standard_normal(self.dim).astype(np.float32)

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames)
        if frames.ndim < 2 or frames.shape[0] == 0:
            raise ContractError("frames must be a non-empty batch")
        rows = []
        for frame in frames:
            frame = np.ascontiguousarray(frame)
            payload = b"frame:" + str(frame.dtype).encode() + str(frame.shape).encode() + frame.tobytes()
            rows.append(self._vector(payload))
        return np.stack(rows)

    def embed_sentences(self, sentences: list[str]) -> np.ndarray:
        if not sentences:
            raise ContractError("sentences must be non-empty")
        return np.stack([self._vector(b"text:" + s.encode("utf-8")) for s in sentences])


class ClipEncoder(EncoderBackend):
    """Frozen CLIP (ViT-B/32 by default) via open_clip; optional dependency."""

    name = "clip"

    def __init__(self, dim: int = DEFAULT_EMBED_DIM, model_name: str = "ViT-B-32", pretrained: str = "openai"):
        super().__init__(dim)
        try:
            import open_clip
            import torch
            from PIL import Image
        except ImportError as exc:
            raise BackendUnavailableError(
                "the 'clip' backend needs open_clip_torch and pillow installed; "
                "use --backend stub for a dependency-free run"
            ) from exc

        self._torch = torch
        self._image_cls = Image
        self._model, _, self._preprocess = open_clip.create_model_and_transforms(
            model_name, pretrained=pretrained
        )
        self._tokenize = open_clip.get_tokenizer(model_name)
        self._model.eval()

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        torch = self._torch
        frames = np.asarray(frames)
        if frames.ndim < 3 or frames.shape[0] == 0:
            raise ContractError("frames must be a non-empty batch of images")
        with torch.no_grad():
            batch = torch.stack(
                [self._preprocess(self._image_cls.fromarray(np.uint8(frame))) for frame in frames]
            )
            out = self._model.encode_image(batch)
        return out.cpu().numpy().astype(np.float32)

    def embed_sentences(self, sentences: list[str]) -> np.ndarray:
        torch = self._torch
        if not sentences:
            raise ContractError("sentences must be non-empty")
        with torch.no_grad():
            out = self._model.encode_text(self._tokenize(sentences))
        return out.cpu().numpy().astype(np.float32)


_BACKENDS = {
    "stub": StubEncoder,
    "clip": ClipEncoder,
}


def get_backend(name: str, dim: int = DEFAULT_EMBED_DIM) -> EncoderBackend:
    if name not in _BACKENDS:
        raise BackendUnavailableError(
            f"unknown backend {name!r}; available: {sorted(_BACKENDS)}"
        )
    return _BACKENDS[name](dim=dim)


def embed_video(frames: np.ndarray, backend: EncoderBackend, video_id: str) -> VideoFeatureSequence:
    """Embed a decoded frame batch; rows are the backend's output, unmodified."""
    matrix = backend.embed_frames(frames)
    if matrix.shape[0] != np.asarray(frames).shape[0]:
        raise ContractError(f"backend returned {matrix.shape[0]} rows for {len(frames)} frames")
    if not np.isfinite(matrix).all():
        raise DataError(f"video {video_id!r}: backend produced non-finite embeddings")
    return VideoFeatureSequence(video_id=video_id, features=matrix)


def embed_text(sentences: list[str], backend: EncoderBackend, ids: list[str] | None = None) -> list[TextEmbedding]:
    """Embed sentences in order; one vector per sentence."""
    if not sentences:
        raise ContractError("sentences must be non-empty")
    ids = ids if ids is not None else [f"s{i}" for i in range(len(sentences))]
    if len(ids) != len(sentences):
        raise ContractError("ids and sentences must have equal length")
    matrix = backend.embed_sentences(sentences)
    if not np.isfinite(matrix).all():
        bad = [ids[i] for i in range(len(ids)) if not np.isfinite(matrix[i]).all()]
        raise DataError(f"non-finite text embeddings for {bad}")
    return [TextEmbedding(sentence_id=ids[i], vector=matrix[i]) for i in range(len(sentences))]
