"""Training, evaluation, inference, and checkpointing for the adapter stack.

One Adam optimizer covers the union of learnable parameters; the objective is
the multiple-choice hinge plus gamma times the autoregressive reconstruction
loss.  The hinge path never touches the reconstruction decoder (its graph
simply does not contain it), while the reconstruction loss reaches all three
learnable modules through the fused memory and the guidance embedding of the
true answer.  Inference uses only the text refiner and the temporal encoder.

Ablation flags swap each stage for its bypass: raw question+answer strings
instead of templated sentences, the identity instead of either aligner, and
no reconstruction term.  With every flag off the pipeline degrades to
zero-shot cosine matching of frozen embeddings.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch
from torch import nn

from videoqa_adapter.errors import (
    ConfigError,
    ContractError,
    DataError,
    FeatureNotFoundError,
    IncompatibleCheckpointError,
    NumericError,
)
from videoqa_adapter.features import EncoderBackend
from videoqa_adapter.matching import cosine_scores_batch, hinge_loss_batch, total_loss
from videoqa_adapter.semantic import SemanticAligner
from videoqa_adapter.store import FeatureStore, qa_records_path, read_jsonl
from videoqa_adapter.templates import QAPair, to_declarative
from videoqa_adapter.temporal import (
    AlignedVideo,
    TemporalDecoder,
    TemporalEncoder,
    autoregress,
    reconstruction_loss,
)

CHECKPOINT_NAME = "checkpoint.pt"


@dataclass
class Ablations:
    """Component switches mirroring the ablation study."""

    use_template: bool = True
    use_semantic_aligner: bool = True
    use_temporal_aligner: bool = True
    use_autoregression: bool = True

    def to_dict(self) -> dict[str, bool]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Ablations":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown ablation flags: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    epochs: int = 50
    lr_decay_factor: float = 0.5
    lr_decay_every_epochs: int = 10
    gamma: float = 100.0
    margin: float = 1.0
    embed_dim: int = 512
    latent_dim: int = 128
    heads: int = 16
    encoder_layers: int = 1
    decoder_layers: int = 1
    text_decoder_layers: int = 1
    ff_ratio: int = 4
    dropout: float = 0.0
    seed: int = 0
    max_steps: Optional[int] = None
    model_selection: str = "last"
    ablations: Ablations = field(default_factory=Ablations)

    def validate(self) -> None:
        counts = {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr_decay_every_epochs": self.lr_decay_every_epochs,
            "embed_dim": self.embed_dim,
            "latent_dim": self.latent_dim,
            "heads": self.heads,
            "encoder_layers": self.encoder_layers,
            "decoder_layers": self.decoder_layers,
            "text_decoder_layers": self.text_decoder_layers,
            "ff_ratio": self.ff_ratio,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.model_selection not in ("last", "best"):
            raise ConfigError("model_selection must be 'last' or 'best'")
        if self.embed_dim % self.heads or self.latent_dim % self.heads:
            raise ConfigError("heads must divide embed_dim and latent_dim")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be positive when set")

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["ablations"] = self.ablations.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainingConfig":
        data = dict(data)
        ablations = data.pop("ablations", {})
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        config = cls(**data, ablations=Ablations.from_dict(ablations))
        config.validate()
        return config

    @classmethod
    def from_json_file(cls, path: str | Path) -> "TrainingConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON") from exc
        return cls.from_dict(data)


@dataclass
class QARecord:
    id: str
    video_id: str
    question: str
    answers: list[str]
    label: int
    category: str = ""


def load_qa_records(path: str | Path) -> list[QARecord]:
    records = []
    for raw in read_jsonl(path):
        try:
            record = QARecord(
                id=str(raw["id"]),
                video_id=str(raw["video_id"]),
                question=str(raw.get("question", "")),
                answers=[str(a) for a in raw["answers"]],
                label=int(raw["label"]),
                category=str(raw.get("category", "")),
            )
        except KeyError as exc:
            raise DataError(f"{path}: record missing field {exc}") from exc
        if len(record.answers) < 2:
            raise DataError(f"record {record.id}: needs at least two candidates")
        if not 0 <= record.label < len(record.answers):
            raise DataError(f"record {record.id}: label {record.label} out of range")
        records.append(record)
    return records


def raw_candidate_text(question: str, answer: str) -> str:
    """The no-template text: question and answer joined as one string."""
    return f"{question.strip()} {answer.strip()}".strip()


def candidate_sentences(record: QARecord, use_template: bool) -> list[str]:
    if use_template and record.question.strip():
        return [
            to_declarative(QAPair(record.question, answer)).text
            for answer in record.answers
        ]
    return [raw_candidate_text(record.question, answer) for answer in record.answers]


class AdapterModel(nn.Module):
    """The learnable stack; ablated stages are simply absent."""

    def __init__(self, config: TrainingConfig, include_decoder: bool = True):
        super().__init__()
        config.validate()
        self.config = config
        flags = config.ablations
        self.semantic = (
            SemanticAligner(
                config.embed_dim,
                config.latent_dim,
                config.heads,
                config.text_decoder_layers,
                config.ff_ratio,
                config.dropout,
            )
            if flags.use_semantic_aligner
            else None
        )
        self.temporal_encoder = (
            TemporalEncoder(
                config.embed_dim,
                config.heads,
                config.encoder_layers,
                config.ff_ratio,
                config.dropout,
            )
            if flags.use_temporal_aligner
            else None
        )
        self.temporal_decoder = (
            TemporalDecoder(
                config.embed_dim,
                config.heads,
                config.decoder_layers,
                config.ff_ratio,
                config.dropout,
            )
            if flags.use_autoregression and include_decoder
            else None
        )

    def refine_texts(self, texts: torch.Tensor, videos: torch.Tensor) -> torch.Tensor:
        """Apply the text refiner per candidate; identity when ablated."""
        if self.semantic is None:
            return texts
        batch, k, dim = texts.shape
        flat_texts = texts.reshape(batch * k, dim)
        flat_videos = videos.repeat_interleave(k, dim=0)
        return self.semantic(flat_texts, flat_videos).reshape(batch, k, dim)

    def encode_videos(self, videos: torch.Tensor) -> AlignedVideo:
        """Temporal refinement; the identity (with frame-mean pooling) when ablated."""
        if self.temporal_encoder is None:
            return AlignedVideo(refined=videos, pooled=videos.mean(dim=-2))
        return self.temporal_encoder(videos)

    def candidate_scores(
        self, videos: torch.Tensor, texts: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, AlignedVideo]:
        """Raw cosine scores (B, k) plus the refined texts and encoded videos."""
        if videos.dim() != 3 or texts.dim() != 3:
            raise ContractError("expected videos (B, T, C) and texts (B, k, C)")
        if videos.shape[-1] != self.config.embed_dim or texts.shape[-1] != self.config.embed_dim:
            raise ContractError(f"width mismatch: model expects {self.config.embed_dim}")
        refined_texts = self.refine_texts(texts, videos)
        encoded = self.encode_videos(videos)
        raw = cosine_scores_batch(encoded.pooled, refined_texts)
        return raw, refined_texts, encoded


def architecture_hash(config: TrainingConfig) -> str:
    arch = {
        "embed_dim": config.embed_dim,
        "latent_dim": config.latent_dim,
        "heads": config.heads,
        "encoder_layers": config.encoder_layers,
        "decoder_layers": config.decoder_layers,
        "text_decoder_layers": config.text_decoder_layers,
        "ff_ratio": config.ff_ratio,
        "ablations": config.ablations.to_dict(),
    }
    return hashlib.sha256(json.dumps(arch, sort_keys=True).encode()).hexdigest()


def checkpoint_save(
    model: AdapterModel,
    config: TrainingConfig,
    path: str | Path,
    inference_only: bool = False,
) -> Path:
    """Persist all parameters plus the config and its architecture hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state: dict[str, Any] = {}
    for name in ("semantic", "temporal_encoder", "temporal_decoder"):
        module = getattr(model, name)
        if module is not None and not (inference_only and name == "temporal_decoder"):
            state[name] = module.state_dict()
    payload = {
        "format_version": 1,
        "config": config.to_dict(),
        "arch_hash": architecture_hash(config),
        "inference_only": bool(inference_only),
        "state": state,
    }
    torch.save(payload, path)
    return path


def checkpoint_load(path: str | Path) -> tuple[AdapterModel, TrainingConfig]:
    """Load and validate a checkpoint; no partial loads."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu")
    config = TrainingConfig.from_dict(payload["config"])
    if payload.get("arch_hash") != architecture_hash(config):
        raise IncompatibleCheckpointError(
            f"checkpoint {path}: architecture hash does not match its config"
        )
    model = AdapterModel(config, include_decoder=not payload.get("inference_only", False))
    for name in ("semantic", "temporal_encoder", "temporal_decoder"):
        module = getattr(model, name)
        if module is None:
            continue
        if name not in payload["state"]:
            raise IncompatibleCheckpointError(f"checkpoint {path}: missing state for {name}")
        try:
            module.load_state_dict(payload["state"][name], strict=True)
        except RuntimeError as exc:
            raise IncompatibleCheckpointError(f"checkpoint {path}: {exc}") from exc
    model.eval()
    return model, config


def export_inference_checkpoint(src: str | Path, dst: str | Path) -> Path:
    """Re-save a checkpoint without the training-only reconstruction decoder."""
    model, config = checkpoint_load(src)
    return checkpoint_save(model, config, dst, inference_only=True)


@dataclass
class _Example:
    video: torch.Tensor
    texts: torch.Tensor
    label: int
    category: str


def _load_examples(
    store: FeatureStore, records: list[QARecord], use_template: bool
) -> list[_Example]:
    prefix = "text" if use_template else "rawtext"
    examples = []
    for record in records:
        video = torch.from_numpy(store.get(f"video:{record.video_id}"))
        texts = torch.from_numpy(
            np.stack([store.get(f"{prefix}:{record.id}:{j}") for j in range(len(record.answers))])
        )
        examples.append(
            _Example(video=video, texts=texts, label=record.label, category=record.category)
        )
    return examples


def _open_split(store_dir: str | Path, split: str) -> tuple[FeatureStore, list[QARecord]]:
    store = FeatureStore(store_dir, split)
    qa_path = qa_records_path(Path(store_dir), split)
    if not qa_path.exists():
        raise DataError(f"no QA records for split {split!r} at {qa_path}")
    records = load_qa_records(qa_path)
    if not records:
        raise DataError(f"split {split!r} is empty")
    return store, records


def _check_dims(config: TrainingConfig, store: FeatureStore) -> None:
    store_dim = store.meta.get("dim")
    if store_dim is not None and int(store_dim) != config.embed_dim:
        raise ConfigError(
            f"store was extracted at dim {store_dim} but config.embed_dim is {config.embed_dim}"
        )


def train(
    config: TrainingConfig,
    store_dir: str | Path,
    out_dir: str | Path,
    split: str = "train",
) -> Path:
    """Run the training loop and return the final checkpoint path."""
    config.validate()
    store, records = _open_split(store_dir, split)
    _check_dims(config, store)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(config.seed)
    model = AdapterModel(config)
    model.train()
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=config.learning_rate) if params else None

    examples = _load_examples(store, records, config.ablations.use_template)
    # Batches need uniform candidate count and frame count; bucket by both.
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, example in enumerate(examples):
        buckets.setdefault((example.texts.shape[0], example.video.shape[0]), []).append(i)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    metrics_path = out_dir / "metrics.jsonl"
    last_path = out_dir / "last.pt"
    best_path = out_dir / "best.pt"
    last_saved: Optional[Path] = None
    best_loss = float("inf")
    step = 0
    stop = False

    with open(metrics_path, "w", encoding="utf-8") as metrics:
        for epoch in range(config.epochs):
            lr = config.learning_rate * config.lr_decay_factor ** (
                epoch // config.lr_decay_every_epochs
            )
            if optimizer is not None:
                for group in optimizer.param_groups:
                    group["lr"] = lr
            epoch_losses = []
            for key in sorted(buckets):
                order = rng.permutation(len(buckets[key]))
                indices = [buckets[key][i] for i in order]
                for lo in range(0, len(indices), config.batch_size):
                    chunk = indices[lo : lo + config.batch_size]
                    videos = torch.stack([examples[i].video for i in chunk])
                    texts = torch.stack([examples[i].texts for i in chunk])
                    labels = torch.tensor([examples[i].label for i in chunk])

                    raw, refined_texts, encoded = model.candidate_scores(videos, texts)
                    hinge = hinge_loss_batch(raw, labels, config.margin).mean()
                    if model.temporal_decoder is not None:
                        guidance = refined_texts[
                            torch.arange(len(chunk)), labels
                        ]
                        predicted = autoregress(
                            videos, guidance, encoded, model.temporal_decoder
                        )
                        mse = reconstruction_loss(predicted, videos).mean()
                    else:
                        mse = torch.zeros((), dtype=hinge.dtype)
                    total = total_loss(hinge, mse, config.gamma)

                    if not torch.isfinite(total):
                        reference = last_saved if last_saved else "none written yet"
                        raise NumericError(
                            f"non-finite loss at step {step}; last good checkpoint: {reference}"
                        )
                    if optimizer is not None:
                        optimizer.zero_grad()
                        total.backward()
                        optimizer.step()

                    metrics.write(
                        json.dumps(
                            {
                                "step": step,
                                "epoch": epoch,
                                "hinge": hinge.item(),
                                "mse": mse.item(),
                                "total": total.item(),
                                "lr": lr,
                            }
                        )
                        + "\n"
                    )
                    epoch_losses.append(total.item())
                    step += 1
                    if config.max_steps is not None and step >= config.max_steps:
                        stop = True
                        break
                if stop:
                    break
            checkpoint_save(model, config, last_path)
            last_saved = last_path
            if epoch_losses and float(np.mean(epoch_losses)) < best_loss:
                best_loss = float(np.mean(epoch_losses))
                checkpoint_save(model, config, best_path)
            if stop:
                break

    chosen = best_path if config.model_selection == "best" and best_path.exists() else last_path
    final = out_dir / CHECKPOINT_NAME
    payload = torch.load(chosen, map_location="cpu")
    torch.save(payload, final)
    return final


@dataclass
class EvalReport:
    """Accuracy overall and per category tag."""

    overall_accuracy: float
    per_category: dict[str, float]
    n_questions: int

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def evaluate_model(
    model: AdapterModel,
    store_dir: str | Path,
    split: str,
) -> tuple[EvalReport, list[int]]:
    """Score every question in a split; deterministic given model and data."""
    store, records = _open_split(store_dir, split)
    _check_dims(model.config, store)
    examples = _load_examples(store, records, model.config.ablations.use_template)
    model.eval()
    predictions = []
    hits: dict[str, list[int]] = {}
    with torch.no_grad():
        for example in examples:
            raw, _, _ = model.candidate_scores(
                example.video.unsqueeze(0), example.texts.unsqueeze(0)
            )
            choice = int(np.argmax(raw.squeeze(0).numpy()))
            predictions.append(choice)
            hits.setdefault(example.category, []).append(int(choice == example.label))
    per_category = {cat: float(np.mean(votes)) for cat, votes in sorted(hits.items())}
    n = len(examples)
    overall = float(sum(sum(votes) for votes in hits.values()) / n)
    return EvalReport(overall_accuracy=overall, per_category=per_category, n_questions=n), predictions


def evaluate(checkpoint_path: str | Path, store_dir: str | Path, split: str) -> EvalReport:
    model, _ = checkpoint_load(checkpoint_path)
    report, _ = evaluate_model(model, store_dir, split)
    return report


@dataclass
class InferenceResult:
    choice: int
    answer: str
    probs: list[float]
    sentences: list[str]


def infer(
    checkpoint_path: str | Path,
    question: str,
    answers: list[str],
    video_id: str,
    store_dir: str | Path,
    split: str,
    backend: EncoderBackend,
) -> InferenceResult:
    """Template -> embed -> refine -> encode once -> score -> argmax."""
    if len(answers) < 2:
        raise ContractError("need at least two candidate answers")
    model, config = checkpoint_load(checkpoint_path)
    store = FeatureStore(store_dir, split)
    _check_dims(config, store)
    if f"video:{video_id}" not in store:
        raise FeatureNotFoundError(f"video {video_id!r} not in split {split!r}")
    video = torch.from_numpy(store.get(f"video:{video_id}"))
    record = QARecord(
        id="query", video_id=video_id, question=question, answers=list(answers), label=0
    )
    sentences = candidate_sentences(record, config.ablations.use_template)
    if backend.dim != config.embed_dim:
        raise ConfigError(
            f"backend dim {backend.dim} differs from model embed_dim {config.embed_dim}"
        )
    texts = torch.from_numpy(backend.embed_sentences(sentences).astype(np.float32))
    model.eval()
    with torch.no_grad():
        raw, _, _ = model.candidate_scores(video.unsqueeze(0), texts.unsqueeze(0))
        probs = torch.softmax(raw.squeeze(0), dim=-1)
    choice = int(np.argmax(raw.squeeze(0).numpy()))
    return InferenceResult(
        choice=choice,
        answer=answers[choice],
        probs=[float(p) for p in probs],
        sentences=sentences,
    )
