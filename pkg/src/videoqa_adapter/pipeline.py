"""Offline preparation: sentence generation and one-shot feature extraction.

extract_features embeds every video (frames picked by the sampling plan) and
every candidate text once, then commits them to the feature store together
with a copy of the QA records, so training and evaluation never call an
encoder again.  Both text variants are stored per candidate: the templated
declarative sentence (key "text:<record>:<j>") and the raw question+answer
concatenation (key "rawtext:<record>:<j>") used when the template stage is
ablated or the question is empty (caption-style data).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from videoqa_adapter.errors import DataError
from videoqa_adapter.features import (
    EncoderBackend,
    FrameSamplePlan,
    embed_video,
    plan_frames,
)
from videoqa_adapter.store import FeatureStoreWriter, read_jsonl, write_qa_records
from videoqa_adapter.templates import QAPair, to_declarative
from videoqa_adapter.training import QARecord, load_qa_records, raw_candidate_text


def make_templates_file(in_path: str | Path, out_path: str | Path) -> int:
    """Rewrite a QA JSONL file, adding sentences and fallback flags per record."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for record in read_jsonl(in_path):
            if "question" not in record or "answers" not in record:
                raise DataError(f"{in_path}: record needs 'question' and 'answers'")
            descriptions = [
                to_declarative(QAPair(record["question"], answer))
                for answer in record["answers"]
            ]
            record = dict(record)
            record["sentences"] = [d.text for d in descriptions]
            record["used_fallback"] = [d.used_fallback for d in descriptions]
            out.write(json.dumps(record) + "\n")
            count += 1
    return count


def _load_video_frames(videos_dir: Path, video_id: str) -> np.ndarray:
    path = videos_dir / f"{video_id}.npy"
    if not path.exists():
        raise DataError(f"no video file for id {video_id!r} at {path}")
    frames = np.load(path)
    if frames.ndim < 2 or frames.shape[0] < 1:
        raise DataError(f"video {video_id!r}: expected a (frames, ...) array")
    return frames


def extract_features(
    videos_dir: str | Path,
    qa_path: str | Path,
    plan: FrameSamplePlan,
    backend: EncoderBackend,
    out_dir: str | Path,
    split: str = "train",
    seed: int = 0,
) -> Path:
    """Embed all videos and candidate texts for one split and commit the store."""
    videos_dir = Path(videos_dir)
    out_dir = Path(out_dir)
    records = load_qa_records(qa_path)
    if not records:
        raise DataError(f"{qa_path} holds no records")

    meta: dict[str, Any] = {
        "dim": backend.dim,
        "backend": backend.name,
        "plan": {"num_anchors": plan.num_anchors, "window": plan.window},
        "seed": seed,
        "split": split,
    }
    with FeatureStoreWriter(out_dir, split, meta=meta) as writer:
        for video_id in sorted({r.video_id for r in records}):
            frames = _load_video_frames(videos_dir, video_id)
            indices = plan_frames(frames.shape[0], plan)
            sequence = embed_video(frames[indices], backend, video_id)
            writer.put(f"video:{video_id}", sequence.features)
        for record in records:
            _put_candidate_texts(writer, record, backend)
    write_qa_records(out_dir, split, [_record_dict(r) for r in records])
    return out_dir


def _put_candidate_texts(writer: FeatureStoreWriter, record: QARecord, backend: EncoderBackend) -> None:
    raw = [raw_candidate_text(record.question, a) for a in record.answers]
    raw_vectors = backend.embed_sentences(raw)
    for j, vector in enumerate(raw_vectors):
        writer.put(f"rawtext:{record.id}:{j}", vector)
    if record.question.strip():
        sentences = [
            to_declarative(QAPair(record.question, a)).text for a in record.answers
        ]
        vectors = backend.embed_sentences(sentences)
        for j, vector in enumerate(vectors):
            writer.put(f"text:{record.id}:{j}", vector)


def _record_dict(record: QARecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "video_id": record.video_id,
        "question": record.question,
        "answers": record.answers,
        "label": record.label,
        "category": record.category,
    }
