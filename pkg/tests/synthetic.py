"""Synthetic fixtures shared by training and acceptance tests.

The planted-correlation set embeds the correct answer near the mean frame
embedding of its video, so cosine matching is learnable (and a linear scorer
already separates it at low noise).  The zero-shot reference below is an
independent re-implementation of frozen-embedding cosine matching: it parses
the store files by hand and scores with plain numpy, sharing no code with the
library paths it checks.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from videoqa_adapter.store import FeatureStoreWriter, write_qa_records


def build_planted_store(
    directory: Path,
    split: str = "train",
    n_items: int = 50,
    k: int = 4,
    frames: int = 6,
    dim: int = 32,
    frame_noise: float = 0.25,
    text_noise: float = 1.2,
    seed: int = 0,
) -> list[dict]:
    """Write a store + QA records where the correct answer tracks the video."""
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    with FeatureStoreWriter(directory, split, meta={"dim": dim, "backend": "planted", "seed": seed}) as writer:
        for i in range(n_items):
            base = rng.standard_normal(dim)
            video = base + frame_noise * rng.standard_normal((frames, dim))
            label = int(rng.integers(k))
            texts = rng.standard_normal((k, dim))
            texts[label] = base + text_noise * rng.standard_normal(dim)
            writer.put(f"video:v{i}", video.astype(np.float32))
            for j in range(k):
                writer.put(f"text:q{i}:{j}", texts[j].astype(np.float32))
                writer.put(f"rawtext:q{i}:{j}", texts[j].astype(np.float32))
            records.append(
                {
                    "id": f"q{i}",
                    "video_id": f"v{i}",
                    "question": "Which synthetic event does the clip show?",
                    "answers": [f"event {i}-{j}" for j in range(k)],
                    "label": label,
                    "category": "B" if i % 2 == 0 else "F",
                }
            )
    write_qa_records(directory, split, records)
    return records


def zero_shot_reference(directory: Path, split: str, prefix: str = "text") -> list[int]:
    """Frozen-embedding cosine argmax, re-derived from the raw store files."""
    entries = {}
    manifest = Path(directory) / f"{split}.manifest.jsonl"
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if entry.get("kind") == "record":
            entries[entry["key"]] = entry
    blob = (Path(directory) / f"{split}.bin").read_bytes()

    def fetch(key: str) -> np.ndarray:
        entry = entries[key]
        lo = entry["offset"]
        payload = blob[lo : lo + entry["nbytes"]]
        return np.frombuffer(payload, dtype="<f4").reshape(entry["shape"]).astype(np.float64)

    predictions = []
    qa_path = Path(directory) / f"{split}.qa.jsonl"
    for line in qa_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        video = fetch(f"video:{record['video_id']}")
        pooled = video.mean(axis=0)
        scores = []
        for j in range(len(record["answers"])):
            text = fetch(f"{prefix}:{record['id']}:{j}")
            scores.append(
                float(np.dot(pooled, text) / (np.linalg.norm(pooled) * np.linalg.norm(text)))
            )
        predictions.append(int(np.argmax(scores)))
    return predictions


def reference_accuracy(directory: Path, split: str, prefix: str = "text") -> float:
    predictions = zero_shot_reference(directory, split, prefix)
    qa_path = Path(directory) / f"{split}.qa.jsonl"
    labels = [
        json.loads(line)["label"]
        for line in qa_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    return float(np.mean([p == y for p, y in zip(predictions, labels)]))
