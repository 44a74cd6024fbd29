"""On-disk feature store: one JSONL manifest plus one flat float32 blob per split.

Features are extracted once, offline, and never recomputed during training.
Each manifest line describes a record (key, shape, dtype, byte offset/length,
sha256), so the format is language-neutral and memory-mappable.  Writes go to
temp files and commit with an atomic rename (blob first, manifest last);
readers open per call, so any number may run concurrently with one writer.

Also holds the caption-style negative synthesis: for datasets that provide
one caption per video, each video gets k negatives sampled without
replacement from other videos' captions with a recorded seed.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from videoqa_adapter.errors import (
    DataError,
    FeatureNotFoundError,
    StoreCorruptionError,
)

_DTYPE = np.dtype("<f4")


def _manifest_path(directory: Path, split: str) -> Path:
    return Path(directory) / f"{split}.manifest.jsonl"


def _blob_path(directory: Path, split: str) -> Path:
    return Path(directory) / f"{split}.bin"


def qa_records_path(directory: Path, split: str) -> Path:
    return Path(directory) / f"{split}.qa.jsonl"


class FeatureStoreWriter:
    """Single-writer, atomic-commit store builder.

    Use as a context manager; nothing becomes visible until a clean exit.
    """

    def __init__(self, directory: str | Path, split: str, meta: dict[str, Any] | None = None):
        self.directory = Path(directory)
        self.split = split
        self.meta = dict(meta or {})
        self._entries: list[dict[str, Any]] = []
        self._keys: set[str] = set()
        self._offset = 0
        self._blob_tmp: Path | None = None
        self._blob_file = None

    def __enter__(self) -> "FeatureStoreWriter":
        self.directory.mkdir(parents=True, exist_ok=True)
        self._blob_tmp = _blob_path(self.directory, self.split).with_suffix(".bin.tmp")
        self._blob_file = open(self._blob_tmp, "wb")
        return self

    def put(self, key: str, array: np.ndarray) -> None:
        if self._blob_file is None:
            raise RuntimeError("writer must be used as a context manager")
        if key in self._keys:
            raise DataError(f"duplicate store key {key!r}")
        array = np.ascontiguousarray(np.asarray(array, dtype=_DTYPE))
        if not np.isfinite(array).all():
            raise DataError(f"refusing to store non-finite values under {key!r}")
        payload = array.tobytes()
        self._blob_file.write(payload)
        self._entries.append(
            {
                "kind": "record",
                "key": key,
                "shape": list(array.shape),
                "dtype": "<f4",
                "offset": self._offset,
                "nbytes": len(payload),
                "sha256": hashlib.sha256(payload).hexdigest(),
            }
        )
        self._keys.add(key)
        self._offset += len(payload)

    def __exit__(self, exc_type, exc, tb) -> None:
        assert self._blob_file is not None and self._blob_tmp is not None
        self._blob_file.flush()
        os.fsync(self._blob_file.fileno())
        self._blob_file.close()
        self._blob_file = None
        if exc_type is not None:
            self._blob_tmp.unlink(missing_ok=True)
            return
        manifest = _manifest_path(self.directory, self.split)
        manifest_tmp = manifest.with_suffix(".jsonl.tmp")
        with open(manifest_tmp, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"kind": "meta", "version": 1, **self.meta}) + "\n")
            for entry in self._entries:
                fh.write(json.dumps(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(self._blob_tmp, _blob_path(self.directory, self.split))
        os.replace(manifest_tmp, manifest)


class FeatureStore:
    """Read side of the store; safe for concurrent readers."""

    def __init__(self, directory: str | Path, split: str):
        self.directory = Path(directory)
        self.split = split
        manifest = _manifest_path(self.directory, split)
        if not manifest.exists():
            raise FeatureNotFoundError(f"no manifest for split {split!r} in {self.directory}")
        self.meta: dict[str, Any] = {}
        self._index: dict[str, dict[str, Any]] = {}
        for line_no, line in enumerate(manifest.read_text(encoding="utf-8").splitlines()):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreCorruptionError(f"bad manifest line {line_no} in {manifest}") from exc
            if entry.get("kind") == "meta":
                self.meta = {k: v for k, v in entry.items() if k not in ("kind", "version")}
            elif entry.get("kind") == "record":
                self._index[entry["key"]] = entry
            else:
                raise StoreCorruptionError(f"unknown manifest entry kind in {manifest}: {entry.get('kind')!r}")

    def keys(self) -> list[str]:
        return list(self._index)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def get(self, key: str) -> np.ndarray:
        """Bit-exact copy of the stored array; distinguishes missing from corrupt."""
        if key not in self._index:
            raise FeatureNotFoundError(f"key {key!r} not in split {self.split!r}")
        entry = self._index[key]
        if entry.get("dtype") != "<f4":
            raise StoreCorruptionError(f"key {key!r}: unsupported dtype {entry.get('dtype')!r}")
        shape = tuple(entry["shape"])
        nbytes = int(entry["nbytes"])
        if int(np.prod(shape)) * _DTYPE.itemsize != nbytes:
            raise StoreCorruptionError(f"key {key!r}: shape/nbytes mismatch in manifest")
        with open(_blob_path(self.directory, self.split), "rb") as fh:
            fh.seek(int(entry["offset"]))
            payload = fh.read(nbytes)
        if len(payload) != nbytes:
            raise StoreCorruptionError(f"key {key!r}: blob truncated")
        if hashlib.sha256(payload).hexdigest() != entry["sha256"]:
            raise StoreCorruptionError(f"key {key!r}: checksum mismatch")
        return np.frombuffer(payload, dtype=_DTYPE).reshape(shape).copy()


def write_qa_records(directory: str | Path, split: str, records: list[dict[str, Any]]) -> Path:
    path = qa_records_path(Path(directory), split)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: bad JSON on line {line_no}") from exc


def synthesize_candidates(
    captions: list[tuple[str, str]],
    num_negatives: int = 4,
    seed: int = 0,
) -> list[dict[str, Any]]:
    """Build multiple-choice records from per-video captions.

    The video's own caption is the correct answer; negatives are sampled
    uniformly without replacement from other videos' captions with the given
    seed.  Records carry question="" and flow through the raw-text path.
    """
    if len(captions) <= num_negatives:
        raise DataError(
            f"need more than {num_negatives} captioned videos, got {len(captions)}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    for i, (video_id, caption) in enumerate(captions):
        other = np.array([j for j in range(len(captions)) if j != i])
        picked = rng.choice(other, size=num_negatives, replace=False)
        answers = [caption] + [captions[j][1] for j in picked]
        order = rng.permutation(len(answers))
        answers = [answers[j] for j in order]
        label = int(np.argwhere(order == 0)[0][0])
        records.append(
            {
                "id": f"cap{i:06d}",
                "video_id": video_id,
                "question": "",
                "answers": answers,
                "label": label,
                "category": "caption",
            }
        )
    return records
