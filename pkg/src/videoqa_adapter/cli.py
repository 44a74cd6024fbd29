"""Command-line interface.

Subcommands cover the whole offline pipeline:

    make-templates    rewrite QA pairs as declarative sentences
    extract-features  embed frames and candidate texts into a feature store
    train             fit the adapters on a prepared store
    eval              score a split and write an accuracy report
    infer             answer one question for one stored video

Exit codes: 0 success, 1 data error, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from videoqa_adapter.errors import AdapterError
from videoqa_adapter.features import DEFAULT_EMBED_DIM, FrameSamplePlan, get_backend
from videoqa_adapter.pipeline import extract_features, make_templates_file
from videoqa_adapter.store import FeatureStore
from videoqa_adapter.training import TrainingConfig, evaluate, infer, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="videoqa-adapter",
        description="Adapt frozen image-text embeddings to multiple-choice video QA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-templates", help="rewrite QA pairs as declarative sentences")
    p.add_argument("--in", dest="in_path", required=True, help="input QA JSONL")
    p.add_argument("--out", dest="out_path", required=True, help="output JSONL with sentences")

    p = sub.add_parser("extract-features", help="embed videos and texts into a store")
    p.add_argument("--videos", required=True, help="directory of <video_id>.npy frame arrays")
    p.add_argument("--qa", required=True, help="QA JSONL file")
    p.add_argument("--plan", default="8x16", help="frame plan, e.g. 8x16 or uniform:128")
    p.add_argument("--backend", default="stub", help="encoder backend name")
    p.add_argument("--dim", type=int, default=DEFAULT_EMBED_DIM, help="embedding width")
    p.add_argument("--out", dest="out_dir", required=True, help="store directory")
    p.add_argument("--split", default="train")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train the adapters")
    p.add_argument("--config", required=True, help="TrainingConfig JSON file")
    p.add_argument("--store", required=True, help="feature store directory")
    p.add_argument("--out", dest="out_dir", required=True, help="checkpoint directory")
    p.add_argument("--split", default="train")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--report", help="write the report JSON here")

    p = sub.add_parser("infer", help="answer one question for one stored video")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--answers", required=True, help="comma-separated candidates")
    p.add_argument("--video", required=True, help="video id present in the store")
    p.add_argument("--store", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--backend", help="encoder backend (defaults to the store's)")
    return parser


def _cmd_make_templates(args) -> int:
    count = make_templates_file(args.in_path, args.out_path)
    print(f"wrote {count} records to {args.out_path}")
    return 0


def _cmd_extract_features(args) -> int:
    plan = FrameSamplePlan.parse(args.plan)
    backend = get_backend(args.backend, dim=args.dim)
    out = extract_features(
        videos_dir=args.videos,
        qa_path=args.qa,
        plan=plan,
        backend=backend,
        out_dir=args.out_dir,
        split=args.split,
        seed=args.seed,
    )
    print(f"feature store committed at {out} (split {args.split})")
    return 0


def _cmd_train(args) -> int:
    config = TrainingConfig.from_json_file(args.config)
    checkpoint = train(config, args.store, args.out_dir, split=args.split)
    print(f"checkpoint written to {checkpoint}")
    return 0


def _cmd_eval(args) -> int:
    report = evaluate(args.ckpt, args.store, args.split)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_infer(args) -> int:
    answers = [a.strip() for a in args.answers.split(",") if a.strip()]
    store_meta = FeatureStore(args.store, args.split).meta
    backend_name = args.backend or store_meta.get("backend", "stub")
    backend = get_backend(backend_name, dim=int(store_meta.get("dim", DEFAULT_EMBED_DIM)))
    result = infer(
        checkpoint_path=args.ckpt,
        question=args.question,
        answers=answers,
        video_id=args.video,
        store_dir=args.store,
        split=args.split,
        backend=backend,
    )
    print(
        json.dumps(
            {
                "choice": result.choice,
                "answer": result.answer,
                "probs": result.probs,
                "sentences": result.sentences,
            },
            indent=2,
        )
    )
    return 0


_HANDLERS = {
    "make-templates": _cmd_make_templates,
    "extract-features": _cmd_extract_features,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
