"""Adapts frozen image-text embeddings to multiple-choice video QA.

Pipeline: rewrite QA pairs as declarative sentences, embed frames and
sentences once with a frozen encoder into an on-disk feature store, then
train two small adapters (a cross-attention text refiner and a temporal
encoder with an autoregressive reconstruction task) and score candidates by
cosine similarity.
"""

from videoqa_adapter.features import (
    DEFAULT_EMBED_DIM,
    EncoderBackend,
    FrameSamplePlan,
    StubEncoder,
    TextEmbedding,
    VideoFeatureSequence,
    embed_text,
    embed_video,
    get_backend,
    plan_frames,
)
from videoqa_adapter.matching import (
    CandidateScores,
    hinge_loss,
    predict,
    score_candidates,
    total_loss,
)
from videoqa_adapter.semantic import SemanticAligner
from videoqa_adapter.store import (
    FeatureStore,
    FeatureStoreWriter,
    synthesize_candidates,
)
from videoqa_adapter.templates import (
    EventDescription,
    QAPair,
    QuestionKind,
    batch_templates,
    classify_question,
    to_declarative,
)
from videoqa_adapter.temporal import (
    AlignedVideo,
    TemporalDecoder,
    TemporalEncoder,
    autoregress,
    feature_psnr,
    reconstruction_loss,
)
from videoqa_adapter.training import (
    Ablations,
    AdapterModel,
    EvalReport,
    QARecord,
    TrainingConfig,
    checkpoint_load,
    checkpoint_save,
    evaluate,
    evaluate_model,
    export_inference_checkpoint,
    infer,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Ablations",
    "AdapterModel",
    "AlignedVideo",
    "CandidateScores",
    "DEFAULT_EMBED_DIM",
    "EncoderBackend",
    "EvalReport",
    "EventDescription",
    "FeatureStore",
    "FeatureStoreWriter",
    "FrameSamplePlan",
    "QAPair",
    "QARecord",
    "QuestionKind",
    "SemanticAligner",
    "StubEncoder",
    "TemporalDecoder",
    "TemporalEncoder",
    "TextEmbedding",
    "TrainingConfig",
    "VideoFeatureSequence",
    "autoregress",
    "batch_templates",
    "checkpoint_load",
    "checkpoint_save",
    "classify_question",
    "embed_text",
    "embed_video",
    "evaluate",
    "evaluate_model",
    "export_inference_checkpoint",
    "feature_psnr",
    "get_backend",
    "hinge_loss",
    "infer",
    "plan_frames",
    "predict",
    "reconstruction_loss",
    "score_candidates",
    "synthesize_candidates",
    "to_declarative",
    "total_loss",
    "train",
    "__version__",
]
