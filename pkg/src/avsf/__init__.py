"""Audio-visual speech forensics: detect face-forgery videos by the mismatch
between visual and audio speech representations."""

from .alignment import (
    AlignmentConfig,
    MatchResult,
    cosine,
    score_dtw,
    score_fixed_offset,
    score_plain,
    score_sequences,
)
from .cluster import Codebook, ClusterAssignment, CodebookKMeans, assign, kmeans_fit
from .encoder import (
    MaskSpec,
    MaskedPredictionEncoder,
    ToyEncoder,
    embed,
    forward,
    grad_masked_nll,
    masked_nll,
    train_encoder,
)
from .evaluation import (
    EvalReport,
    ScoredVideo,
    auc,
    calibrate_threshold,
    classify,
    evaluate,
    robustness_sweep,
)
from .features import MfccConfig, MfccExtractor, mfcc, stack_frames
from .io import (
    AudioWaveform,
    EmbeddingSequence,
    Manifest,
    ManifestEntry,
    load_manifest,
    read_embeddings,
    read_wav,
    write_embeddings,
    write_report,
)
from .synthetic import SyntheticWorld, build_benchmark, gen_forgery, gen_real, make_world

__version__ = "0.1.0"

__all__ = [
    "AlignmentConfig", "MatchResult", "cosine", "score_dtw", "score_fixed_offset",
    "score_plain", "score_sequences",
    "Codebook", "ClusterAssignment", "CodebookKMeans", "assign", "kmeans_fit",
    "MaskSpec", "MaskedPredictionEncoder", "ToyEncoder", "embed", "forward",
    "grad_masked_nll", "masked_nll", "train_encoder",
    "EvalReport", "ScoredVideo", "auc", "calibrate_threshold", "classify",
    "evaluate", "robustness_sweep",
    "MfccConfig", "MfccExtractor", "mfcc", "stack_frames",
    "AudioWaveform", "EmbeddingSequence", "Manifest", "ManifestEntry",
    "load_manifest", "read_embeddings", "read_wav", "write_embeddings",
    "write_report",
    "SyntheticWorld", "build_benchmark", "gen_forgery", "gen_real", "make_world",
    "__version__",
]
