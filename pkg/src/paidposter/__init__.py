"""Detection of paid posters in news-comment corpora.

Pipeline: ingest -> clean -> per-user features -> RBF SVM -> evaluation.
"""

from .corpus import (
    NORMAL,
    PAID,
    CleaningConfig,
    CommentRecord,
    Corpus,
    UserProfile,
    clean,
    group_by_user,
    ingest,
    load_labels,
)
from .evaluate import ConfusionMatrix, confusion, metrics
from .features import FeatureVector, extract
from .semantics import Segmenter, SimilarityConfig, count_similar_pairs, segment
from .svm import SvmModel, TrainConfig, predict, train

__version__ = "0.1.0"

__all__ = [
    "NORMAL", "PAID", "CleaningConfig", "CommentRecord", "Corpus", "UserProfile",
    "clean", "group_by_user", "ingest", "load_labels", "ConfusionMatrix", "confusion",
    "metrics", "FeatureVector", "extract", "Segmenter", "SimilarityConfig",
    "count_similar_pairs", "segment", "SvmModel", "TrainConfig", "predict", "train",
]
