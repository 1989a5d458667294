"""Clickbait scoring engine: corpus ingestion, features, models and scoring."""

from pathlib import Path

from . import _core
from ._core import (
    FEATURE_COUNT,
    ClickbaitError,
    Embeddings,
    IoError,
    Model,
    ParseError,
    SchemaError,
    Scorer,
    ValidationError,
    auc,
    balanced_class_weights,
    eda,
    evaluate,
    evaluate_scores,
    featurize,
    ingest,
    load_model,
    mlp_parameter_counts,
    tokenize,
    train,
    transport_cost,
)

# Installed wheels carry the lexicons next to the extension.
_bundled = Path(__file__).with_name("data")
if _bundled.is_dir():
    _core._set_package_data_dir(str(_bundled))

__all__ = [name for name in dir(_core) if not name.startswith("_")]
