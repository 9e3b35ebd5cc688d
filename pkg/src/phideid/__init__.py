"""phideid: BIO-tagging transformer toolkit for de-identifying clinical notes."""

from __future__ import annotations

__version__ = "0.1.0"

from .align import Token, TokenSequence, align, align_corpus, tokenize
from .corpus import AnnotatedDocument, PhiSpan, parse_document, read_corpus, split_corpus, write_document
from .deid import DeidPolicy, apply_policy, invert_manifest
from .evaluation import EvalReport, evaluate, render_report, score
from .labels import BIO_TAGS, CLASS_LABELS, PHI_CLASSES, collapse_bio
from .model import ModelConfig, TaggerModel, count_parameters, init_model, preset
from .subword import Vocabulary, build_vocab, encode
from .synthetic import generate_synthetic_corpus
from .training import HyperParams, SweepGrid, sweep, train

__all__ = [
    "AnnotatedDocument", "BIO_TAGS", "CLASS_LABELS", "DeidPolicy", "EvalReport", "HyperParams",
    "ModelConfig", "PHI_CLASSES", "PhiSpan", "SweepGrid", "TaggerModel", "Token", "TokenSequence",
    "Vocabulary", "align", "align_corpus", "apply_policy", "build_vocab", "collapse_bio",
    "count_parameters", "encode", "evaluate", "generate_synthetic_corpus", "init_model",
    "invert_manifest", "parse_document", "preset", "read_corpus", "render_report", "score",
    "split_corpus", "sweep", "tokenize", "train", "write_document",
]
