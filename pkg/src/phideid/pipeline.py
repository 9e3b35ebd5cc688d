"""Glue between the corpus, encoding, training and evaluation stages."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .align import TokenSequence, align_corpus
from .checkpoint import save_checkpoint
from .corpus import CorpusSplit, SPLIT_NAMES
from .evaluation import evaluate
from .model import ModelConfig, init_model
from .subword import Vocabulary, build_vocab, encode
from .training import HyperParams, RunRecord, train

log = logging.getLogger(__name__)


def sequences_by_split(sequences: Sequence[TokenSequence], split: CorpusSplit) -> dict[str, list[TokenSequence]]:
    """Aligned sequences grouped by split; dropped documents simply do not appear."""
    by_id = {s.doc_id: s for s in sequences}
    return {name: [by_id[d] for d in getattr(split, name) if d in by_id] for name in SPLIT_NAMES}


def vocab_for(sequences: Sequence[TokenSequence], vocab_size: int, min_freq: int = 2) -> Vocabulary:
    return build_vocab((t.surface for s in sequences for t in s.tokens), vocab_size, min_freq)


def encode_all(sequences: Sequence[TokenSequence], vocab: Vocabulary, max_len: int):
    return [e for s in sequences for e in encode(s, vocab, max_len)]


def sized_config(config: ModelConfig, vocab: Vocabulary, max_len: int) -> ModelConfig:
    """Fit vocabulary size and position table to the data actually used."""
    return replace(config, vocab_size=len(vocab), max_positions=max(config.max_positions, max_len)).validate()


@dataclass
class TrainRunner:
    """Train one grid point, score it on validation data and save its checkpoint.

    Plain data only so that it can be shipped to worker processes.
    """

    config: ModelConfig
    vocab_tokens: list[str]
    train_encodings: list
    val_sequences: list[TokenSequence]
    max_len: int
    out_dir: str | None = None
    model_name: str = "model"
    meta: dict = field(default_factory=dict)

    def __call__(self, hp: HyperParams) -> RunRecord:
        vocab = Vocabulary(self.vocab_tokens)
        model = init_model(self.config, hp.seed)
        model, record = train(model, self.train_encodings, hp)
        if self.val_sequences:
            report, _ = evaluate(model, self.val_sequences, vocab, self.max_len, "validation", self.model_name)
            record.val_metrics = report.summary()
        if self.out_dir:
            tag = hashlib.sha1(hp.key().encode()).hexdigest()[:10]
            path = Path(self.out_dir) / f"run-{tag}.ckpt"
            meta = dict(self.meta, hyperparams=hp.key(), max_len=self.max_len, seed=hp.seed)
            save_checkpoint(path, model, self.vocab_tokens, meta)
            record.checkpoint = str(path)
        log.info("run %s: val %s", hp, record.val_metrics)
        return record


def align_and_split(docs, split: CorpusSplit):
    sequences, reports = align_corpus(docs)
    return sequences_by_split(sequences, split), reports
