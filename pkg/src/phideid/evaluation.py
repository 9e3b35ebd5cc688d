"""Token-level scoring over collapsed classes, report rendering and model inference."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError
from .labels import CLASS_LABELS, NON_PHI, PHI_CLASSES, TAG_ID_TO_CLASS_ID, bio_to_ranges, collapse_bio
from .subword import SubwordEncoding, encode, interior_window

FORMATS = ("table-text", "delimited", "bar-data")


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class ClassMetrics:
    label: str
    tp: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)


@dataclass
class EvalReport:
    split: str
    per_class: list[ClassMetrics]
    correct: int
    total: int
    model: str = ""

    @property
    def tp(self) -> int:
        return sum(c.tp for c in self.per_class)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, sum(c.tp + c.fp for c in self.per_class))

    @property
    def recall(self) -> float:
        return _ratio(self.tp, sum(c.tp + c.fn for c in self.per_class))

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)

    @property
    def accuracy(self) -> float:
        return _ratio(self.correct, self.total)

    def row(self, label: str) -> ClassMetrics:
        for c in self.per_class:
            if c.label == label:
                return c
        return ClassMetrics(label, 0, 0, 0)

    def summary(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "accuracy": self.accuracy}


def _flatten(gold, pred) -> tuple[list[str], list[str]]:
    if len(gold) != len(pred):
        raise InputError(f"gold has {len(gold)} sequences, pred has {len(pred)}")
    g_all, p_all = [], []
    for i, (g, p) in enumerate(zip(gold, pred)):
        if isinstance(g, str) or isinstance(p, str):
            raise InputError("score expects lists of label sequences")
        if len(g) != len(p):
            raise InputError(f"sequence {i}: gold length {len(g)} != pred length {len(p)}")
        g_all.extend(g)
        p_all.extend(p)
    return g_all, p_all


def score(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]], split: str = "", model: str = "") -> EvalReport:
    """Micro-averaged PHI precision/recall/F1 plus all-token accuracy.

    Non-PHI is excluded from precision and recall but counts toward accuracy.
    """
    g_all, p_all = _flatten(gold, pred)
    unknown = (set(g_all) | set(p_all)) - set(CLASS_LABELS)
    if unknown:
        raise InputError(f"labels outside the class vocabulary: {sorted(unknown)}")
    tp, fp, fn = Counter(), Counter(), Counter()
    correct = 0
    for g, p in zip(g_all, p_all):
        if g == p:
            correct += 1
            if g != NON_PHI:
                tp[g] += 1
            continue
        if p != NON_PHI:
            fp[p] += 1
        if g != NON_PHI:
            fn[g] += 1
    rows = [ClassMetrics(c, tp[c], fp[c], fn[c]) for c in PHI_CLASSES if tp[c] or fp[c] or fn[c]]
    return EvalReport(split, rows, correct, len(g_all), model)


def span_score(gold_tags: Sequence[Sequence[str]], pred_tags: Sequence[Sequence[str]]) -> dict:
    """Strict entity-level scores from BIO tag sequences (exact class and extent)."""
    g_all, p_all = _flatten(gold_tags, pred_tags)
    offset, gold_set, pred_set = 0, set(), set()
    for g, p in zip(gold_tags, pred_tags):
        gold_set.update((c, offset + a, offset + b) for c, a, b in bio_to_ranges(g))
        pred_set.update((c, offset + a, offset + b) for c, a, b in bio_to_ranges(p))
        offset += len(g)
    hit = len(gold_set & pred_set)
    p, r = _ratio(hit, len(pred_set)), _ratio(hit, len(gold_set))
    return {"precision": p, "recall": r, "f1": f1_score(p, r), "gold": len(gold_set), "pred": len(pred_set)}


# ---------------------------------------------------------------- inference


def predict_logits(model, encodings: Sequence[SubwordEncoding], batch_size: int = 32) -> list[np.ndarray]:
    """Eval-mode logits for each window, trimmed to the window's length."""
    out: list[np.ndarray] = [None] * len(encodings)  # type: ignore[list-item]
    order = sorted(range(len(encodings)), key=lambda i: len(encodings[i]))
    for s in range(0, len(order), batch_size):
        idx = order[s:s + batch_size]
        T = max(len(encodings[i]) for i in idx)
        ids = np.zeros((len(idx), T), dtype=np.int64)
        mask = np.zeros((len(idx), T), dtype=np.int64)
        for row, i in enumerate(idx):
            n = len(encodings[i])
            ids[row, :n] = encodings[i].input_ids
            mask[row, :n] = 1
        logits = model.logits(ids, mask)
        for row, i in enumerate(idx):
            out[i] = logits[row, :len(encodings[i])]
    return out


def word_level_predictions(logits: Sequence[np.ndarray], encodings: Sequence[SubwordEncoding],
                           n_words: dict[str, int] | None = None) -> dict[str, list[str]]:
    """Collapsed class per word, read at its first subword in its most interior window."""
    if len(logits) != len(encodings):
        raise InputError("one logits array per encoding is required")
    by_doc: dict[str, list[int]] = {}
    for k, enc in enumerate(encodings):
        by_doc.setdefault(enc.doc_id, []).append(k)
    out = {}
    for doc_id, ks in by_doc.items():
        ks.sort(key=lambda k: encodings[k].window_index)
        chosen = interior_window([encodings[k] for k in ks])
        count = n_words[doc_id] if n_words is not None else (max(chosen) + 1 if chosen else 0)
        labels = []
        for w in range(count):
            if w not in chosen:
                raise InputError(f"word {w} of {doc_id!r} is not covered by any window")
            win, pos = chosen[w]
            tag = int(np.argmax(logits[ks[win]][pos]))
            labels.append(CLASS_LABELS[TAG_ID_TO_CLASS_ID[tag]])
        out[doc_id] = labels
    return out


def evaluate(model, sequences, vocab, max_len: int, split: str = "", model_name: str = "",
             batch_size: int = 32) -> tuple[EvalReport, dict[str, list[str]]]:
    encodings = [e for seq in sequences for e in encode(seq, vocab, max_len)]
    logits = predict_logits(model, encodings, batch_size)
    preds = word_level_predictions(logits, encodings, {s.doc_id: len(s.tokens) for s in sequences})

    gold = [collapse_bio(s.labels) for s in sequences]
    pred = [preds[s.doc_id] for s in sequences]
    return score(gold, pred, split, model_name), preds


# ---------------------------------------------------------------- rendering


def render_report(report: EvalReport | Sequence[EvalReport], fmt: str = "table-text") -> str:
    reports = [report] if isinstance(report, EvalReport) else list(report)
    if fmt == "table-text":
        return "\n".join(_table(r) for r in reports)
    if fmt == "delimited":
        return "".join(_delimited(r) for r in reports)
    if fmt == "bar-data":
        return "".join(
            f"{r.model or 'model'}\t{c.label}\t{c.f1:.4f}\n" for r in reports for c in r.per_class if c.support
        )
    raise ConfigError(f"unknown report format {fmt!r}; choose from {FORMATS}")


def _table(r: EvalReport) -> str:
    title = " ".join(x for x in (r.model, r.split) if x) or "evaluation"
    lines = [
        f"== {title} ==",
        f"{'Precision':>9}  {'Recall':>9}  {'F1-Score':>9}  {'Accuracy':>9}",
        f"{r.precision:>9.4f}  {r.recall:>9.4f}  {r.f1:>9.4f}  {r.accuracy:>9.4f}",
        "",
        f"{'Class':<16}{'Support':>9}  {'Precision':>9}  {'Recall':>9}  {'F1-Score':>9}",
    ]
    for c in sorted(r.per_class, key=lambda c: (-c.support, c.label)):
        lines.append(f"{c.label:<16}{c.support:>9}  {c.precision:>9.4f}  {c.recall:>9.4f}  {c.f1:>9.4f}")
    return "\n".join(lines) + "\n"


def _delimited(r: EvalReport) -> str:
    lines = [
        f"report\t{r.model}\t{r.split}",
        "overall\tprecision\trecall\tf1\taccuracy\tcorrect\ttotal",
        f"overall\t{r.precision:.4f}\t{r.recall:.4f}\t{r.f1:.4f}\t{r.accuracy:.4f}\t{r.correct}\t{r.total}",
        "class\tlabel\tsupport\tprecision\trecall\tf1\ttp\tfp\tfn",
    ]
    for c in r.per_class:
        lines.append(
            f"class\t{c.label}\t{c.support}\t{c.precision:.4f}\t{c.recall:.4f}\t{c.f1:.4f}\t{c.tp}\t{c.fp}\t{c.fn}"
        )
    return "\n".join(lines) + "\n"


def parse_delimited(text: str) -> list[EvalReport]:
    """Rebuild reports from delimited output; metrics are recomputed from the counts."""
    reports: list[EvalReport] = []
    for line in text.splitlines():
        if not line:
            continue
        f = line.split("\t")
        if f[0] == "report":
            reports.append(EvalReport(f[2], [], 0, 0, f[1]))
        elif f[0] == "overall" and f[1] != "precision":
            reports[-1].correct, reports[-1].total = int(f[5]), int(f[6])
        elif f[0] == "class" and f[1] != "label":
            reports[-1].per_class.append(ClassMetrics(f[1], int(f[6]), int(f[7]), int(f[8])))
    return reports


def parse_bar_data(text: str) -> list[tuple[str, str, float]]:
    rows = []
    for line in text.splitlines():
        if line:
            model, label, f1 = line.split("\t")
            rows.append((model, label, float(f1)))
    return rows
