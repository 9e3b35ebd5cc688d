"""Word tokenization and projection of character spans onto BIO token labels."""

from __future__ import annotations

import bisect
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import AnnotatedDocument, PhiSpan
from .labels import BIO_TAGS, I_CLASSES, OUTSIDE, TAG_TO_ID, bio_to_ranges, is_bio_valid

_CHUNK_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int


@dataclass
class TokenSequence:
    doc_id: str
    tokens: list[Token]
    labels: list[str] | None = None

    def label_ids(self) -> list[int]:
        return [TAG_TO_ID[t] for t in self.labels] if self.labels is not None else []

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class AlignmentReport:
    doc_id: str
    status: str = "aligned"
    reasons: list[str] = field(default_factory=list)

    @property
    def dropped(self) -> bool:
        return bool(self.reasons)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def tokenize(text: str) -> list[Token]:
    """Split on whitespace, then peel leading and trailing punctuation.

    Each peeled character becomes its own token; punctuation inside a chunk
    (``2067-05-03``, ``j.doe@x.org``) stays attached.
    """
    tokens: list[Token] = []
    for m in _CHUNK_RE.finditer(text):
        s, e = m.start(), m.end()
        head = []
        while s < e and _is_punct(text[s]):
            head.append(Token(text[s], s, s + 1))
            s += 1
        tail = []
        while e > s and _is_punct(text[e - 1]):
            tail.append(Token(text[e - 1], e - 1, e))
            e -= 1
        tokens.extend(head)
        if s < e:
            tokens.append(Token(text[s:e], s, e))
        tokens.extend(reversed(tail))
    return tokens


def _span_problem(span: PhiSpan, tokens: list[Token], hit: list[int]) -> str | None:
    if not hit:
        return "covers no token"
    first, last = tokens[hit[0]], tokens[hit[-1]]
    if first.start < span.start:
        return f"starts inside token {first.surface!r}"
    if last.end > span.end:
        return f"ends inside token {last.surface!r}"
    if "B-" + span.phi_type not in TAG_TO_ID:
        return f"no B-{span.phi_type} tag in the tag set"
    if len(hit) > 1 and span.phi_type not in I_CLASSES:
        return f"spans {len(hit)} tokens but there is no I-{span.phi_type} tag"
    return None


def align(doc: AnnotatedDocument) -> tuple[TokenSequence | None, AlignmentReport]:
    """Label each token B-X / I-X / O from the document's gold spans.

    A document is dropped (sequence ``None``) when any span boundary falls
    strictly inside a token or a span needs a tag the inventory lacks.
    """
    tokens = tokenize(doc.text)
    labels = [OUTSIDE] * len(tokens)
    report = AlignmentReport(doc.doc_id)
    starts = [t.start for t in tokens]

    for span in doc.spans:
        i = bisect.bisect_right(starts, span.start) - 1
        if i < 0 or tokens[i].end <= span.start:
            i += 1
        hit = []
        while i < len(tokens) and tokens[i].start < span.end:
            hit.append(i)
            i += 1
        problem = _span_problem(span, tokens, hit)
        if problem:
            report.reasons.append(f"{span.span_id or span}: {problem}")
            continue
        labels[hit[0]] = "B-" + span.phi_type
        for j in hit[1:]:
            labels[j] = "I-" + span.phi_type
    if report.reasons:
        report.status = "dropped"
        return None, report
    return TokenSequence(doc.doc_id, tokens, labels), report


def snapped_spans(doc: AnnotatedDocument, tokens: list[Token]) -> list[tuple[str, int, int]]:
    """Gold spans as (class, first_token, last_token), by token-range overlap."""
    out = []
    for sp in doc.spans:
        idx = [i for i, t in enumerate(tokens) if t.start < sp.end and t.end > sp.start]
        if idx:
            out.append((sp.phi_type, idx[0], idx[-1]))
    return out


def align_corpus(docs: Iterable[AnnotatedDocument]) -> tuple[list[TokenSequence], list[AlignmentReport]]:
    sequences, reports = [], []
    for doc in docs:
        seq, rep = align(doc)
        reports.append(rep)
        if seq is not None:
            sequences.append(seq)
    return sequences, reports


# ---------------------------------------------------------------- files


def write_sequences(sequences: Iterable[TokenSequence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            rec = {
                "doc_id": seq.doc_id,
                "tokens": [[t.surface, t.start, t.end] for t in seq.tokens],
                "labels": seq.labels,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_sequences(path: str | Path) -> list[TokenSequence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            tokens = [Token(s, a, b) for s, a, b in rec["tokens"]]
            out.append(TokenSequence(rec["doc_id"], tokens, rec["labels"]))
    return out


def write_alignment_report(reports: Iterable[AlignmentReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("doc_id\tstatus\treasons\n")
        for rep in reports:
            fh.write(f"{rep.doc_id}\t{rep.status}\t{' | '.join(rep.reasons)}\n")


def read_alignment_report(path: str | Path) -> list[AlignmentReport]:
    out = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            doc_id, status, reasons = line.rstrip("\n").split("\t")
            out.append(AlignmentReport(doc_id, status, reasons.split(" | ") if reasons else []))
    return out


__all__ = [
    "AlignmentReport", "Token", "TokenSequence", "align", "align_corpus", "bio_to_ranges",
    "is_bio_valid", "snapped_spans", "tokenize", "BIO_TAGS",
]
