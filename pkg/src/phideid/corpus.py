"""Reading and writing i2b2-style annotated documents, corpus splits and statistics.

Documents are stored one per XML file: the note text sits in a CDATA section
under ``TEXT`` and PHI annotations are empty elements under ``TAGS`` carrying
``id``, ``start``, ``end``, ``text`` and ``TYPE`` attributes.  Offsets count
Unicode code points.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from html import unescape
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .errors import (
    ConfigError,
    CorpusParseError,
    InputError,
    SpanBoundsError,
    SpanConsistencyError,
    SpanOverlapError,
    SplitSizeError,
)
from .labels import CLASS_LABELS, NON_PHI, PHI_CLASSES, collapse_bio

SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_RATIOS = (0.5, 0.1, 0.4)

# i2b2 2014 groups subtypes under a handful of element names
_CATEGORY = {
    "DOCTOR": "NAME", "PATIENT": "NAME", "USERNAME": "NAME",
    "PROFESSION": "PROFESSION",
    "CITY": "LOCATION", "STATE": "LOCATION", "STREET": "LOCATION", "ZIP": "LOCATION",
    "COUNTRY": "LOCATION", "HOSPITAL": "LOCATION", "ORGANIZATION": "LOCATION",
    "LOCATION-OTHER": "LOCATION",
    "AGE": "AGE", "DATE": "DATE",
    "PHONE": "CONTACT", "FAX": "CONTACT", "EMAIL": "CONTACT", "URL": "CONTACT",
    "MEDICALRECORD": "ID", "IDNUM": "ID", "DEVICE": "ID", "BIOID": "ID", "HEALTHPLAN": "ID",
}


@dataclass(frozen=True)
class PhiSpan:
    start: int
    end: int
    phi_type: str
    surface: str
    span_id: str = field(default="", compare=False)

    def __str__(self) -> str:
        name = f"{self.span_id} " if self.span_id else ""
        return f"{name}{self.phi_type}[{self.start}:{self.end}]"


@dataclass
class AnnotatedDocument:
    doc_id: str
    text: str
    spans: list[PhiSpan] = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, AnnotatedDocument):
            return NotImplemented
        return (self.doc_id, self.text, self.spans) == (other.doc_id, other.text, other.spans)


@dataclass
class CorpusSplit:
    train: list[str]
    validation: list[str]
    test: list[str]
    seed: int
    ratios: tuple[float, float, float] = DEFAULT_RATIOS

    def assignment(self) -> dict[str, str]:
        out = {}
        for name in SPLIT_NAMES:
            for doc_id in getattr(self, name):
                out[doc_id] = name
        return out

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def validate_spans(text: str, spans: Sequence[PhiSpan], keep_longest: bool = False) -> list[PhiSpan]:
    """Check span invariants and return the spans sorted by start.

    Overlapping spans raise unless ``keep_longest`` is set, in which case the
    shorter member of each overlapping pair is discarded (ties keep the earlier).
    """
    n = len(text)
    for sp in spans:
        if not (0 <= sp.start < sp.end <= n):
            raise SpanBoundsError(f"span {sp} outside document of length {n}")
        found = text[sp.start:sp.end]
        if found != sp.surface:
            raise SpanConsistencyError(sp.span_id or str(sp), sp.surface, found)
        if sp.phi_type not in PHI_CLASSES:
            raise ConfigError(f"span {sp}: unknown PHI type {sp.phi_type!r}")
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    kept: list[PhiSpan] = []
    for sp in ordered:
        if kept and sp.start < kept[-1].end:
            prev = kept[-1]
            if not keep_longest:
                raise SpanOverlapError(prev, sp)
            if (sp.end - sp.start) > (prev.end - prev.start):
                kept[-1] = sp
            continue
        kept.append(sp)
    return kept


# ---------------------------------------------------------------- XML


_TEXT_OPEN_RE = re.compile(r"<TEXT\b[^>]*>")


def _payload(raw: str) -> str:
    # Pulled from the raw characters rather than the parsed tree: XML parsers
    # normalise CR/CRLF, which would shift offsets.
    m = _TEXT_OPEN_RE.search(raw)
    if m is None:
        return ""
    parts, pos = [], m.end()
    while True:
        cdata = raw.find("<![CDATA[", pos)
        close = raw.find("</TEXT", pos)
        if cdata != -1 and (close == -1 or cdata < close):
            parts.append(unescape(raw[pos:cdata]))
            stop = raw.index("]]>", cdata + 9)
            parts.append(raw[cdata + 9:stop])
            pos = stop + 3
        else:
            parts.append(unescape(raw[pos:close]))
            return "".join(parts)


def parse_document(raw: str, doc_id: str = "", keep_longest: bool = False) -> AnnotatedDocument:
    try:
        root = ET.fromstring(raw.encode("utf-8"))
    except ET.ParseError as exc:
        line, col = exc.position
        raise CorpusParseError(f"malformed document {doc_id!r}: {getattr(exc, 'msg', exc)}", line, col) from None
    text_elems = root.findall("TEXT")
    if len(text_elems) != 1:
        raise CorpusParseError(f"document {doc_id!r} has {len(text_elems)} TEXT elements, expected 1")
    text = _payload(raw)
    spans = []
    tags = root.find("TAGS")
    for i, el in enumerate(tags if tags is not None else []):
        attrs = el.attrib
        tag_id = attrs.get("id", f"#{i}")
        try:
            start, end = int(attrs["start"]), int(attrs["end"])
            phi_type = attrs["TYPE"]
            surface = attrs["text"]
        except KeyError as exc:
            raise CorpusParseError(f"tag {tag_id!r} in {doc_id!r} lacks attribute {exc.args[0]!r}") from None
        except ValueError:
            raise CorpusParseError(f"tag {tag_id!r} in {doc_id!r} has non-integer offsets") from None
        spans.append(PhiSpan(start, end, phi_type, surface, tag_id))
    return AnnotatedDocument(doc_id, text, validate_spans(text, spans, keep_longest))


def _cdata(text: str) -> str:
    return "<![CDATA[" + text.replace("]]>", "]]]]><![CDATA[>") + "]]>"


def _attr(value: str) -> str:
    # quoteattr leaves CR/TAB/LF literal; attribute normalisation would turn them into spaces
    return quoteattr(value, {"\r": "&#13;", "\n": "&#10;", "\t": "&#9;"})


# characters XML 1.0 cannot carry, even escaped
_XML_ILLEGAL_RE = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ufffe\uffff\ud800-\udfff]")


def write_document(doc: AnnotatedDocument) -> str:
    bad = _XML_ILLEGAL_RE.search(doc.text)
    if bad:
        raise InputError(f"document {doc.doc_id!r} has character U+{ord(bad.group()):04X} at offset "
                         f"{bad.start()}, which XML cannot represent")
    lines = [
        '<?xml version="1.0" encoding="UTF-8" ?>',
        "<deIdi2b2>",
        f"<TEXT>{_cdata(doc.text)}</TEXT>",
        "<TAGS>",
    ]
    for i, sp in enumerate(doc.spans):
        tag_id = sp.span_id or f"P{i}"
        lines.append(
            f"<{_CATEGORY.get(sp.phi_type, 'PHI')} id={_attr(tag_id)} start=\"{sp.start}\" "
            f"end=\"{sp.end}\" text={_attr(sp.surface)} TYPE={_attr(sp.phi_type)} comment=\"\" />"
        )
    lines += ["</TAGS>", "</deIdi2b2>", ""]
    return "\n".join(lines)


def read_corpus(directory: str | Path, keep_longest: bool = False) -> list[AnnotatedDocument]:
    directory = Path(directory)
    docs = []
    for path in sorted(directory.glob("*.xml")):
        with open(path, encoding="utf-8", newline="") as fh:
            docs.append(parse_document(fh.read(), path.stem, keep_longest))
    return docs


def write_corpus(docs: Iterable[AnnotatedDocument], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for doc in docs:
        path = directory / f"{doc.doc_id}.xml"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(write_document(doc))
        paths.append(path)
    return paths


# ---------------------------------------------------------------- splits


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three positive fractions summing to 1, got {ratios}")
    if n < 3:
        raise SplitSizeError(f"need at least 3 documents to split, got {n}")
    n_val = math.floor(n * ratios[1] + 1e-9)
    n_test = math.floor(n * ratios[2] + 1e-9)
    return n - n_val - n_test, n_val, n_test


def split_corpus(docs: Sequence, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> CorpusSplit:
    """Random train/validation/test partition; floor sizing, remainder to train.

    ``docs`` may hold documents or bare document ids.
    """
    ids = [d if isinstance(d, str) else d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate document ids")
    n_train, n_val, n_test = split_sizes(len(ids), ratios)
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return CorpusSplit(
        train=shuffled[:n_train],
        validation=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
        seed=seed,
        ratios=tuple(ratios),
    )


def write_split_manifest(split: CorpusSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed {split.seed} ratios {','.join(f'{r:g}' for r in split.ratios)}\n")
        for name in SPLIT_NAMES:
            for doc_id in getattr(split, name):
                fh.write(f"{doc_id}\t{name}\n")


def read_split_manifest(path: str | Path, seed: int = 0) -> CorpusSplit:
    groups: dict[str, list[str]] = {name: [] for name in SPLIT_NAMES}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# seed "):
                seed = int(line.split()[2])
                continue
            doc_id, _, name = line.partition("\t")
            if name not in groups:
                raise CorpusParseError(f"{path}: unknown split {name!r}", lineno, 0)
            groups[name].append(doc_id)
    n = sum(len(v) for v in groups.values()) or 1
    ratios = tuple(len(groups[k]) / n for k in SPLIT_NAMES)
    return CorpusSplit(groups["train"], groups["validation"], groups["test"], seed, ratios)


# ---------------------------------------------------------------- statistics


@dataclass
class StatRow:
    label: str
    count: int
    percent: float


def corpus_statistics(sequences: Iterable) -> list[StatRow]:
    """Token counts per collapsed class for aligned token sequences.

    One row per class in the collapsed vocabulary, Non-PHI first; classes with
    no tokens get (0, 0.0).
    """
    counts: Counter[str] = Counter()
    for seq in sequences:
        counts.update(collapse_bio(seq.labels))
    total = sum(counts.values())
    return [
        StatRow(label, counts.get(label, 0), 100.0 * counts.get(label, 0) / total if total else 0.0)
        for label in CLASS_LABELS
    ]


def render_statistics(columns: dict[str, list[StatRow]], drop_empty: bool = False) -> str:
    """Count (percent) table with one column per split, in the published layout."""
    names = list(columns)
    label_width = max(len(l) for l in CLASS_LABELS) + 2
    header = " " * label_width + "  ".join(f"{n:>22}" for n in names)
    out = [header]
    for i, label in enumerate(CLASS_LABELS):
        cells = [columns[n][i] for n in names]
        if drop_empty and label != NON_PHI and all(c.count == 0 for c in cells):
            continue
        out.append(
            f"{label:<{label_width}}" + "  ".join(f"{c.count:>10} ({c.percent:>8.4f})" for c in cells)
        )
    totals = [sum(r.count for r in columns[n]) for n in names]
    out.append(f"{'Total':<{label_width}}" + "  ".join(f"{t:>10} {'':>10}" for t in totals))
    return "\n".join(out) + "\n"
