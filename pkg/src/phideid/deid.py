"""Turn predicted PHI token labels into redacted or tag-inserted text."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, InputError
from .labels import NON_PHI


@dataclass(frozen=True)
class DeidPolicy:
    mode: str = "tag-insert"
    glyph: str = "*"
    template: str = "[{cls}]"
    preserve_length: bool = True

    def validate(self) -> "DeidPolicy":
        if self.mode == "redact":
            if not self.glyph:
                raise ConfigError("redaction glyph must be non-empty")
        elif self.mode == "tag-insert":
            if "{cls}" not in self.template:
                raise ConfigError("tag template must contain the {cls} placeholder")
        else:
            raise ConfigError(f"unknown de-identification mode {self.mode!r}")
        return self

    def replacement(self, cls: str, original: str) -> str:
        if self.mode == "tag-insert":
            return self.template.format(cls=cls)
        return self.glyph * len(original) if self.preserve_length else self.glyph * 3


@dataclass(frozen=True)
class ManifestRecord:
    start: int
    end: int
    phi_class: str
    replacement: str
    out_start: int
    out_end: int


def phi_runs(tokens, labels: Sequence[str]) -> list[tuple[int, int, str]]:
    """Maximal runs of same-class PHI tokens as character ranges (start, end, class)."""
    if len(tokens) != len(labels):
        raise InputError(f"{len(labels)} labels for {len(tokens)} tokens")
    runs: list[tuple[int, int, str]] = []
    prev = None
    for tok, lab in zip(tokens, labels):
        if lab == NON_PHI:
            prev = None
            continue
        if prev == lab:
            s, _, c = runs[-1]
            runs[-1] = (s, tok.end, c)
        else:
            runs.append((tok.start, tok.end, lab))
        prev = lab
    return runs


def apply_policy(text: str, tokens, labels: Sequence[str], policy: DeidPolicy = DeidPolicy()) -> tuple[str, list[ManifestRecord]]:
    """Replace each PHI run as one unit; text outside runs is copied unchanged.

    ``labels`` are collapsed classes aligned with ``tokens`` (Non-PHI or a
    PHI class name).  Returns the de-identified text and an audit manifest.
    """
    policy.validate()
    out: list[str] = []
    manifest: list[ManifestRecord] = []
    pos = length = 0
    for start, end, cls in phi_runs(tokens, labels):
        keep = text[pos:start]
        out.append(keep)
        length += len(keep)
        rep = policy.replacement(cls, text[start:end])
        manifest.append(ManifestRecord(start, end, cls, rep, length, length + len(rep)))
        out.append(rep)
        length += len(rep)
        pos = end
    out.append(text[pos:])
    return "".join(out), manifest


def invert_manifest(deid_text: str, manifest: Sequence[ManifestRecord], original: str) -> str:
    """Restore a de-identified text from its manifest and a copy of the original."""
    parts, pos = [], 0
    for rec in manifest:
        if deid_text[rec.out_start:rec.out_end] != rec.replacement:
            raise InputError(f"manifest record {rec} does not match the de-identified text")
        parts.append(deid_text[pos:rec.out_start])
        parts.append(original[rec.start:rec.end])
        pos = rec.out_end
    parts.append(deid_text[pos:])
    return "".join(parts)


def write_manifest(manifest: Sequence[ManifestRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest:
            fh.write(json.dumps(asdict(rec), ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    with open(path, encoding="utf-8") as fh:
        return [ManifestRecord(**json.loads(line)) for line in fh if line.strip()]
