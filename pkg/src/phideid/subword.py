"""Subword vocabulary (BPE-learned, WordPiece-style lookup) and windowed encoding.

Pieces that continue a word carry a ``##`` prefix.  Any character the
vocabulary cannot cover falls back to its UTF-8 bytes, so encoding is total.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError
from .labels import IGNORE_INDEX

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)
MASK_ID = SPECIALS.index(MASK)
FIRST_FREE_ID = len(SPECIALS)
BYTE_TOKENS = tuple(f"<0x{b:02X}>" for b in range(256))
MIN_VOCAB_SIZE = len(SPECIALS) + len(BYTE_TOKENS)
CONT = "##"
NO_WORD = -1


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            raise ConfigError("vocabulary must start with the special tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ConfigError("duplicate entries in vocabulary")
        self._byte_ids = [self.index[b] for b in BYTE_TOKENS]
        self._max_piece = max(len(t) for t in self.tokens)
        self._cache: dict[str, list[int]] = {}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, piece: str) -> bool:
        return piece in self.index

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    def encode_word(self, word: str) -> list[int]:
        """Greedy longest-match segmentation with byte fallback."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        ids: list[int] = []
        i, n = 0, len(word)
        while i < n:
            prefix = CONT if i > 0 else ""
            for j in range(min(n, i + self._max_piece), i, -1):
                piece_id = self.index.get(prefix + word[i:j])
                if piece_id is not None:
                    ids.append(piece_id)
                    i = j
                    break
            else:
                ids.extend(self._byte_ids[b] for b in word[i].encode("utf-8"))
                i += 1
        self._cache[word] = ids
        return ids

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.tokens) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


def build_vocab(words: Iterable[str], vocab_size: int, min_freq: int = 2) -> Vocabulary:
    """Learn a subword vocabulary from word surfaces by pair merging.

    Base alphabet is every character seen (most frequent first if the budget is
    short); merges proceed while the best pair occurs at least ``min_freq``
    times and the budget allows.  Ties go to the lexicographically smallest pair
    so the result is deterministic.
    """
    if vocab_size < MIN_VOCAB_SIZE:
        raise ConfigError(f"vocab_size must be at least {MIN_VOCAB_SIZE}, got {vocab_size}")
    counts = Counter(w for w in words if w)
    budget = vocab_size - MIN_VOCAB_SIZE

    char_freq: Counter[str] = Counter()
    for w, c in counts.items():
        char_freq[w[0]] += c
        for ch in w[1:]:
            char_freq[CONT + ch] += c
    alphabet = sorted(char_freq, key=lambda s: (-char_freq[s], s))[:budget]
    learned = list(alphabet)
    known = set(alphabet)

    corpus = [[w[0]] + [CONT + ch for ch in w[1:]] for w in counts]
    freqs = list(counts.values())
    pair_counts: Counter[tuple[str, str]] = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for k, syms in enumerate(corpus):
        for a, b in zip(syms, syms[1:]):
            pair_counts[(a, b)] += freqs[k]
            where[(a, b)].add(k)

    while len(learned) < budget and pair_counts:
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        if pair_counts[best] < min_freq:
            break
        a, b = best
        merged = a + b[len(CONT):]
        for k in sorted(where.pop(best, ())):
            syms = corpus[k]
            for x, y in zip(syms, syms[1:]):
                pair_counts[(x, y)] -= freqs[k]
                if pair_counts[(x, y)] <= 0:
                    del pair_counts[(x, y)]
            out, i = [], 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    out.append(merged)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            corpus[k] = out
            for x, y in zip(out, out[1:]):
                pair_counts[(x, y)] += freqs[k]
                where[(x, y)].add(k)
        pair_counts.pop(best, None)
        if merged not in known:
            known.add(merged)
            learned.append(merged)
    return Vocabulary(list(SPECIALS) + list(BYTE_TOKENS) + learned)


# ---------------------------------------------------------------- encoding


@dataclass
class SubwordEncoding:
    doc_id: str
    window_index: int
    input_ids: list[int]
    word_index: list[int]
    label_ids: list[int]
    attention_mask: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.attention_mask:
            self.attention_mask = [1] * len(self.input_ids)

    def __len__(self) -> int:
        return len(self.input_ids)

    def first_positions(self) -> dict[int, int]:
        """word index -> position of that word's first subword in this window."""
        out: dict[int, int] = {}
        for pos, w in enumerate(self.word_index):
            if w != NO_WORD and w not in out:
                out[w] = pos
        return out


def window_starts(piece_counts: Sequence[int], max_len: int) -> list[tuple[int, int]]:
    """Word ranges [start, end) of each window.

    Each window holds as many whole words as fit in ``max_len - 2`` subwords
    (a single over-long word is truncated).  The next window starts at the
    first word at least ``max_len // 2`` subwords after the current start,
    never leaving a gap.
    """
    cap, stride = max_len - 2, max_len // 2
    n = len(piece_counts)
    offsets = [0]
    for c in piece_counts:
        offsets.append(offsets[-1] + c)
    windows = []
    s = 0
    while True:
        e = s + 1
        while e < n and offsets[e + 1] - offsets[s] <= cap:
            e += 1
        windows.append((s, e))
        if e >= n:
            return windows
        nxt = s + 1
        while nxt < e and offsets[nxt] - offsets[s] < stride:
            nxt += 1
        s = nxt


def encode(seq, vocab: Vocabulary, max_len: int) -> list[SubwordEncoding]:
    """Encode one token sequence as ``[CLS] pieces... [SEP]`` windows.

    Labels sit on each word's first subword; continuation pieces and special
    tokens get ``IGNORE_INDEX``.  Sequences without labels are encoded with
    every position ignored.
    """
    if max_len < 8:
        raise ConfigError(f"max_len must be at least 8, got {max_len}")
    pieces = [vocab.encode_word(t.surface) for t in seq.tokens]
    labels = seq.label_ids() if seq.labels is not None else [IGNORE_INDEX] * len(pieces)
    if not pieces:
        return [SubwordEncoding(seq.doc_id, 0, [vocab.cls_id, vocab.sep_id], [NO_WORD] * 2, [IGNORE_INDEX] * 2)]
    cap = max_len - 2
    out = []
    for k, (s, e) in enumerate(window_starts([len(p) for p in pieces], max_len)):
        ids, words, labs = [vocab.cls_id], [NO_WORD], [IGNORE_INDEX]
        for w in range(s, e):
            room = cap - (len(ids) - 1)
            p = pieces[w][:room]
            ids.extend(p)
            words.extend([w] * len(p))
            labs.append(labels[w])
            labs.extend([IGNORE_INDEX] * (len(p) - 1))
        ids.append(vocab.sep_id)
        words.append(NO_WORD)
        labs.append(IGNORE_INDEX)
        out.append(SubwordEncoding(seq.doc_id, k, ids, words, labs))
    return out


def interior_window(encodings: Sequence[SubwordEncoding]) -> dict[int, tuple[int, int]]:
    """For each word: (window number, position) of its most interior first subword.

    Interior distance is the distance to the nearer content edge of the
    window; ties keep the earlier window.
    """
    best: dict[int, tuple[int, int, int]] = {}
    for k, enc in enumerate(encodings):
        content = [i for i, w in enumerate(enc.word_index) if w != NO_WORD]
        if not content:
            continue
        lo, hi = content[0], content[-1]
        for w, pos in enc.first_positions().items():
            depth = min(pos - lo, hi - pos)
            if w not in best or depth > best[w][0]:
                best[w] = (depth, k, pos)
    return {w: (k, pos) for w, (_, k, pos) in best.items()}


def write_encoded(encodings: Iterable[SubwordEncoding], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for enc in encodings:
            fh.write(json.dumps({
                "doc_id": enc.doc_id,
                "window_index": enc.window_index,
                "input_ids": enc.input_ids,
                "label_ids": enc.label_ids,
                "attention_mask": enc.attention_mask,
                "word_index": enc.word_index,
            }, ensure_ascii=False) + "\n")


def read_encoded(path: str | Path) -> list[SubwordEncoding]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out.append(SubwordEncoding(
                    r["doc_id"], r["window_index"], r["input_ids"], r["word_index"],
                    r["label_ids"], r["attention_mask"],
                ))
    return out
