from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phideid.align import Token, TokenSequence
from phideid.errors import ConfigError
from phideid.labels import IGNORE_INDEX, TAG_TO_ID
from phideid.subword import (
    BYTE_TOKENS,
    MIN_VOCAB_SIZE,
    NO_WORD,
    SPECIALS,
    Vocabulary,
    build_vocab,
    encode,
    interior_window,
    read_encoded,
    window_starts,
    write_encoded,
)

WORDS = ("the patient was seen at the clinic and the patient reported pain in the chest "
         "seen again at the hospital with chest pain").split() * 5


@pytest.fixture(scope="module")
def vocab():
    return build_vocab(WORDS, 400)


def decode(vocab, ids):
    """Inverse of encode_word: strip continuation markers, reassemble byte tokens."""
    raw = b""
    for i in ids:
        piece = vocab.tokens[i]
        if piece in BYTE_TOKENS:
            raw += bytes([int(piece[3:5], 16)])
        else:
            raw += (piece[2:] if piece.startswith("##") else piece).encode("utf-8")
    return raw.decode("utf-8")


def expected_window_count(n_words, max_len):
    # closed form when every word is one subword
    cap, stride = max_len - 2, max_len // 2
    return 1 if n_words <= cap else 1 + math.ceil((n_words - cap) / stride)


def test_layout_and_minimum_size(vocab):
    assert tuple(vocab.tokens[:5]) == SPECIALS
    assert vocab.tokens[5:261] == list(BYTE_TOKENS)
    assert len(vocab) <= 400
    assert MIN_VOCAB_SIZE == 261
    with pytest.raises(ConfigError):
        build_vocab(WORDS, 260)


def test_frequent_words_become_single_pieces(vocab):
    assert len(vocab.encode_word("patient")) == 1
    assert len(vocab.encode_word("the")) == 1


@given(st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=20))
def test_any_word_encodes_and_decodes(word):
    v = build_vocab(WORDS, 300)
    ids = v.encode_word(word)
    assert ids and decode(v, ids) == word


def test_build_is_deterministic():
    assert build_vocab(WORDS, 350).tokens == build_vocab(WORDS, 350).tokens


def test_save_load(tmp_path, vocab):
    vocab.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt").tokens == vocab.tokens


def _seq(n, label="O"):
    return TokenSequence("s", [Token(f"w{i}", 0, 1) for i in range(n)], [label] * n)


@pytest.mark.parametrize("n_words, max_len", [(1, 8), (6, 8), (7, 8), (100, 16), (62, 64), (63, 64), (500, 64)])
def test_window_count_matches_closed_form(n_words, max_len):
    assert len(window_starts([1] * n_words, max_len)) == expected_window_count(n_words, max_len)


@settings(max_examples=200)
@given(st.lists(st.integers(1, 12), min_size=1, max_size=120), st.integers(8, 40))
def test_windows_cover_every_word_within_capacity(counts, max_len):
    wins = window_starts(counts, max_len)
    covered = set()
    for s, e in wins:
        assert s < e
        if e - s > 1:
            assert sum(counts[s:e]) <= max_len - 2
        covered.update(range(s, e))
    assert covered == set(range(len(counts)))
    assert wins[0][0] == 0 and wins[-1][1] == len(counts)
    assert all(a[0] < b[0] and b[0] <= a[1] for a, b in zip(wins, wins[1:]))


def test_encode_labels_on_first_subword_only(vocab):
    toks = [Token(w, 0, 1) for w in ["patient", "Xylophonist", "pain"]]
    seq = TokenSequence("s", toks, ["O", "B-PROFESSION", "O"])
    (enc,) = encode(seq, vocab, 32)
    assert enc.input_ids[0] == vocab.cls_id and enc.input_ids[-1] == vocab.sep_id
    firsts = enc.first_positions()
    for w, tag in enumerate(seq.labels):
        assert enc.label_ids[firsts[w]] == TAG_TO_ID[tag]
    labelled = [i for i, lab in enumerate(enc.label_ids) if lab != IGNORE_INDEX]
    assert labelled == sorted(firsts.values())
    assert enc.word_index[0] == enc.word_index[-1] == NO_WORD


def test_windows_fit_and_every_word_has_an_interior_home(vocab):
    seq = _seq(300)
    encs = encode(seq, vocab, 16)
    assert all(len(e) <= 16 for e in encs)
    home = interior_window(encs)
    assert set(home) == set(range(300))
    for w, (k, pos) in home.items():
        assert encs[k].word_index[pos] == w


def test_unlabelled_sequence_is_all_ignored(vocab):
    seq = TokenSequence("u", [Token("pain", 0, 4)])
    (enc,) = encode(seq, vocab, 8)
    assert set(enc.label_ids) == {IGNORE_INDEX}


def test_encoded_file_round_trip(tmp_path, vocab):
    encs = encode(_seq(40), vocab, 16)
    write_encoded(encs, tmp_path / "e.jsonl")
    assert read_encoded(tmp_path / "e.jsonl") == encs


def test_max_len_floor(vocab):
    with pytest.raises(ConfigError):
        encode(_seq(3), vocab, 7)
