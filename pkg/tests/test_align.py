from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phideid.align import (
    align,
    align_corpus,
    read_alignment_report,
    read_sequences,
    snapped_spans,
    tokenize,
    write_alignment_report,
    write_sequences,
)
from phideid.corpus import AnnotatedDocument, PhiSpan
from phideid.labels import bio_to_ranges, is_bio_valid

from conftest import make_doc


def surfaces(text):
    return [t.surface for t in tokenize(text)]


@pytest.mark.parametrize("text, expected", [
    ("Seen on 2067-05-03.", ["Seen", "on", "2067-05-03", "."]),
    ("(617) 555-0199", ["(", "617", ")", "555-0199"]),
    ("Dr. Smith, MD", ["Dr", ".", "Smith", ",", "MD"]),
    ("email j.doe@x.org!", ["email", "j.doe@x.org", "!"]),
    ("  \n\t ", []),
    ('"quoted"', ['"', "quoted", '"']),
])
def test_tokenize_examples(text, expected):
    assert surfaces(text) == expected


@given(st.text(max_size=80))
def test_tokens_are_exact_ordered_substrings(text):
    toks = tokenize(text)
    for t in toks:
        assert text[t.start:t.end] == t.surface and t.surface.strip() == t.surface and t.surface
    assert all(a.end <= b.start for a, b in zip(toks, toks[1:]))
    # nothing but whitespace is discarded
    kept = set(i for t in toks for i in range(t.start, t.end))
    assert all(text[i].isspace() for i in range(len(text)) if i not in kept)


def test_multi_token_span_gets_b_then_i():
    doc = make_doc("a", "She lives in New York City now.", ("New York City", "CITY"))
    seq, rep = align(doc)
    assert not rep.dropped
    assert seq.labels == ["O", "O", "O", "B-CITY", "I-CITY", "I-CITY", "O", "O"]


def test_span_with_trailing_punctuation_token():
    doc = make_doc("a", "Seen by Dr. Li.", ("Dr. Li", "DOCTOR"))
    seq, _ = align(doc)
    assert seq.labels == ["O", "O", "B-DOCTOR", "I-DOCTOR", "I-DOCTOR", "O"]


@pytest.mark.parametrize("text, span, reason", [
    ("MRN12345 on file", PhiSpan(3, 8, "MEDICALRECORD", "12345"), "starts inside"),
    ("Call 555-0199x now", PhiSpan(5, 13, "PHONE", "555-0199"), "ends inside"),
    ("Johnson's chart", PhiSpan(0, 4, "PATIENT", "John"), "ends inside"),
    ("Lives at 12 Main St", PhiSpan(9, 19, "STREET", "12 Main St"), "no B-STREET"),
    ("zip 02115 02116 here", PhiSpan(4, 15, "ZIP", "02115 02116"), "no I-ZIP"),
])
def test_unalignable_spans_drop_the_document(text, span, reason):
    seq, rep = align(AnnotatedDocument("bad", text, [span]))
    assert seq is None and rep.dropped
    assert any(reason in r for r in rep.reasons)


def test_one_bad_span_drops_the_whole_document():
    doc = AnnotatedDocument("mixed", "Seen 2069-01-01 by Xavier", [
        PhiSpan(5, 15, "DATE", "2069-01-01"), PhiSpan(19, 22, "DOCTOR", "Xav"),
    ])
    seqs, reports = align_corpus([doc])
    assert seqs == [] and reports[0].dropped


def test_round_trip_on_synthetic(small_corpus):
    for doc in small_corpus:
        seq, rep = align(doc)
        assert not rep.dropped
        assert is_bio_valid(seq.labels)
        assert bio_to_ranges(seq.labels) == snapped_spans(doc, seq.tokens)


def test_file_round_trips(tmp_path, small_corpus):
    seqs, reports = align_corpus(small_corpus[:5] + [AnnotatedDocument("bad", "ab", [PhiSpan(0, 1, "AGE", "a")])])
    write_sequences(seqs, tmp_path / "t.jsonl")
    write_alignment_report(reports, tmp_path / "r.tsv")
    assert read_sequences(tmp_path / "t.jsonl") == seqs
    back = read_alignment_report(tmp_path / "r.tsv")
    assert [(r.doc_id, r.dropped) for r in back] == [(r.doc_id, r.dropped) for r in reports]
    assert back[-1].reasons == reports[-1].reasons
