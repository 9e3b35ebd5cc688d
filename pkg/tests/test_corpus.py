from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phideid.align import align_corpus
from phideid.corpus import (
    AnnotatedDocument,
    PhiSpan,
    corpus_statistics,
    parse_document,
    read_corpus,
    read_split_manifest,
    render_statistics,
    split_corpus,
    split_sizes,
    write_corpus,
    write_document,
    write_split_manifest,
)
from phideid.errors import (
    ConfigError,
    CorpusParseError,
    InputError,
    SpanBoundsError,
    SpanConsistencyError,
    SpanOverlapError,
    SplitSizeError,
)
from phideid.labels import CLASS_LABELS, NON_PHI, PHI_CLASSES, collapse_bio
from phideid.synthetic import generate_synthetic_corpus

from conftest import make_doc

# text pieces that stress the XML layer: CDATA terminators, CR/LF, markup, astral characters
_awkward = st.sampled_from(["]]>", "\r\n", "\r", "<TEXT>", "</TEXT>", "&amp;", "\t", "😀", "é", " "])
_chars = st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="\ufffe\uffff")
_chunk = st.one_of(st.text(_chars, max_size=12), _awkward)


@st.composite
def documents(draw):
    pieces, spans, pos = [], [], 0
    for i in range(draw(st.integers(0, 6))):
        gap = "".join(draw(st.lists(_chunk, max_size=3)))
        phi = draw(st.text(_chars, min_size=1, max_size=10).filter(lambda s: s.strip()))
        if draw(st.booleans()):
            phi = phi + draw(_awkward)
        pieces += [gap, phi]
        start = pos + len(gap)
        spans.append(PhiSpan(start, start + len(phi), draw(st.sampled_from(PHI_CLASSES)), phi, f"P{i}"))
        pos = start + len(phi)
    pieces.append("".join(draw(st.lists(_chunk, max_size=3))))
    return AnnotatedDocument("d", "".join(pieces), spans)


@settings(max_examples=500, deadline=None)
@given(documents())
def test_write_parse_round_trip(doc):
    again = parse_document(write_document(doc), "d")
    assert again == doc
    for sp in again.spans:
        assert again.text[sp.start:sp.end] == sp.surface


def test_offsets_count_code_points():
    doc = make_doc("u", "Café 😀 seen by Smith.", ("Smith", "DOCTOR"))
    again = parse_document(write_document(doc), "u")
    assert again.spans[0].start == 15


def test_unrepresentable_character_is_rejected():
    with pytest.raises(InputError):
        write_document(AnnotatedDocument("c", "bad \x1f char"))


def test_surface_mismatch():
    raw = write_document(make_doc("x", "Seen by Jones today", ("Jones", "DOCTOR")))
    with pytest.raises(SpanConsistencyError):
        parse_document(raw.replace('text="Jones"', 'text="Janes"'), "x")


def test_out_of_bounds():
    doc = AnnotatedDocument("x", "short", [PhiSpan(2, 40, "DATE", "ort")])
    with pytest.raises(SpanBoundsError):
        parse_document(write_document(doc), "x")


def test_overlap_strict_and_keep_longest():
    text = "New York City"
    spans = [PhiSpan(0, 8, "STATE", "New York"), PhiSpan(0, 13, "CITY", text)]
    raw = write_document(AnnotatedDocument("o", text, spans))
    with pytest.raises(SpanOverlapError):
        parse_document(raw, "o")
    kept = parse_document(raw, "o", keep_longest=True)
    assert [s.phi_type for s in kept.spans] == ["CITY"]


def test_malformed_reports_position():
    with pytest.raises(CorpusParseError) as info:
        parse_document("<deIdi2b2>\n<TEXT><![CDATA[x]]></TEXT>\n<TAGS><DATE id='a'></TAGS>", "m")
    assert info.value.line == 3


def test_missing_text_element():
    with pytest.raises(CorpusParseError):
        parse_document("<deIdi2b2><TAGS/></deIdi2b2>", "m")


def test_corpus_directory_round_trip(tmp_path):
    docs = generate_synthetic_corpus(3, seed=5)
    write_corpus(docs, tmp_path)
    assert read_corpus(tmp_path) == docs


@pytest.mark.parametrize("n, expected", [(10, (5, 1, 4)), (1223, (612, 122, 489)), (3, (2, 0, 1))])
def test_split_sizes_floor_rule(n, expected):
    assert split_sizes(n, (0.5, 0.1, 0.4)) == expected


def test_split_errors():
    with pytest.raises(SplitSizeError):
        split_sizes(2, (0.5, 0.1, 0.4))
    with pytest.raises(ConfigError):
        split_sizes(10, (0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        split_corpus(["a", "a", "b"])


@given(st.integers(3, 400), st.integers(0, 2**32 - 1))
def test_split_is_deterministic_partition(n, seed):
    ids = [f"doc{i}" for i in range(n)]
    a, b = split_corpus(ids, seed=seed), split_corpus(ids, seed=seed)
    assert a == b
    assert sorted(a.train + a.validation + a.test) == sorted(ids)
    assert a.sizes() == split_sizes(n, (0.5, 0.1, 0.4))


def test_split_manifest_round_trip(tmp_path):
    split = split_corpus([f"d{i}" for i in range(20)], seed=4)
    write_split_manifest(split, tmp_path / "s.tsv")
    back = read_split_manifest(tmp_path / "s.tsv")
    assert back.seed == 4
    assert (back.train, back.validation, back.test) == (split.train, split.validation, split.test)


def test_statistics_small_example():
    from phideid.align import Token, TokenSequence

    seq = TokenSequence("s", [Token("w", i, i + 1) for i in range(100)], ["O"] * 97 + ["B-DATE"] * 3)
    rows = {r.label: r for r in corpus_statistics([seq])}
    assert (rows["DATE"].count, rows["DATE"].percent) == (3, 3.0)
    assert (rows["CITY"].count, rows["CITY"].percent) == (0, 0.0)
    assert rows[NON_PHI].count == 97


def test_statistics_against_independent_recount():
    seqs, _ = align_corpus(generate_synthetic_corpus(200, seed=2))
    rows = corpus_statistics(seqs)
    recount = {label: 0 for label in CLASS_LABELS}
    total = 0
    for s in seqs:
        for tag in s.labels:
            recount["Non-PHI" if tag == "O" else tag[2:]] += 1
            total += 1
    assert [r.label for r in rows] == list(CLASS_LABELS)
    assert {r.label: r.count for r in rows} == recount
    assert sum(r.count for r in rows) == total
    assert abs(sum(r.percent for r in rows) - 100.0) < 1e-6


def test_render_statistics_has_every_class(small_sequences):
    text = render_statistics({"all": corpus_statistics(small_sequences)})
    for label in CLASS_LABELS:
        assert label in text
    assert "Total" in text


def test_collapsed_statistics_use_collapsed_labels(small_sequences):
    classes = {c for s in small_sequences for c in collapse_bio(s.labels)}
    assert classes <= set(CLASS_LABELS)
