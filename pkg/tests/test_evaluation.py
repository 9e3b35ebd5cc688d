from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phideid.align import Token, TokenSequence
from phideid.errors import ConfigError, InputError
from phideid.evaluation import (
    EvalReport,
    evaluate,
    parse_bar_data,
    parse_delimited,
    render_report,
    score,
    span_score,
    word_level_predictions,
)
from phideid.labels import CLASS_LABELS, NON_PHI, PHI_CLASSES, TAG_TO_ID
from phideid.model import init_model, preset
from phideid.subword import build_vocab, encode

from oracles import confusion_recount

labels = st.sampled_from(CLASS_LABELS)
pairs = st.lists(st.tuples(labels, labels), min_size=1, max_size=80)


@given(pairs)
def test_score_equals_recount(seq):
    gold, pred = [g for g, _ in seq], [p for _, p in seq]
    rep = score([gold], [pred])
    counts, correct, total = confusion_recount(gold, pred, PHI_CLASSES)
    for cls in PHI_CLASSES:
        row = rep.row(cls)
        assert [row.tp, row.fp, row.fn] == counts[cls]
    assert (rep.correct, rep.total) == (correct, total)


def test_hand_computed_example():
    gold = [["DATE", "DATE", NON_PHI, "CITY", NON_PHI]]
    pred = [["DATE", NON_PHI, "CITY", "CITY", NON_PHI]]
    rep = score(gold, pred)
    # tp=2 (DATE, CITY), fp=1 (CITY), fn=1 (DATE)
    assert (rep.precision, rep.recall) == (pytest.approx(2 / 3), pytest.approx(2 / 3))
    assert rep.accuracy == pytest.approx(3 / 5)
    assert rep.row("DATE").recall == 0.5 and rep.row("CITY").precision == 0.5


def test_all_non_phi_gives_zero_not_nan():
    rep = score([[NON_PHI] * 4], [[NON_PHI] * 4])
    assert (rep.precision, rep.recall, rep.f1, rep.accuracy) == (0.0, 0.0, 0.0, 1.0)


def test_score_errors():
    with pytest.raises(InputError):
        score([["DATE"]], [["DATE", "DATE"]])
    with pytest.raises(InputError):
        score([["B-DATE"]], [["DATE"]])
    with pytest.raises(InputError):
        score([["DATE"]], [])


def test_span_score_is_strict():
    gold = [["B-CITY", "I-CITY", "O", "B-DATE"]]
    pred = [["B-CITY", "O", "O", "B-DATE"]]
    s = span_score(gold, pred)
    assert (s["gold"], s["pred"]) == (2, 2) and s["precision"] == 0.5


def test_delimited_round_trip_preserves_counts():
    rep = score([["DATE", "AGE", NON_PHI, "CITY"]], [["DATE", NON_PHI, "AGE", "CITY"]], "test", "tiny")
    back = parse_delimited(render_report([rep, rep], "delimited"))
    assert len(back) == 2 and back[0] == rep


def test_bar_data_and_table():
    rep = score([["DATE", "AGE"]], [["DATE", NON_PHI]], "test", "m")
    rows = parse_bar_data(render_report(rep, "bar-data"))
    assert rows == [("m", "AGE", 0.0), ("m", "DATE", 1.0)]
    text = render_report(rep)
    assert "Precision" in text and "AGE" in text
    with pytest.raises(ConfigError):
        render_report(rep, "xml")


def test_word_predictions_use_interior_window():
    vocab = build_vocab(["w"] * 10, 300)
    seq = TokenSequence("d", [Token("w", 0, 1)] * 20, ["O"] * 20)
    encs = encode(seq, vocab, 8)
    # every window votes AGE, except the designated interior one for word 5
    logits = [np.zeros((len(e), 41)) for e in encs]
    for lg in logits:
        lg[:, TAG_TO_ID["B-AGE"]] = 1.0
    from phideid.subword import interior_window

    k, pos = interior_window(encs)[5]
    logits[k][pos, TAG_TO_ID["B-DATE"]] = 5.0
    preds = word_level_predictions(logits, encs, {"d": 20})["d"]
    assert preds[5] == "DATE" and set(preds[:5] + preds[6:]) == {"AGE"}
    with pytest.raises(InputError):
        word_level_predictions(logits, encs, {"d": 25})


def test_evaluate_end_to_end_shapes(small_sequences):
    vocab = build_vocab([t.surface for s in small_sequences for t in s.tokens], 500)
    model = init_model(preset("tiny", vocab_size=len(vocab), max_positions=32))
    rep, preds = evaluate(model, small_sequences[:3], vocab, 32, "val", "tiny")
    assert isinstance(rep, EvalReport)
    assert rep.total == sum(len(s.tokens) for s in small_sequences[:3])
    assert all(len(preds[s.doc_id]) == len(s.tokens) for s in small_sequences[:3])
