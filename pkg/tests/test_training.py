from __future__ import annotations

import json

import numpy as np
import pytest

from phideid.errors import ConfigError, InputError, SweepError, TrainingDivergedError
from phideid.model import init_model, preset
from phideid.pipeline import TrainRunner, encode_all, sized_config, vocab_for
from phideid.subword import MASK_ID
from phideid.training import (
    PUBLISHED_GRIDS,
    HyperParams,
    RunRecord,
    SweepGrid,
    read_ledger,
    select_best,
    sgd_step,
    sweep,
    train,
)


@pytest.fixture(scope="module")
def tiny_setup(small_sequences):
    vocab = vocab_for(small_sequences[:8], 400)
    encs = encode_all(small_sequences[:8], vocab, 32)
    cfg = sized_config(preset("tiny", hidden_dim=32, embedding_dim=32, ffn_dim=64, num_layers=1), vocab, 32)
    return vocab, encs, cfg


def test_sgd_step_decoupled_decay():
    model = init_model(preset("tiny", vocab_size=30, max_positions=8))
    before = {k: v.copy() for k, v in model.params.items()}
    grads = {k: np.full_like(v, 0.5) for k, v in model.params.items()}
    sgd_step(model, grads, lr=0.1, weight_decay=0.2)
    w = "layers.0.q_w"
    np.testing.assert_allclose(model.params[w], before[w] - 0.1 * (0.5 + 0.2 * before[w]), rtol=1e-6)
    b = "layers.0.q_b"
    np.testing.assert_allclose(model.params[b], before[b] - 0.1 * 0.5)


def test_hyperparam_validation():
    for bad in (dict(batch_size=0), dict(learning_rate=0), dict(weight_decay=-1), dict(optimizer="lion"),
                dict(token_mask=1.0)):
        with pytest.raises(ConfigError):
            HyperParams(**bad).validate()


def test_grid_is_full_product():
    grid = SweepGrid([1, 2], [0.1, 0.2], [0.0, 0.01])
    pts = grid.points()
    assert len(pts) == len(grid) == 8
    assert len({p.key() for p in pts}) == 8
    assert len(PUBLISHED_GRIDS["roberta-large"]) == 7 * 3 * 5


def test_training_reduces_loss_and_is_deterministic(tiny_setup):
    _, encs, cfg = tiny_setup
    hp = HyperParams(8, 6, 0.005, 0.0, 3, "adamw")
    a, rec_a = train(init_model(cfg, 3), encs, hp)
    b, rec_b = train(init_model(cfg, 3), encs, hp)
    assert rec_a.epoch_losses[-1] < rec_a.epoch_losses[0]
    assert rec_a.epoch_losses == rec_b.epoch_losses
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert rec_a.windows_processed == 6 * len(encs)
    assert rec_a.optimizer_steps == 6 * -(-len(encs) // 8)
    assert rec_a.samples_per_second > 0 and rec_a.steps_per_second > 0


def test_token_mask_only_touches_content(tiny_setup, monkeypatch):
    _, encs, cfg = tiny_setup
    model = init_model(cfg, 0)
    seen = []
    real = type(model).forward

    def spy(self, ids, mask=None, **kw):
        seen.append(np.array(ids))
        return real(self, ids, mask, **kw)

    monkeypatch.setattr(type(model), "forward", spy)
    train(model, encs[:4], HyperParams(4, 1, 0.01, 0.0, 0, "sgd", token_mask=0.5))
    ids = seen[0]
    assert (ids == MASK_ID).any()
    # [CLS], [SEP] and padding survive
    assert np.all(ids[:, 0] == 2)


def test_divergence_raises(tiny_setup):
    _, encs, cfg = tiny_setup
    model = init_model(cfg, 0)
    model.params["cls_w"][:] = np.nan
    with pytest.raises(TrainingDivergedError):
        train(model, encs, HyperParams(8, 1, 0.1))
    with pytest.raises(InputError):
        train(model, [], HyperParams())


def _rec(f1, acc, epochs, lr, status="ok"):
    return RunRecord(HyperParams(num_epochs=epochs, learning_rate=lr), val_metrics={"f1": f1, "accuracy": acc},
                     status=status)


def test_selection_tie_breaks():
    recs = [_rec(0.8, 0.9, 10, 0.1), _rec(0.9, 0.9, 20, 0.1), _rec(0.9, 0.95, 30, 0.1),
            _rec(0.9, 0.95, 10, 0.2), _rec(0.9, 0.95, 10, 0.05), _rec(1.0, 1.0, 1, 1.0, status="failed")]
    assert select_best(recs) is recs[4]
    with pytest.raises(SweepError):
        select_best([recs[-1]])


class FakeRunner:
    """Deterministic stand-in: F1 is a fixed function of the grid point."""

    def __init__(self, fail_lr=None):
        self.calls = []
        self.fail_lr = fail_lr

    def __call__(self, hp):
        self.calls.append(hp)
        if hp.learning_rate == self.fail_lr:
            raise TrainingDivergedError("boom")
        f1 = 1.0 / (1 + abs(hp.num_epochs - 20)) - hp.weight_decay
        return RunRecord(hp, val_metrics={"f1": f1, "accuracy": 0.5})


def test_sweep_resumes_from_ledger(tmp_path):
    ledger = tmp_path / "ledger.jsonl"
    grid = SweepGrid([10, 20], [0.1, 0.2], [0.0, 0.01])
    first = FakeRunner()
    sweep(grid.points()[:3], first, ledger)
    second = FakeRunner()
    best, records = sweep(grid, second, ledger)
    assert len(second.calls) == 5
    assert len(read_ledger(ledger)) == 8
    assert best.val_metrics["f1"] == max(r.val_metrics["f1"] for r in records)
    again = FakeRunner()
    sweep(grid, again, ledger)
    assert again.calls == []


def test_sweep_tolerates_torn_ledger_and_failures(tmp_path):
    ledger = tmp_path / "ledger.jsonl"
    ledger.write_text('{"hyperparams": {"batch_size": 16\n')
    best, records = sweep(SweepGrid([20], [0.1, 0.2], [0.0]), FakeRunner(fail_lr=0.2), ledger)
    assert [r.status for r in records] == ["ok", "failed"]
    assert best.hyperparams.learning_rate == 0.1
    rows = [json.loads(line) for line in ledger.read_text().splitlines()[1:]]
    assert len(rows) == 2


def test_parallel_sweep_matches_serial(tmp_path):
    grid = SweepGrid([10, 20], [0.1], [0.0, 0.01])
    _, serial = sweep(grid, FakeRunner())
    _, parallel = sweep(grid, FakeRunner(), tmp_path / "p.jsonl", jobs=2)
    assert [r.val_metrics for r in serial] == [r.val_metrics for r in parallel]


def test_real_two_by_two_sweep(tmp_path, tiny_setup, small_sequences):
    vocab, encs, cfg = tiny_setup
    runner = TrainRunner(cfg, vocab.tokens, encs, small_sequences[8:11], 32, str(tmp_path), "tiny")
    best, records = sweep(SweepGrid([1, 2], [0.01, 0.003], [0.0], 8, 0, "adamw"), runner, tmp_path / "l.jsonl")
    assert len(records) == 4 and all(r.checkpoint for r in records)
    assert best.val_metrics["f1"] == max(r.val_metrics["f1"] for r in records)
