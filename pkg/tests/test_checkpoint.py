from __future__ import annotations

import numpy as np
import pytest

from phideid.checkpoint import checkpoint_bytes, load_checkpoint, save_checkpoint
from phideid.errors import InputError
from phideid.model import init_model, preset


def test_round_trip(tmp_path):
    model = init_model(preset("tiny-albert", vocab_size=70, max_positions=16), seed=2)
    path = save_checkpoint(tmp_path / "m.ckpt", model, ["a", "b"], {"seed": 2})
    back, header = load_checkpoint(path)
    assert back.config == model.config
    assert all(np.array_equal(back.params[k], model.params[k]) for k in model.params)
    assert header["vocab"] == ["a", "b"] and header["meta"] == {"seed": 2}
    assert header["ledger_total"] == model.num_parameters()
    assert not list(tmp_path.glob("*.tmp"))


def test_bytes_are_deterministic():
    cfg = preset("tiny", vocab_size=40, max_positions=16)
    assert checkpoint_bytes(init_model(cfg, 1)) == checkpoint_bytes(init_model(cfg, 1))
    assert checkpoint_bytes(init_model(cfg, 1)) != checkpoint_bytes(init_model(cfg, 2))


def test_rejects_foreign_and_truncated(tmp_path):
    bad = tmp_path / "x.ckpt"
    bad.write_bytes(b"NOTACKPT" + b"\0" * 20)
    with pytest.raises(InputError):
        load_checkpoint(bad)
    model = init_model(preset("tiny", vocab_size=40, max_positions=16))
    blob = checkpoint_bytes(model)
    bad.write_bytes(blob[:-400])
    with pytest.raises(InputError):
        load_checkpoint(bad)
