"""Fine-tuning loop, hyperparameter sweep with a resumable run ledger, throughput."""

from __future__ import annotations

import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputError, MeasurementError, SweepError, TrainingDivergedError
from .labels import IGNORE_INDEX
from .subword import FIRST_FREE_ID, MASK_ID
from .model import TaggerModel, cross_entropy, is_decay_exempt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperParams:
    batch_size: int = 16
    num_epochs: int = 10
    learning_rate: float = 1e-4
    weight_decay: float = 0.0
    seed: int = 0
    optimizer: str = "sgd"
    # chance of swapping each input subword for [MASK] during training
    token_mask: float = 0.0

    def validate(self) -> "HyperParams":
        if self.batch_size < 1 or self.num_epochs < 1:
            raise ConfigError("batch_size and num_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.optimizer not in ("sgd", "adamw"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.token_mask < 1.0:
            raise ConfigError("token_mask must lie in [0, 1)")
        return self

    def key(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class SweepGrid:
    num_epochs: list[int]
    learning_rate: list[float]
    weight_decay: list[float]
    batch_size: int = 16
    seed: int = 0
    optimizer: str = "sgd"
    token_mask: float = 0.0

    def points(self) -> list[HyperParams]:
        pts = [
            HyperParams(self.batch_size, e, lr, wd, self.seed, self.optimizer, self.token_mask).validate()
            for e, lr, wd in itertools.product(self.num_epochs, self.learning_rate, self.weight_decay)
        ]
        if not pts:
            raise ConfigError("sweep grid is empty")
        return pts

    def __len__(self) -> int:
        return len(self.num_epochs) * len(self.learning_rate) * len(self.weight_decay)


_BASE_EPOCHS = [10, 20, 30, 40, 50]
_BASE_LR = [1e-4, 1e-5]
_BASE_WD = [0.0, 0.01, 0.025]

# batch sizes and grids used for the six published model classes
PUBLISHED_GRIDS = {
    "bert-base": SweepGrid(_BASE_EPOCHS, _BASE_LR, _BASE_WD, 35),
    "roberta-base": SweepGrid(_BASE_EPOCHS, _BASE_LR, _BASE_WD, 35),
    "albert-base": SweepGrid(_BASE_EPOCHS, _BASE_LR, _BASE_WD, 35),
    "bert-large": SweepGrid(_BASE_EPOCHS, _BASE_LR, _BASE_WD, 12),
    "roberta-large": SweepGrid(_BASE_EPOCHS + [75, 100], _BASE_LR + [1e-6], _BASE_WD + [0.05, 0.10], 12),
    "albert-xxlarge": SweepGrid(_BASE_EPOCHS, _BASE_LR, _BASE_WD, 6),
}


@dataclass
class RunRecord:
    hyperparams: HyperParams
    epoch_losses: list[float] = field(default_factory=list)
    val_metrics: dict[str, float] = field(default_factory=dict)
    train_seconds: float = 0.0
    windows_processed: int = 0
    optimizer_steps: int = 0
    samples_per_second: float = 0.0
    steps_per_second: float = 0.0
    checkpoint: str = ""
    status: str = "ok"
    message: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["key"] = self.hyperparams.key()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d.pop("key", None)
        d["hyperparams"] = HyperParams(**d["hyperparams"])
        return cls(**d)


# ---------------------------------------------------------------- optimisation


def sgd_step(model: TaggerModel, grads: dict[str, np.ndarray], lr: float, weight_decay: float) -> None:
    """theta <- theta - lr * (g + weight_decay * theta); biases and LayerNorm excluded from decay."""
    for name, theta in model.params.items():
        g = grads[name]
        if weight_decay and not is_decay_exempt(name):
            theta -= lr * (g + weight_decay * theta)
        else:
            theta -= lr * g


class AdamW:
    """Moment-based alternative with the same decoupled decay rule."""

    def __init__(self, model: TaggerModel, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = {k: np.zeros_like(v) for k, v in model.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in model.params.items()}
        self.b1, self.b2, self.eps, self.t = beta1, beta2, eps, 0

    def step(self, model: TaggerModel, grads, lr: float, weight_decay: float) -> None:
        self.t += 1
        c1, c2 = 1 - self.b1 ** self.t, 1 - self.b2 ** self.t
        for name, theta in model.params.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if weight_decay and not is_decay_exempt(name):
                update = update + weight_decay * theta
            theta -= (lr * update).astype(theta.dtype)


def pad_batch(encodings, pad_id: int = 0):
    T = max(len(e) for e in encodings)
    ids = np.full((len(encodings), T), pad_id, dtype=np.int64)
    labels = np.full((len(encodings), T), IGNORE_INDEX, dtype=np.int64)
    mask = np.zeros((len(encodings), T), dtype=np.int64)
    for row, e in enumerate(encodings):
        n = len(e)
        ids[row, :n] = e.input_ids
        labels[row, :n] = e.label_ids
        mask[row, :n] = e.attention_mask
    return ids, labels, mask


def train(model: TaggerModel, train_set: Sequence, hp: HyperParams,
          epoch_callback: Callable[[int, float], None] | None = None) -> tuple[TaggerModel, RunRecord]:
    """Fine-tune ``model`` in place on encoded windows.

    Windows from all documents are pooled and reshuffled each epoch by a
    generator seeded from ``hp.seed``; the final partial batch is kept.
    Batches with no labelled position are skipped.
    """
    hp.validate()
    if not train_set:
        raise InputError("training set is empty")
    rng = np.random.default_rng(hp.seed)
    record = RunRecord(hp)
    adam = AdamW(model) if hp.optimizer == "adamw" else None
    start = time.perf_counter()
    for epoch in range(hp.num_epochs):
        order = rng.permutation(len(train_set))
        total, batches = 0.0, 0
        for s in range(0, len(order), hp.batch_size):
            chunk = [train_set[i] for i in order[s:s + hp.batch_size]]
            ids, labels, mask = pad_batch(chunk)
            record.windows_processed += len(chunk)
            if not (labels != IGNORE_INDEX).any():
                continue
            if hp.token_mask > 0:
                # never mask specials or padding
                hit = (rng.random(ids.shape) < hp.token_mask) & (ids >= FIRST_FREE_ID)
                ids = np.where(hit, MASK_ID, ids)
            trace = model.forward(ids, mask, train=True, rng=rng)
            loss, dlogits = cross_entropy(trace.logits, labels)
            if not math.isfinite(loss):
                record.status = "failed"
                record.message = f"non-finite loss at epoch {epoch + 1}"
                record.train_seconds = time.perf_counter() - start
                raise TrainingDivergedError(record.message)
            grads = model.backward(trace, dlogits)
            if adam is not None:
                adam.step(model, grads, hp.learning_rate, hp.weight_decay)
            else:
                sgd_step(model, grads, hp.learning_rate, hp.weight_decay)
            record.optimizer_steps += 1
            total += loss
            batches += 1
        mean = total / max(batches, 1)
        record.epoch_losses.append(mean)
        if epoch_callback is not None:
            epoch_callback(epoch + 1, mean)
        log.debug("epoch %d loss %.4f", epoch + 1, mean)
    record.train_seconds = time.perf_counter() - start
    if record.train_seconds > 0:
        record.samples_per_second, record.steps_per_second = measure_throughput(record)
    return model, record


def measure_throughput(run: RunRecord) -> tuple[float, float]:
    if run.train_seconds <= 0:
        raise MeasurementError("run has no elapsed training time")
    return run.windows_processed / run.train_seconds, run.optimizer_steps / run.train_seconds


# ---------------------------------------------------------------- sweep


def select_best(records: Sequence[RunRecord]) -> RunRecord:
    """Highest validation F1; ties by accuracy, then fewer epochs, then lower learning rate."""
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise SweepError("every sweep run failed")
    return max(ok, key=lambda r: (r.val_metrics.get("f1", 0.0), r.val_metrics.get("accuracy", 0.0),
                                  -r.hyperparams.num_epochs, -r.hyperparams.learning_rate))


def read_ledger(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                try:
                    out.append(RunRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, TypeError, KeyError):
                    log.warning("skipping unreadable ledger line in %s", path)
    return out


def append_ledger(path: str | Path, record: RunRecord) -> None:
    # one write call per record so a crash never leaves half a line behind another
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        fh.flush()


def _safe_run(runner, hp: HyperParams) -> RunRecord:
    try:
        return runner(hp)
    except TrainingDivergedError as exc:
        return RunRecord(hp, status="failed", message=str(exc))


def sweep(grid: SweepGrid | Sequence[HyperParams], runner: Callable[[HyperParams], RunRecord],
          ledger_path: str | Path | None = None, jobs: int = 1) -> tuple[RunRecord, list[RunRecord]]:
    """One run per grid point, skipping points already recorded in the ledger.

    Returns the best record and all records in grid order.
    """
    points = grid.points() if isinstance(grid, SweepGrid) else list(grid)
    if not points:
        raise ConfigError("sweep grid is empty")
    done = {r.hyperparams.key(): r for r in read_ledger(ledger_path)} if ledger_path else {}
    todo = [hp for hp in points if hp.key() not in done]
    if done:
        log.info("ledger has %d of %d grid points; %d to run", len(points) - len(todo), len(points), len(todo))

    def commit(rec: RunRecord):
        done[rec.hyperparams.key()] = rec
        if ledger_path:
            append_ledger(ledger_path, rec)

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_safe_run, [runner] * len(todo), todo):
                commit(rec)
    else:
        for hp in todo:
            commit(_safe_run(runner, hp))
    records = [done[hp.key()] for hp in points]
    return select_best(records), records
