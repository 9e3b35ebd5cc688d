"""Command-line entry point: ``phideid <command> [options]``.

Every option can also come from a JSON config file given with ``--config``;
keys are the option names with dashes replaced by underscores, and explicit
flags override the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .align import align_corpus, write_alignment_report, write_sequences
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    SPLIT_NAMES,
    AnnotatedDocument,
    corpus_statistics,
    read_corpus,
    read_split_manifest,
    render_statistics,
    split_corpus,
    write_corpus,
    write_split_manifest,
)
from .deid import DeidPolicy, apply_policy, write_manifest
from .errors import DeidError
from .evaluation import evaluate, render_report
from .model import count_parameters, init_model, preset
from .pipeline import TrainRunner, encode_all, sequences_by_split, sized_config, vocab_for
from .subword import Vocabulary, write_encoded
from .synthetic import generate_synthetic_corpus
from .training import HyperParams, SweepGrid, sweep, train

log = logging.getLogger("phideid")

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "out": "out",
    "corpus": "corpus",
    "split_file": None,
    "keep_longest": False,
    "n_docs": 200,
    "classes": None,
    "ratios": [0.5, 0.1, 0.4],
    "model": "tiny",
    "vocab_size": 2000,
    "max_len": 64,
    "batch_size": 16,
    "epochs": 20,
    "lr": 0.5,
    "weight_decay": 0.0,
    "optimizer": "sgd",
    "dropout": None,
    "token_mask": 0.0,
    "grid_epochs": [10, 20],
    "grid_lr": [0.5, 0.2],
    "grid_weight_decay": [0.0, 0.01],
    "ledger": None,
    "checkpoint": None,
    "on": "test",
    "model_name": None,
    "mode": "tag-insert",
    "glyph": "*",
    "template": "[{cls}]",
    "input": None,
    "preset": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    # default=SUPPRESS so that unset flags never mask config-file values
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="JSON file of option values")
    p.add_argument("--seed", type=int, default=s, help="root seed for every stochastic stage")
    p.add_argument("--jobs", type=int, default=s, help="worker processes for sweep")
    p.add_argument("--out", default=s, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=s)


def build_parser() -> argparse.ArgumentParser:
    s = argparse.SUPPRESS
    parser = _Parser(prog="phideid", description="Clinical text de-identification toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p)
        return p

    def corpus_opts(p, split=False):
        p.add_argument("--corpus", default=s, help="directory of XML documents")
        p.add_argument("--keep-longest", action="store_true", default=s,
                       help="resolve overlapping gold spans by keeping the longer one")
        if split:
            p.add_argument("--split-file", default=s, help="split manifest (doc_id<TAB>split)")

    def model_opts(p):
        p.add_argument("--model", default=s, help="architecture preset (tiny, tiny-albert, bert-base, ...)")
        p.add_argument("--vocab-size", type=int, default=s)
        p.add_argument("--max-len", type=int, default=s, help="subword window length")
        p.add_argument("--batch-size", type=int, default=s)
        p.add_argument("--optimizer", choices=["sgd", "adamw"], default=s)
        p.add_argument("--dropout", type=float, default=s, help="override the preset's dropout rate")
        p.add_argument("--token-mask", type=float, default=s,
                       help="chance of replacing each training subword with [MASK]")

    p = cmd("gen", "write a synthetic corpus")
    p.add_argument("--n-docs", type=int, default=s)
    p.add_argument("--classes", nargs="+", default=s, help="PHI classes to include")

    p = cmd("parse", "validate every document of a corpus")
    corpus_opts(p)

    p = cmd("align", "tokenize, BIO-label and report dropped documents")
    corpus_opts(p)

    p = cmd("stats", "per-class token counts (per split if a manifest is given)")
    corpus_opts(p, split=True)

    p = cmd("split", "write a train/validation/test manifest")
    corpus_opts(p)
    p.add_argument("--ratios", type=float, nargs=3, default=s)

    p = cmd("train", "train one model")
    corpus_opts(p, split=True)
    model_opts(p)
    p.add_argument("--epochs", type=int, default=s)
    p.add_argument("--lr", type=float, default=s)
    p.add_argument("--weight-decay", type=float, default=s)

    p = cmd("sweep", "grid search over epochs x learning rate x weight decay")
    corpus_opts(p, split=True)
    model_opts(p)
    p.add_argument("--grid-epochs", type=int, nargs="+", default=s)
    p.add_argument("--grid-lr", type=float, nargs="+", default=s)
    p.add_argument("--grid-weight-decay", type=float, nargs="+", default=s)
    p.add_argument("--ledger", default=s, help="run ledger (defaults to OUT/ledger.jsonl)")

    p = cmd("eval", "score a checkpoint on one split")
    corpus_opts(p, split=True)
    p.add_argument("--checkpoint", default=s)
    p.add_argument("--on", choices=list(SPLIT_NAMES) + ["all"], default=s)
    p.add_argument("--model-name", default=s)

    p = cmd("deid", "write de-identified text and manifests")
    p.add_argument("--checkpoint", default=s)
    p.add_argument("--input", default=s, help="directory of .xml or .txt documents")
    p.add_argument("--mode", choices=["redact", "tag-insert"], default=s)
    p.add_argument("--glyph", default=s)
    p.add_argument("--template", default=s)

    p = cmd("ledger", "print the parameter ledger of an architecture preset")
    p.add_argument("--preset", default=s)
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    given = vars(ns)
    if "config" in given:
        try:
            with open(given["config"], encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DeidError(f"cannot read config {given['config']}: {exc}") from None
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    opts.update({k: v for k, v in given.items() if k != "config"})
    return opts


# ---------------------------------------------------------------- commands


def _out(o) -> Path:
    path = Path(o["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _corpus(o) -> list[AnnotatedDocument]:
    path = Path(o["corpus"])
    if not path.is_dir():
        raise DeidError(f"corpus directory {path} does not exist")
    docs = read_corpus(path, o["keep_longest"])
    if not docs:
        raise DeidError(f"no .xml documents in {path}")
    return docs


def _split(o, docs):
    if o["split_file"]:
        return read_split_manifest(o["split_file"], o["seed"])
    return split_corpus(docs, o["ratios"], o["seed"])


def cmd_gen(o) -> int:
    docs = generate_synthetic_corpus(o["n_docs"], o["seed"], o["classes"])
    write_corpus(docs, o["out"])
    info = {"seed": o["seed"], "n_docs": o["n_docs"], "classes": o["classes"]}
    (Path(o["out"]) / "generator.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(docs)} documents to {o['out']} (seed {o['seed']})")
    return 0


def cmd_parse(o) -> int:
    docs = _corpus(o)
    n_spans = sum(len(d.spans) for d in docs)
    print(f"parsed {len(docs)} documents, {n_spans} PHI spans")
    return 0


def cmd_align(o) -> int:
    docs = _corpus(o)
    sequences, reports = align_corpus(docs)
    out = _out(o)
    write_sequences(sequences, out / "tokens.jsonl")
    write_alignment_report(reports, out / "alignment_report.tsv")
    dropped = sum(r.dropped for r in reports)
    print(f"aligned {len(docs) - dropped} of {len(docs)} documents; dropped {dropped}")
    for r in reports:
        if r.dropped:
            print(f"  dropped {r.doc_id}: {'; '.join(r.reasons)}")
    return 0


def cmd_stats(o) -> int:
    docs = _corpus(o)
    sequences, _ = align_corpus(docs)
    columns = {"all": corpus_statistics(sequences)}
    if o["split_file"]:
        parts = sequences_by_split(sequences, read_split_manifest(o["split_file"]))
        columns = {name: corpus_statistics(parts[name]) for name in SPLIT_NAMES}
    text = render_statistics(columns)
    out = _out(o)
    (out / "stats.txt").write_text(text, encoding="utf-8")
    with open(out / "stats.tsv", "w", encoding="utf-8") as fh:
        fh.write(f"# seed {o['seed']}\n")
        fh.write("split\tlabel\tcount\tpercent\n")
        for name, rows in columns.items():
            for r in rows:
                fh.write(f"{name}\t{r.label}\t{r.count}\t{r.percent:.4f}\n")
    sys.stdout.write(text)
    return 0


def cmd_split(o) -> int:
    docs = _corpus(o)
    split = split_corpus(docs, o["ratios"], o["seed"])
    out = _out(o)
    path = out / "split.tsv"
    write_split_manifest(split, path)
    print("train {} / validation {} / test {} -> {}".format(*split.sizes(), path))
    return 0


def _prepare(o):
    docs = _corpus(o)
    sequences, reports = align_corpus(docs)
    split = _split(o, docs)
    parts = sequences_by_split(sequences, split)
    if not parts["train"]:
        raise DeidError("no aligned training documents")
    vocab = vocab_for(parts["train"], o["vocab_size"])
    overrides = {} if o["dropout"] is None else {"dropout": o["dropout"]}
    config = sized_config(preset(o["model"], **overrides), vocab, o["max_len"])
    return parts, vocab, config


def cmd_train(o) -> int:
    parts, vocab, config = _prepare(o)
    out = _out(o)
    vocab.save(out / "vocab.txt")
    encodings = encode_all(parts["train"], vocab, o["max_len"])
    write_encoded(encodings, out / "encoded_train.jsonl")
    hp = HyperParams(o["batch_size"], o["epochs"], o["lr"], o["weight_decay"], o["seed"], o["optimizer"],
                     o["token_mask"]).validate()
    model = init_model(config, o["seed"])
    model, record = train(model, encodings, hp)
    if parts["validation"]:
        report, _ = evaluate(model, parts["validation"], vocab, o["max_len"], "validation", o["model"])
        record.val_metrics = report.summary()
    meta = {"seed": o["seed"], "max_len": o["max_len"], "model_preset": o["model"], "hyperparams": hp.key()}
    record.checkpoint = str(save_checkpoint(out / "model.ckpt", model, vocab.tokens, meta))
    (out / "run.json").write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    from .plotting import plot_loss_curves

    plot_loss_curves({o["model"]: record.epoch_losses}, out / "loss.png")
    print(f"trained {count_parameters(config).total} parameters for {hp.num_epochs} epochs; "
          f"{record.samples_per_second:.1f} samples/s, {record.steps_per_second:.2f} steps/s; "
          f"validation {json.dumps({k: round(v, 4) for k, v in record.val_metrics.items()})}")
    return 0


def cmd_sweep(o) -> int:
    parts, vocab, config = _prepare(o)
    out = _out(o)
    vocab.save(out / "vocab.txt")
    runner = TrainRunner(
        config, vocab.tokens, encode_all(parts["train"], vocab, o["max_len"]), parts["validation"],
        o["max_len"], str(out / "runs"), o["model"], {"model_preset": o["model"]},
    )
    grid = SweepGrid(o["grid_epochs"], o["grid_lr"], o["grid_weight_decay"], o["batch_size"], o["seed"],
                     o["optimizer"], o["token_mask"])
    ledger = o["ledger"] or out / "ledger.jsonl"
    best, records = sweep(grid, runner, ledger, o["jobs"])
    with open(out / "sweep.tsv", "w", encoding="utf-8") as fh:
        fh.write("epochs\tlr\tweight_decay\tstatus\tprecision\trecall\tf1\taccuracy\tsamples_per_s\tsteps_per_s\tcheckpoint\n")
        for r in records:
            m, h = r.val_metrics, r.hyperparams
            fh.write(f"{h.num_epochs}\t{h.learning_rate:g}\t{h.weight_decay:g}\t{r.status}\t"
                     + "\t".join(f"{m.get(k, 0.0):.4f}" for k in ("precision", "recall", "f1", "accuracy"))
                     + f"\t{r.samples_per_second:.3f}\t{r.steps_per_second:.3f}\t{r.checkpoint}\n")
    (out / "best.json").write_text(json.dumps(best.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if best.checkpoint:
        model, header = load_checkpoint(best.checkpoint)
        save_checkpoint(out / "best.ckpt", model, header["vocab"], header["meta"])
    h = best.hyperparams
    print(f"{len(records)} runs; best epochs={h.num_epochs} lr={h.learning_rate:g} "
          f"weight_decay={h.weight_decay:g} validation F1={best.val_metrics.get('f1', 0.0):.4f}")
    return 0


def _load(o):
    if not o["checkpoint"]:
        raise DeidError("--checkpoint is required")
    model, header = load_checkpoint(o["checkpoint"])
    if not header.get("vocab"):
        raise DeidError(f"{o['checkpoint']} carries no vocabulary")
    return model, Vocabulary(header["vocab"]), header["meta"].get("max_len", o["max_len"]), header


def cmd_eval(o) -> int:
    model, vocab, max_len, header = _load(o)
    docs = _corpus(o)
    sequences, _ = align_corpus(docs)
    name = o["model_name"] or header["meta"].get("model_preset", "model")
    if o["on"] == "all":
        chosen = {"all": sequences}
    else:
        chosen = {o["on"]: sequences_by_split(sequences, _split(o, docs))[o["on"]]}
    reports = [evaluate(model, seqs, vocab, max_len, split, name)[0] for split, seqs in chosen.items()]
    out = _out(o)
    header_line = f"# seed {header['meta'].get('seed', o['seed'])} checkpoint {o['checkpoint']}\n"
    (out / "report.txt").write_text(render_report(reports, "table-text"), encoding="utf-8")
    (out / "report.tsv").write_text(header_line + render_report(reports, "delimited"), encoding="utf-8")
    bar = render_report(reports, "bar-data")
    (out / "f1_by_class.tsv").write_text(bar, encoding="utf-8")
    from .evaluation import parse_bar_data
    from .plotting import plot_class_f1

    rows = parse_bar_data(bar)
    if rows:
        plot_class_f1(rows, out / "f1_by_class.png")
    sys.stdout.write(render_report(reports, "table-text"))
    return 0


def cmd_deid(o) -> int:
    from .align import TokenSequence, tokenize
    from .evaluation import predict_logits, word_level_predictions
    from .subword import encode

    model, vocab, max_len, _ = _load(o)
    src = Path(o["input"] or o["corpus"])
    if not src.is_dir():
        raise DeidError(f"input directory {src} does not exist")
    docs = [(d.doc_id, d.text) for d in read_corpus(src)] if list(src.glob("*.xml")) else [
        (p.stem, p.read_text(encoding="utf-8")) for p in sorted(src.glob("*.txt"))
    ]
    policy = DeidPolicy(o["mode"], o["glyph"], o["template"]).validate()
    out = _out(o)
    n_runs = 0
    for doc_id, text in docs:
        seq = TokenSequence(doc_id, tokenize(text))
        encs = encode(seq, vocab, max_len)
        labels = word_level_predictions(predict_logits(model, encs), encs, {doc_id: len(seq.tokens)})[doc_id]
        deid_text, manifest = apply_policy(text, seq.tokens, labels, policy)
        (out / f"{doc_id}.txt").write_text(deid_text, encoding="utf-8")
        write_manifest(manifest, out / f"{doc_id}.manifest.jsonl")
        n_runs += len(manifest)
    print(f"de-identified {len(docs)} documents, replaced {n_runs} PHI runs -> {out}")
    return 0


def cmd_ledger(o) -> int:
    sys.stdout.write(count_parameters(preset(o["preset"] or o["model"])).render())
    return 0


COMMANDS = {
    "gen": cmd_gen, "parse": cmd_parse, "align": cmd_align, "stats": cmd_stats, "split": cmd_split,
    "train": cmd_train, "sweep": cmd_sweep, "eval": cmd_eval, "deid": cmd_deid, "ledger": cmd_ledger,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not ns.command:
            raise UsageError("phideid: a command is required (" + ", ".join(COMMANDS) + ")")
        opts = resolve(ns)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(str(exc), file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if opts.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](opts)
    except (DeidError, OSError) as exc:
        print(f"phideid {ns.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
