"""icascope command line: synth, train, classify, eval, pipeline, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import synthgen
from .eeg_io import load_recording, window_subtrials
from .errors import DataError, IcascopeError
from .framework import (PipelineConfig, Registry, benchmark, classify_batch, evaluate,
                        run_pipeline, write_detections)
from .nn.network import CATEGORIES, build_architecture
from .nn.serialize import load_model, save_model
from .nn.train import TrainConfig, train
from .topomap import load_png, to_input

log = logging.getLogger("icascope")

MODEL_SUFFIX = ".model"


class UsageError(Exception):
    pass


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def model_path(models_dir, category) -> Path:
    return Path(models_dir) / f"{category}{MODEL_SUFFIX}"


def load_registry(models_dir, categories=CATEGORIES) -> Registry:
    reg = Registry()
    for c in categories:
        reg = reg.register(load_model(model_path(models_dir, c)), c)
    return reg


# ------------------------------------------------------------------ commands

def cmd_synth(args, out):
    counts = synthgen.table1_counts(args.scale)
    rows = synthgen.gen_corpus(counts, tuple(args.noise), args.seed, args.out)
    print(f"manifest: {Path(args.out) / 'labels.csv'}", file=out)
    for label in synthgen.LABELS:
        print(f"{label}\t{sum(r['label'] == label for r in rows)}", file=out)
    return 0


def _train_config(args, seed):
    return TrainConfig(learning_rate=args.lr, momentum=args.momentum, batch_size=args.batch_size,
                       max_epochs=args.epochs, clip_norm=args.clip, clip_mode=args.clip_mode,
                       patience=args.patience, min_delta=args.min_delta, seed=seed)


def write_history(hist, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_acc", "val_acc", "train_loss", "val_loss"])
        for e, ta, va, tl, vl in hist.rows():
            w.writerow([e, f"{ta:.6f}", f"{va:.6f}", f"{tl:.6f}", f"{vl:.6f}"])


def cmd_train(args, out):
    rows = synthgen.read_manifest(args.corpus)
    labels = [r["label"] for r in rows]
    idx, targets = synthgen.one_vs_rest(labels, args.category, seed=args.seed, negatives=args.negatives)
    if len(idx) == 0 or not np.any(targets == 0):
        raise DataError(f"corpus has no {args.category} examples")
    images = synthgen.load_corpus_images(args.corpus, [rows[i] for i in idx])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = build_architecture(args.category)
    accs = []
    for r in range(args.repeats):
        seed = args.seed + r
        model, hist = train(spec, images, targets, _train_config(args, seed), args.category)
        best = hist.val_acc[hist.best_epoch - 1] if hist.best_epoch else hist.val_acc[-1]
        accs.append(100.0 * best)
        suffix = "" if args.repeats == 1 else f"_r{r}"
        if r == 0:
            save_model(model, model_path(out_dir, args.category))
        write_history(hist, out_dir / f"{args.category}_history{suffix}.csv")
        print(f"{args.category} seed {seed}: epochs {hist.epoch[-1]} best epoch {hist.best_epoch} "
              f"val acc {accs[-1]:.1f} %", file=out)
    print(f"model: {model_path(out_dir, args.category)}", file=out)
    if args.repeats > 1:
        print(f"acc = {np.mean(accs):.1f} ± {np.std(accs):.1f} %", file=out)
    return 0


def cmd_classify(args, out):
    reg = load_registry(args.models)
    paths = sorted(Path(args.images).glob("*.png"))
    if not paths:
        raise DataError(f"no PNG files in {args.images}")
    for s in range(0, len(paths), 64):
        chunk = paths[s:s + 64]
        x = np.stack([to_input(load_png(p)) for p in chunk])
        for p, d in zip(chunk, classify_batch(reg, x)):
            rec = {"file": p.name}
            rec.update(d.to_record())
            print(json.dumps(rec, sort_keys=True), file=out)
    return 0


def cmd_eval(args, out):
    reg = load_registry(args.models)
    rows = synthgen.read_manifest(args.corpus)
    images = synthgen.load_corpus_images(args.corpus, rows)
    m = evaluate(reg, images, [r["label"] for r in rows])
    print(m.table(), file=out)
    print(f"overall accuracy {m.overall_accuracy:.1f} %; double detections {m.doubles} "
          f"of {m.flagged} flagged ({100 * m.double_fraction:.1f} %)", file=out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(m.csv_rows())
    return 0


def _pipeline_config(args):
    return PipelineConfig(notch_freqs=tuple(args.notch), window_s=args.window, hop_s=args.hop,
                          seed=args.seed)


def cmd_pipeline(args, out):
    reg = load_registry(args.models)
    rec = load_recording(args.recording)
    result = run_pipeline(rec, reg, _pipeline_config(args))
    if args.out:
        with open(args.out, "w") as fh:
            write_detections(result, fh)
    else:
        write_detections(result, out)
    timing = dict(result.timing, total=sum(result.timing.values()),
                  subtrials=result.n_subtrials, skipped=len(result.skipped))
    print(json.dumps({"timing": timing}, sort_keys=True), file=sys.stderr if not args.out else out)
    return 0


def cmd_bench(args, out):
    reg = load_registry(args.models)
    if args.recording:
        rec = load_recording(args.recording)
    else:
        rec, _ = synthgen.gen_clean_recording(duration_s=8.0, seed=args.seed)
    st = window_subtrials(rec, args.window, args.window)[0]
    t = benchmark(reg, st.samples, rec.channel_names, runs=args.runs, n_components=args.components,
                  seed=args.seed)
    print(f"components {t['n_components']}, median of {t['runs']} runs", file=out)
    for k in ("ica", "topoplot", "classification", "total"):
        print(f"{k:<16}{t[k]:.3f} s", file=out)
    return 0


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="icascope", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="render a labelled synthetic topoplot corpus")
    s.add_argument("--preset", choices=["table1"], default="table1")
    s.add_argument("--scale", type=_positive_float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, nargs=2, default=(0.0, 0.1), metavar=("LO", "HI"))
    s.add_argument("--out", required=True, help="corpus directory (images/ + labels.csv)")
    s.set_defaults(func=cmd_synth)

    d = TrainConfig()
    t = sub.add_parser("train", help="train one category's one-vs-rest CNN")
    t.add_argument("--category", choices=CATEGORIES, required=True)
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", default="models", help="directory for the model file and history CSV")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--repeats", type=_positive_int, default=1)
    t.add_argument("--negatives", choices=["table1", "all"], default="table1")
    t.add_argument("--epochs", type=_positive_int, default=d.max_epochs)
    t.add_argument("--lr", type=_positive_float, default=d.learning_rate)
    t.add_argument("--momentum", type=float, default=d.momentum)
    t.add_argument("--batch-size", type=_positive_int, default=d.batch_size)
    t.add_argument("--clip", type=_positive_float, default=d.clip_norm)
    t.add_argument("--clip-mode", choices=["global", "per-parameter"], default=d.clip_mode)
    t.add_argument("--patience", type=_positive_int, default=d.patience)
    t.add_argument("--min-delta", type=float, default=d.min_delta)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="classify a directory of topoplot PNGs")
    c.add_argument("--models", required=True)
    c.add_argument("--images", required=True)
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("eval", help="per-category error table over a labelled corpus")
    e.add_argument("--models", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--csv", help="also write the confusion counts as CSV")
    e.set_defaults(func=cmd_eval)

    pc = PipelineConfig()
    pl = sub.add_parser("pipeline", help="notch, window, ICA, render and classify a recording")
    pl.add_argument("--models", required=True)
    pl.add_argument("--recording", required=True, help=".csv or .f32 recording")
    pl.add_argument("--window", type=_positive_float, default=pc.window_s)
    pl.add_argument("--hop", type=_positive_float, default=pc.hop_s)
    pl.add_argument("--notch", type=_positive_float, nargs="*", default=list(pc.notch_freqs))
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out", help="detection stream file (default stdout)")
    pl.set_defaults(func=cmd_pipeline)

    b = sub.add_parser("bench", help="median stage timings for one sub-trial")
    b.add_argument("--models", required=True)
    b.add_argument("--recording", help="recording to take the first window from (default synthetic)")
    b.add_argument("--window", type=_positive_float, default=pc.window_s)
    b.add_argument("--components", type=_positive_int, default=32)
    b.add_argument("--runs", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def _validate(parser, args):
    if args.command == "synth":
        lo, hi = args.noise
        if not 0 <= lo <= hi <= 0.5:
            parser.error("--noise needs 0 <= LO <= HI <= 0.5")
    if args.command == "train":
        if not 0 <= args.momentum < 1:
            parser.error("--momentum must be in [0, 1)")
        if not 1 <= args.epochs <= 400:
            parser.error("--epochs must be in [1, 400]")
        if args.batch_size < 2:
            parser.error("--batch-size must be at least 2")
        if args.min_delta < 0:
            parser.error("--min-delta must be non-negative")
    if args.command == "bench" and args.runs < 5:
        parser.error("--runs must be at least 5")


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (IcascopeError, OSError, ValueError) as exc:
        print(f"icascope {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
