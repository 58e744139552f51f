"""Train the three CNNs on a table1-preset corpus and report held-out accuracy.

    python scripts/train_all.py [--scale 0.25] [--seed 7] [--repeats 1] [--out models]

Each repeat reseeds the split and the initialization; with several repeats the
mean and standard deviation of the best validation accuracy are printed, in the
form accuracy = mean +- std. The first repeat's models are saved under --out and
then scored on a fresh corpus (seed + 1) through the merged registry.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from icascope import synthgen as S
from icascope.cli import model_path, write_history
from icascope.framework import Registry, evaluate
from icascope.nn.network import CATEGORIES, build_architecture
from icascope.nn.serialize import save_model
from icascope.nn.train import TrainConfig, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", type=float, default=0.25)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--patience", type=int, default=5)
    ap.add_argument("--out", default="models")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    imgs, labels, _ = S.render_corpus(S.table1_counts(args.scale), seed=args.seed)
    imgs = imgs.transpose(0, 3, 1, 2)
    print(f"corpus: {len(labels)} topoplots, scale {args.scale}, seed {args.seed}")

    reg = Registry()
    for cat in CATEGORIES:
        accs = []
        for r in range(args.repeats):
            idx, y = S.one_vs_rest(labels, cat, seed=r)
            cfg = TrainConfig(max_epochs=args.epochs, patience=args.patience, seed=r)
            t0 = time.perf_counter()
            model, hist = train(build_architecture(cat), imgs[idx], y, cfg, cat)
            best = hist.val_acc[hist.best_epoch - 1]
            accs.append(100 * best)
            print(f"{cat} run {r}: {len(idx)} images, best epoch {hist.best_epoch}/{hist.epoch[-1]}, "
                  f"val acc {accs[-1]:.1f} %, {time.perf_counter() - t0:.0f} s")
            write_history(hist, out / f"{cat}_history_r{r}.csv")
            if r == 0:
                save_model(model, model_path(out, cat))
                reg = reg.register(model, cat)
        print(f"{cat}: accuracy = {np.mean(accs):.1f} +- {np.std(accs):.1f} %")

    fresh, fresh_labels, _ = S.render_corpus(S.table1_counts(args.scale / 2), seed=args.seed + 1)
    m = evaluate(reg, fresh.transpose(0, 3, 1, 2), fresh_labels)
    print(f"\nfresh corpus ({len(fresh_labels)} topoplots, seed {args.seed + 1})")
    print(m.table())
    print(f"doubles {m.doubles}/{m.flagged} flagged ({100 * m.double_fraction:.1f} %)")


if __name__ == "__main__":
    main()
