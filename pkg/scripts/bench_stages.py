"""Stage timings of one 8 s sub-trial as the number of components grows.

    python scripts/bench_stages.py --models models [--runs 5]

Prints the median ICA / topoplot / classification times for 8, 16 and 32
components. The untrained registry is used when --models is omitted, since
classification cost does not depend on the weights.
"""
import argparse

from icascope import synthgen as S
from icascope.cli import load_registry
from icascope.framework import Registry, benchmark
from icascope.nn.network import CATEGORIES, build_architecture, init_model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--models")
    ap.add_argument("--runs", type=int, default=5)
    args = ap.parse_args()

    if args.models:
        reg = load_registry(args.models)
    else:
        reg = Registry()
        for c in CATEGORIES:
            reg = reg.register(init_model(build_architecture(c), seed=0, category=c), c)
    rec, _ = S.gen_clean_recording(8.0, seed=0)
    print(f"{'components':>10} {'ica':>8} {'topoplot':>9} {'classify':>9} {'total':>8}")
    for k in (8, 16, 32):
        t = benchmark(reg, rec.samples, rec.channel_names, runs=args.runs, n_components=k)
        print(f"{k:>10} {t['ica']:>8.3f} {t['topoplot']:>9.3f} {t['classification']:>9.3f} {t['total']:>8.3f}")


if __name__ == "__main__":
    main()
