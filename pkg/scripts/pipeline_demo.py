"""Run the full pipeline on a synthetic recording, clean and with injected blinks.

    python scripts/pipeline_demo.py --models models [--seed 0] [--amplitude 100]

Prints per-sub-trial verdict counts and the UBS fraction on the clean recording.
"""
import argparse
from collections import Counter

from icascope import synthgen
from icascope.cli import load_registry
from icascope.framework import PipelineConfig, run_pipeline

BLINK_SPANS = [(8.0, 24.0), (40.0, 52.0)]


def affected(start_s, window_s, spans, min_overlap=2.0):
    return any(min(start_s + window_s, b) - max(start_s, a) >= min_overlap for a, b in spans)


def verdict_name(det):
    return "UBS" if det.is_ubs else "+".join(det.verdict)


def summarize(result, spans, window_s):
    for i in range(result.n_subtrials):
        dets = result.detections(i)
        if not dets:
            print(f"  sub-trial {i:2d}: skipped")
            continue
        counts = Counter(verdict_name(d.detection) for d in dets)
        mark = "*" if affected(dets[0].start_s, window_s, spans) else " "
        print(f"  sub-trial {i:2d} {mark} t={dets[0].start_s:5.1f} s  "
              + "  ".join(f"{k}:{v}" for k, v in sorted(counts.items())))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--models", default="models")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--amplitude", type=float, default=100.0)
    args = ap.parse_args()

    reg = load_registry(args.models)
    cfg = PipelineConfig(seed=args.seed)
    clean, _ = synthgen.gen_clean_recording(60.0, seed=args.seed)

    res = run_pipeline(clean, reg, cfg)
    dets = res.detections()
    ubs = sum(d.detection.is_ubs for d in dets)
    print(f"clean: {res.n_subtrials} sub-trials, {ubs}/{len(dets)} UBS ({100 * ubs / max(len(dets), 1):.1f} %)")
    summarize(res, [], cfg.window_s)

    blinks = synthgen.inject_artifact(clean, "BEOG", args.amplitude, BLINK_SPANS, seed=args.seed)
    res = run_pipeline(blinks, reg, cfg)
    print(f"blinks at {BLINK_SPANS} ({args.amplitude:g} uV); * marks affected sub-trials")
    summarize(res, BLINK_SPANS, cfg.window_s)


if __name__ == "__main__":
    main()
