"""Acceptance suite: one or more tests per criterion, summarized at the end of the run."""
import hashlib
import io
import time

import numpy as np
import pytest

from icascope import synthgen as S
from icascope.framework import PipelineConfig, benchmark, evaluate, run_pipeline, write_detections
from icascope.ica import ComponentWeights, amari_index, center_whiten, decompose
from icascope.montage import DEAP_CHANNELS
from icascope.nn.network import CATEGORIES, build_architecture, feature_shapes, init_model
from icascope.nn.serialize import checksum
from icascope.nn.train import TrainConfig, train
from icascope.topomap import default_layout, palette, render_topoplot

from conftest import TRAIN_CFG
from gradcheck import layer_gradient_errors, network_gradient_check, toy_spec

criterion = pytest.mark.criterion


# ------------------------------------------------------------- 1. architecture

# (filters, pool stride, block output shapes); a 2x2 pool of stride s maps n to (n - 2) // s + 1
EXPECTED = {
    "B_V": ([8, 16, 32, 64], 4, [(8, 34, 34), (16, 9, 9), (32, 2, 2), (64, 2, 2)]),
    "H_E": ([8, 16, 32, 64, 128], 4, [(8, 34, 34), (16, 9, 9), (32, 2, 2), (64, 1, 1), (128, 1, 1)]),
    "E_I": ([8, 16, 32, 64, 128, 256, 256], 2,
            [(8, 67, 68), (16, 33, 34), (32, 16, 17), (64, 8, 8), (128, 4, 4), (256, 2, 2), (256, 2, 2)]),
}


@criterion(1, "architecture fidelity")
def test_architecture_fidelity(report):
    t0 = time.perf_counter()
    for cat, (filters, stride, shapes) in EXPECTED.items():
        spec = build_architecture(cat)
        assert [b.conv.filters for b in spec.blocks] == filters
        assert {b.pool.stride for b in spec.blocks if b.pool is not None} == {stride}
        assert spec.blocks[-1].pool is None
        assert feature_shapes(spec) == shapes
    assert feature_shapes(build_architecture("B_V"))[-1][1:] == (2, 2)
    elapsed = time.perf_counter() - t0
    report(f"filters, strides and {sum(len(v[2]) for v in EXPECTED.values())} block shapes exact")
    assert elapsed < 1.0


# ---------------------------------------------------------- 2. gradient checks

@criterion(2, "gradient correctness")
def test_gradient_correctness(report):
    t0 = time.perf_counter()
    layer = layer_gradient_errors()
    model = init_model(toy_spec(), seed=3).astype(np.float64)
    x = np.random.default_rng(0).random((4, 3, 12, 12))
    net, kept, crossed = network_gradient_check(model, x, np.array([0, 1, 0, 1]))
    elapsed = time.perf_counter() - t0
    report(f"max layer rel err {max(layer.values()):.1e}, max network rel err {max(net.values()):.1e} "
           f"({100 * crossed:.1f} % entries at kinks excluded)")
    for name, err in {**layer, **net}.items():
        assert err < 1e-3, name
    assert min(kept.values()) >= 0.5 and crossed <= 0.1
    assert elapsed < 60


# ---------------------------------------------------------------- 3. ICA

@criterion(3, "ICA recovery")
def test_ica_recovery(report):
    t0 = time.perf_counter()
    summary = []
    for n_src in (4, 8):
        scores = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            s = rng.laplace(size=(n_src, 8192))
            a = rng.standard_normal((n_src, n_src))
            x = a @ s
            z, _, _ = center_whiten(x)
            np.testing.assert_allclose(z @ z.T / z.shape[1], np.eye(n_src), atol=1e-6)
            scores.append(amari_index(decompose(x, seed=seed).unmixing @ a))
        good = sum(v < 0.05 for v in scores)
        summary.append(f"{n_src} sources {good}/10 (worst {max(scores):.3f})")
        assert good >= 9, summary[-1]
    elapsed = time.perf_counter() - t0
    report("Amari < 0.05: " + ", ".join(summary))
    assert elapsed < 30


# ------------------------------------------------------------- 4. renderer

@criterion(4, "renderer determinism and palette closure")
def test_renderer(report):
    t0 = time.perf_counter()
    layout = default_layout()
    colors = {tuple(c) for c in palette().tolist()}
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = ComponentWeights(rng.uniform(-1, 1, 32), DEAP_CHANNELS)
        a = render_topoplot(w, layout)
        b = render_topoplot(ComponentWeights(np.array(w.weights), DEAP_CHANNELS), default_layout())
        assert a.rgb.tobytes() == b.rgb.tobytes()
        assert {tuple(c) for c in np.unique(a.rgb[a.mask], axis=0).tolist()} <= colors
    zero = render_topoplot(ComponentWeights(np.zeros(32), DEAP_CHANNELS), layout)
    assert np.all(zero.rgb[zero.mask] == palette()[31])
    elapsed = time.perf_counter() - t0
    report("100 vectors byte-identical, palette closed, zero weights -> entry 31")
    assert elapsed < 30


# --------------------------------------------------------- 5. classification

@criterion(5, "desk-scale classification")
def test_held_out_accuracy(trained, report):
    parts = []
    for cat in CATEGORIES:
        _, hist, seconds = trained[cat]
        best = hist.val_acc[hist.best_epoch - 1]
        parts.append(f"{cat} {100 * best:.1f} % at epoch {hist.best_epoch}/{hist.epoch[-1]}")
        assert best >= 0.95, parts[-1]
        assert hist.epoch[-1] <= 100
    report("validation accuracy: " + ", ".join(parts))


@criterion(5, "desk-scale classification")
def test_fresh_corpus_and_doubles(registry, report):
    imgs, labels, _ = S.render_corpus(S.table1_counts(0.1), seed=8)
    m = evaluate(registry, imgs.transpose(0, 3, 1, 2), labels)
    accs = {c: m.per_category[c].accuracy for c in CATEGORIES}
    report("fresh corpus: " + ", ".join(f"{c} {v:.1f} %" for c, v in accs.items())
           + f"; doubles {m.doubles}/{m.flagged} ({100 * m.double_fraction:.1f} %)")
    assert all(v >= 95.0 for v in accs.values())
    assert m.double_fraction < 0.05


# --------------------------------------------------------------- 6. pipeline

BLINK_SPANS = [(8.0, 24.0), (40.0, 52.0)]


def affected(start_s, window_s, spans, min_overlap=2.0):
    """Sub-trials holding at least one complete blink."""
    return any(min(start_s + window_s, b) - max(start_s, a) >= min_overlap for a, b in spans)


@criterion(6, "end-to-end pipeline")
def test_pipeline(registry, report):
    cfg = PipelineConfig()
    clean, _ = S.gen_clean_recording(60.0, seed=0)
    res = run_pipeline(clean, registry, cfg)
    assert res.n_subtrials == 14
    dets = res.detections()
    ubs = np.mean([d.detection.is_ubs for d in dets])

    blinks = S.inject_artifact(clean, "BEOG", 100.0, BLINK_SPANS, seed=0)
    res_b = run_pipeline(blinks, registry, cfg)
    hit = missed = 0
    for i in range(res_b.n_subtrials):
        start_s = i * cfg.hop_s
        if not affected(start_s, cfg.window_s, BLINK_SPANS):
            continue
        found = any(not d.detection.is_ubs and "B_V" in d.detection.verdict for d in res_b.detections(i))
        hit += found
        missed += not found
    report(f"14 sub-trials; clean {100 * ubs:.1f} % UBS ({len(dets)} components, "
           f"{len(res.skipped)} skipped); blinks found in {hit}/{hit + missed} affected sub-trials")
    assert ubs >= 0.9
    assert missed == 0 and hit > 0


# -------------------------------------------------------------- 7. throughput

@criterion(7, "throughput report")
def test_throughput(registry, report):
    rec, _ = S.gen_clean_recording(8.0, seed=0)
    t = benchmark(registry, rec.samples, rec.channel_names, runs=5, n_components=32)
    report(f"median of 5: ica {t['ica']:.3f} s, topoplot {t['topoplot']:.3f} s, "
           f"classification {t['classification']:.3f} s, total {t['total']:.3f} s (target <= 5 s)")
    # informative only
    assert t["n_components"] == 32


# ------------------------------------------------------------- 8. determinism

def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


@criterion(8, "determinism")
def test_corpus_determinism(tmp_path, report):
    counts = S.table1_counts(0.02)
    a = S.render_corpus(counts, seed=3)
    b = S.render_corpus(counts, seed=3)
    assert _digest(a[0]) == _digest(b[0]) and a[1] == b[1] and a[2] == b[2]
    S.gen_corpus(counts, seed=3, out_dir=tmp_path / "a")
    S.gen_corpus(counts, seed=3, out_dir=tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    report(f"corpus of {len(a[1])} images bit-identical in memory and on disk")


@criterion(8, "determinism")
def test_model_determinism(table1_corpus, report):
    imgs, labels, _ = table1_corpus
    idx, y = S.one_vs_rest(labels, "B_V", seed=0)
    idx, y = idx[::6], y[::6]
    cfg = TrainConfig(max_epochs=2, seed=TRAIN_CFG.seed)
    sums = [checksum(train(build_architecture("B_V"), imgs[idx], y, cfg, "B_V")[0]) for _ in range(2)]
    report(f"two trainings on {len(idx)} images give checksum {sums[0][:12]}")
    assert sums[0] == sums[1]


@criterion(8, "determinism")
def test_detection_stream_determinism(registry, report):
    rec, _ = S.gen_clean_recording(16.0, seed=5)
    rec = S.inject_artifact(rec, "BEOG", 100.0, [(2.0, 10.0)], seed=5)
    streams = []
    for _ in range(2):
        buf = io.StringIO()
        write_detections(run_pipeline(rec, registry, PipelineConfig(seed=5)), buf)
        streams.append(buf.getvalue())
    report(f"detection stream of {streams[0].count(chr(10))} records identical across runs")
    assert streams[0] == streams[1]
