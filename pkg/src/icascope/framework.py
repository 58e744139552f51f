"""Parallel binary classifiers over topoplots: registry, merged detections, metrics, pipeline."""
from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .eeg_io import Recording, notch_filter, window_subtrials
from .errors import CompatibilityError, DataError, RegistryError
from .ica import component_weights, decompose
from .nn.network import CATEGORIES, RASTER, TrainedModel, as_batch, predict_proba
from .topomap import Topoplot, default_layout, render_topoplot, to_input

log = logging.getLogger(__name__)

UBS = "UBS"


@dataclass(frozen=True)
class ArtifactCategory:
    name: str

    def __post_init__(self):
        if not self.name or self.name == UBS:
            raise ValueError(f"invalid category name {self.name!r}")


def canonical(names):
    """Known categories in their fixed order, then any extra names alphabetically."""
    names = set(names)
    known = [c for c in CATEGORIES if c in names]
    return tuple(known + sorted(names - set(known)))


@dataclass(frozen=True)
class _Entry:
    category: str
    model: TrainedModel
    threshold: float


class Registry:
    """Immutable set of per-category classifiers; ``register`` returns a new registry."""

    def __init__(self, entries=()):
        self._entries = tuple(entries)

    def register(self, model: TrainedModel, category, threshold: float = 0.5) -> "Registry":
        name = category.name if isinstance(category, ArtifactCategory) else ArtifactCategory(category).name
        if name in self.names:
            raise RegistryError(f"category {name!r} is already registered")
        raster = model.metadata.get("raster")
        if raster != RASTER:
            raise CompatibilityError(f"model raster {raster!r} does not match {RASTER!r}")
        if not 0 < threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        frozen = model.copy().freeze()
        return Registry(self._entries + (_Entry(name, frozen, float(threshold)),))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.category for e in self._entries)

    def model(self, name: str) -> TrainedModel:
        for e in self._entries:
            if e.category == name:
                return e.model
        raise RegistryError(f"category {name!r} is not registered")

    def threshold(self, name: str) -> float:
        return next(e.threshold for e in self._entries if e.category == name)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)


@dataclass(frozen=True)
class Detection:
    scores: dict
    decisions: dict
    verdict: object            # "UBS" or a tuple of positive category names
    double_detections: tuple   # pairs of categories that fired together

    @classmethod
    def from_scores(cls, scores: dict, thresholds: dict) -> "Detection":
        order = canonical(scores)
        scores = {c: float(scores[c]) for c in order}
        # a score exactly at the threshold stays negative
        decisions = {c: int(scores[c] > thresholds[c]) for c in order}
        positive = tuple(c for c in order if decisions[c])
        pairs = tuple(itertools.combinations(positive, 2))
        return cls(scores, decisions, positive if positive else UBS, pairs)

    @property
    def is_ubs(self) -> bool:
        return self.verdict == UBS

    def to_record(self) -> dict:
        return {
            "scores": self.scores,
            "verdict": UBS if self.is_ubs else list(self.verdict),
            "double_detections": [list(p) for p in self.double_detections],
        }


def _images(x):
    if isinstance(x, Topoplot):
        return x.as_input()[None]
    x = np.asarray(x)
    if x.dtype == np.uint8:
        if x.ndim == 3 and x.shape[-1] == 3:
            return to_input(x)[None]
        if x.ndim == 4 and x.shape[-1] == 3:
            return np.stack([to_input(i) for i in x])
        return x.astype(np.float32) / np.float32(255.0)
    return x


def classify_batch(registry: Registry, images) -> list[Detection]:
    """Score every image with every registered model independently."""
    if len(registry) == 0:
        raise RegistryError("registry is empty")
    x = _images(images)
    scores = {}
    for e in registry:
        scores[e.category] = predict_proba(e.model, as_batch(x, e.model.spec))
    thresholds = {e.category: e.threshold for e in registry}
    n = len(next(iter(scores.values())))
    return [Detection.from_scores({c: s[i] for c, s in scores.items()}, thresholds) for i in range(n)]


def classify(registry: Registry, topoplot) -> Detection:
    """Merged verdict of all registered classifiers for one topoplot (or RGB raster)."""
    return classify_batch(registry, topoplot)[0]


# ------------------------------------------------------------------- metrics

@dataclass
class CategoryMetrics:
    tp: int
    fn: int
    fp: int
    tn: int
    errors_by_label: dict

    @property
    def total(self):
        return self.tp + self.fn + self.fp + self.tn

    @property
    def errors(self):
        return self.fn + self.fp

    @property
    def accuracy(self):
        return 100.0 * (self.tp + self.tn) / self.total if self.total else float("nan")

    @property
    def sensitivity(self):
        return 100.0 * self.tp / (self.tp + self.fn) if self.tp + self.fn else float("nan")

    @property
    def specificity(self):
        return 100.0 * self.tn / (self.tn + self.fp) if self.tn + self.fp else float("nan")


@dataclass
class Metrics:
    per_category: dict
    labels: tuple
    overall_accuracy: float
    flagged: int                    # topoplots with at least one positive decision
    doubles: int                    # topoplots with two or more
    double_pairs: dict = field(default_factory=dict)
    n: int = 0

    @property
    def double_fraction(self) -> float:
        return self.doubles / self.flagged if self.flagged else 0.0

    def table(self) -> str:
        """Errors per true label, total, then accuracy/sensitivity/specificity in percent."""
        cols = list(self.labels)
        head = ["CNN"] + cols + ["TOTAL", "ACC", "SENS", "SPEC"]
        lines = ["\t".join(head)]
        for c, m in self.per_category.items():
            cells = [c]
            for lab in cols:
                v = m.errors_by_label.get(lab, 0)
                cells.append(f"{v} (FN)" if lab == c else str(v))
            cells += [str(m.errors), f"{m.accuracy:.1f}", f"{m.sensitivity:.1f}", f"{m.specificity:.1f}"]
            lines.append("\t".join(cells))
        return "\n".join(lines)

    def csv_rows(self):
        yield ["category", "tp", "fn", "fp", "tn", "errors", "accuracy", "sensitivity", "specificity"]
        for c, m in self.per_category.items():
            yield [c, m.tp, m.fn, m.fp, m.tn, m.errors,
                   f"{m.accuracy:.1f}", f"{m.sensitivity:.1f}", f"{m.specificity:.1f}"]


def metrics_from_detections(detections, labels, categories) -> Metrics:
    labels = list(labels)
    categories = canonical(categories)
    allowed = set(categories) | {UBS}
    unknown = sorted(set(labels) - allowed)
    if unknown:
        raise DataError(f"corpus labels {unknown} are not registered categories or UBS")
    if len(detections) != len(labels):
        raise DataError("one detection per label is required")
    label_order = tuple([UBS] + list(categories))
    per = {}
    for c in categories:
        tp = fn = fp = tn = 0
        errs = {lab: 0 for lab in label_order}
        for d, lab in zip(detections, labels):
            hit = d.decisions[c] == 1
            if lab == c:
                tp += hit
                fn += not hit
                errs[lab] += not hit
            else:
                fp += hit
                tn += not hit
                errs[lab] += hit
        per[c] = CategoryMetrics(tp, fn, fp, tn, errs)
    pairs = {}
    flagged = doubles = exact = 0
    for d, lab in zip(detections, labels):
        if not d.is_ubs:
            flagged += 1
        if d.double_detections:
            doubles += 1
        for p in d.double_detections:
            pairs[p] = pairs.get(p, 0) + 1
        exact += (d.is_ubs and lab == UBS) or (not d.is_ubs and d.verdict == (lab,))
    overall = 100.0 * exact / len(labels) if labels else float("nan")
    return Metrics(per, label_order, overall, flagged, doubles, pairs, len(labels))


def evaluate(registry: Registry, images, labels) -> Metrics:
    """One-vs-rest confusion counts per category over a labelled topoplot corpus."""
    labels = list(labels)
    allowed = set(registry.names) | {UBS}
    unknown = sorted(set(labels) - allowed)
    if unknown:
        raise DataError(f"corpus labels {unknown} are not registered categories or UBS")
    detections = []
    for s in range(0, len(labels), 128):
        detections += classify_batch(registry, images[s:s + 128])
    return metrics_from_detections(detections, labels, registry.names)


# ------------------------------------------------------------------ pipeline

@dataclass(frozen=True)
class PipelineConfig:
    notch_freqs: tuple = (50.0, 60.0)
    notch_bandwidth: float = 2.0
    window_s: float = 8.0
    hop_s: float = 4.0
    max_components: int = 32
    ica_tol: float = 1e-4
    ica_max_iter: int = 200
    seed: int = 0


@dataclass
class ComponentResult:
    subtrial: int
    start_s: float
    component: int | None
    detection: Detection | None
    status: str = "ok"

    def to_record(self) -> dict:
        rec = {"subtrial_index": self.subtrial, "start_s": self.start_s,
               "component_index": self.component, "status": self.status}
        if self.detection is not None:
            rec.update(self.detection.to_record())
        return rec


@dataclass
class PipelineResult:
    results: list
    timing: dict
    n_subtrials: int

    def detections(self, subtrial: int | None = None):
        return [r for r in self.results
                if r.detection is not None and (subtrial is None or r.subtrial == subtrial)]

    @property
    def skipped(self):
        return sorted({r.subtrial for r in self.results if r.status == "skipped"})


def run_pipeline(rec: Recording, registry: Registry, cfg: PipelineConfig = PipelineConfig(),
                 layout=None) -> PipelineResult:
    """notch -> sub-trials -> FastICA -> topoplots -> classification.

    Sub-trials whose ICA does not converge are reported with status
    ``skipped`` and contribute no detections.
    """
    layout = default_layout(tuple(rec.channel_names)) if layout is None else layout
    filtered = notch_filter(rec, cfg.notch_freqs, cfg.notch_bandwidth) if cfg.notch_freqs else rec
    subtrials = window_subtrials(filtered, cfg.window_s, cfg.hop_s)
    timing = {"ica": 0.0, "topoplot": 0.0, "classification": 0.0}
    results = []
    n_comp = min(cfg.max_components, rec.n_channels)
    for i, st in enumerate(subtrials):
        start_s = st.start_sample / rec.sample_rate
        t0 = time.perf_counter()
        res = decompose(st.samples, n_comp, tol=cfg.ica_tol, max_iter=cfg.ica_max_iter, seed=cfg.seed + i)
        t1 = time.perf_counter()
        timing["ica"] += t1 - t0
        if not res.converged:
            log.warning("sub-trial %d: ICA did not converge in %d iterations; skipped", i, res.iterations)
            results.append(ComponentResult(i, start_s, None, None, "skipped"))
            continue
        plots = [render_topoplot(component_weights(res, k, rec.channel_names), layout)
                 for k in range(res.n_components)]
        t2 = time.perf_counter()
        timing["topoplot"] += t2 - t1
        dets = classify_batch(registry, np.stack([p.as_input() for p in plots]))
        timing["classification"] += time.perf_counter() - t2
        results += [ComponentResult(i, start_s, k, d) for k, d in enumerate(dets)]
    return PipelineResult(results, timing, len(subtrials))


def write_detections(result: PipelineResult, fh) -> None:
    """Line-delimited JSON, one record per component (or per skipped sub-trial)."""
    for r in result.results:
        fh.write(json.dumps(r.to_record(), sort_keys=True) + "\n")


def read_detections(fh) -> list[dict]:
    return [json.loads(line) for line in fh if line.strip()]


def benchmark(registry: Registry, subtrial, channel_names, runs: int = 5, n_components: int = 32,
              seed: int = 0, layout=None) -> dict:
    """Median wall time of the ICA / topoplot / classification stages on one sub-trial."""
    layout = default_layout(tuple(channel_names)) if layout is None else layout
    samples = np.asarray(subtrial)
    n_components = min(n_components, samples.shape[0])
    stages = {"ica": [], "topoplot": [], "classification": []}
    for r in range(runs):
        t0 = time.perf_counter()
        res = decompose(samples, n_components, seed=seed)
        t1 = time.perf_counter()
        plots = [render_topoplot(component_weights(res, k, channel_names), layout)
                 for k in range(res.n_components)]
        t2 = time.perf_counter()
        classify_batch(registry, np.stack([p.as_input() for p in plots]))
        t3 = time.perf_counter()
        stages["ica"].append(t1 - t0)
        stages["topoplot"].append(t2 - t1)
        stages["classification"].append(t3 - t2)
    out = {k: float(np.median(v)) for k, v in stages.items()}
    out["total"] = float(np.median([a + b + c for a, b, c in zip(*stages.values())]))
    out["n_components"] = n_components
    out["runs"] = runs
    return out
