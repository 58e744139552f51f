"""Synthetic component topographies and recordings for training and testing.

Weight vectors follow the qualitative scalp archetypes of ocular, cardiac,
muscular and impedance artifacts plus smooth dipolar brain fields. The
geometric constants below are invented; they are chosen so that the archetypes
are cleanly separable without noise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .eeg_io import Recording
from .errors import IoError, RangeError
from .ica import ComponentWeights, normalize_weights
from .montage import DEAP_CHANNELS, positions
from .topomap import default_layout, export_png, render_topoplot

ARCHETYPES = ("BEOG", "VEOG", "HEOG", "ECG", "EMG", "IF", "UBS")
ARCHETYPE_LABEL = {
    "BEOG": "B_V", "VEOG": "B_V",
    "HEOG": "H_E", "ECG": "H_E",
    "EMG": "E_I", "IF": "E_I",
    "UBS": "UBS",
}
LABELS = ("B_V", "H_E", "E_I", "UBS")
LABEL_ARCHETYPES = {
    "B_V": ("BEOG", "VEOG"),
    "H_E": ("HEOG", "ECG"),
    "E_I": ("EMG", "IF"),
    "UBS": ("UBS",),
}

# (positives, negatives) of each one-vs-rest training set
TABLE1 = {"B_V": (1341, 5020), "H_E": (398, 4823), "E_I": (1592, 6044)}
# one corpus from which all three training sets can be drawn
TABLE1_CORPUS = {"B_V": 1341, "H_E": 398, "E_I": 1592, "UBS": 4305}

# angular spreads in radians on the unit head sphere
BEOG_SPREAD = (0.25, 0.40)
VEOG_FACTOR = (1.5, 2.5)
HEOG_SPREAD = (0.20, 0.35)
ECG_SPREAD = (0.25, 0.40)
EMG_SPREAD = (0.08, 0.18)
UBS_SPREAD = (0.45, 0.80)
UBS_SEPARATION = (0.30, 0.60)
UBS_MAX_POLAR = np.radians(50)
UBS_MAX_FRONT = 0.35
CENTER_JITTER = 0.05
# border electrodes where muscle peaks are placed (frontopolar sites excluded)
EMG_SITES = ("F7", "F8", "T7", "T8", "P7", "P8", "O1", "O2", "Oz", "PO3", "PO4",
             "FC5", "FC6", "CP5", "CP6")


@dataclass(frozen=True)
class ArchetypeParams:
    archetype: str
    amplitude_jitter: float = 0.3
    spread: float | None = None   # None draws from the archetype's range
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ValueError(f"unknown archetype {self.archetype!r}")
        if self.spread is not None and self.spread <= 0:
            raise ValueError("spread must be positive")
        if not 0 <= self.noise <= 0.5:
            raise ValueError("noise level must be in [0, 0.5]")
        if not 0 <= self.amplitude_jitter < 1:
            raise ValueError("amplitude jitter must be in [0, 1)")


def _unit(v):
    return v / np.linalg.norm(v)


def _jitter(center, angle, rng):
    """Rotate ``center`` by ``angle`` radians toward a random tangent direction."""
    t = rng.standard_normal(3)
    t -= t.dot(center) * center
    t = _unit(t)
    return np.cos(angle) * center + np.sin(angle) * t


def _bump(pos, center, spread):
    d = np.arccos(np.clip(pos @ center, -1.0, 1.0))
    return np.exp(-0.5 * (d / spread) ** 2)


def _site(name):
    return positions([name])[0]


def _draw_spread(p, rng, lo_hi):
    return p.spread if p.spread is not None else rng.uniform(*lo_hi)


def _pattern(p: ArchetypeParams, pos, channels, rng):
    amp = lambda: 1.0 + rng.uniform(-p.amplitude_jitter, p.amplitude_jitter)  # noqa: E731
    a = p.archetype
    if a in ("BEOG", "VEOG"):
        center = _jitter(_unit(_site("Fp1") + _site("Fp2")), rng.uniform(0, CENTER_JITTER), rng)
        spread = _draw_spread(p, rng, BEOG_SPREAD)
        if a == "VEOG":
            spread *= rng.uniform(*VEOG_FACTOR)
        return amp() * _bump(pos, center, spread)
    if a in ("HEOG", "ECG"):
        left, right = ("F7", "F8") if a == "HEOG" else ("T7", "T8")
        spread = _draw_spread(p, rng, HEOG_SPREAD if a == "HEOG" else ECG_SPREAD)
        cl = _jitter(_site(left), rng.uniform(0, CENTER_JITTER), rng)
        cr = _jitter(_site(right), rng.uniform(0, CENTER_JITTER), rng)
        sign = rng.choice([-1.0, 1.0])
        return sign * (amp() * _bump(pos, cl, spread) - amp() * _bump(pos, cr, spread))
    if a == "EMG":
        site = EMG_SITES[rng.integers(len(EMG_SITES))]
        spread = _draw_spread(p, rng, EMG_SPREAD)
        return rng.choice([-1.0, 1.0]) * amp() * _bump(pos, _site(site), spread)
    if a == "IF":
        w = np.zeros(len(channels))
        w[rng.integers(len(channels))] = rng.choice([-1.0, 1.0]) * amp()
        return w
    # UBS: two broad lobes of opposite sign around a central/posterior point
    while True:
        center = _unit(rng.standard_normal(3))
        if center[2] >= np.cos(UBS_MAX_POLAR) and center[0] <= UBS_MAX_FRONT:
            break
    spread = _draw_spread(p, rng, UBS_SPREAD)
    half = 0.5 * rng.uniform(*UBS_SEPARATION)
    t = rng.standard_normal(3)
    t = _unit(t - t.dot(center) * center)
    pos_lobe = np.cos(half) * center + np.sin(half) * t
    neg_lobe = np.cos(half) * center - np.sin(half) * t
    return (amp() * _bump(pos, pos_lobe, spread)
            - rng.uniform(0.3, 1.0) * _bump(pos, neg_lobe, spread))


def gen_weights(p: ArchetypeParams, channels=DEAP_CHANNELS, montage=None):
    """Draw one normalized weight vector of archetype ``p.archetype``; returns (weights, label)."""
    channels = tuple(channels)
    pos = positions(channels, montage)
    rng = np.random.default_rng(p.seed)
    w = _pattern(p, pos, channels, rng)
    w = w / np.max(np.abs(w))
    if p.noise > 0:
        w = w + p.noise * rng.standard_normal(len(channels))
    return ComponentWeights(normalize_weights(w), channels), ARCHETYPE_LABEL[p.archetype]


# ------------------------------------------------------------------ corpora

def table1_counts(scale: float = 1.0) -> dict[str, int]:
    return {k: max(1, int(round(v * scale))) for k, v in TABLE1_CORPUS.items()}


def sample_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32)]


def plan_corpus(counts: dict, noise_range=(0.0, 0.1), seed: int = 0):
    """Deterministic list of (label, ArchetypeParams) for every sample of a corpus."""
    for label, n in counts.items():
        if label not in LABELS:
            raise ValueError(f"unknown label {label!r}")
        if n <= 0:
            raise ValueError(f"count for {label} must be positive")
    lo, hi = noise_range
    if not 0 <= lo <= hi <= 0.5:
        raise ValueError("noise range must lie in [0, 0.5]")
    total = sum(counts.values())
    seeds = sample_seeds(seed, total)
    rng = np.random.default_rng(seed)
    plan = []
    i = 0
    for label in LABELS:
        for _ in range(counts.get(label, 0)):
            options = LABEL_ARCHETYPES[label]
            arch = options[rng.integers(len(options))]
            noise = float(rng.uniform(lo, hi))
            plan.append((label, ArchetypeParams(arch, noise=noise, seed=seeds[i])))
            i += 1
    return plan


def gen_corpus(counts: dict, noise_range=(0.0, 0.1), seed: int = 0, out_dir=None,
               layout=None):
    """Render a labelled topoplot corpus to ``out_dir/images`` with a ``labels.csv`` manifest.

    Returns the manifest rows as dicts (file, label, archetype, seed).
    """
    layout = default_layout() if layout is None else layout
    out = Path(out_dir)
    images = out / "images"
    try:
        images.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {images}: {exc}") from exc
    rows = []
    for i, (label, p) in enumerate(plan_corpus(counts, noise_range, seed)):
        w, _ = gen_weights(p, layout.channel_names)
        name = f"{i:06d}_{label}_{p.archetype}.png"
        export_png(render_topoplot(w, layout), images / name)
        rows.append({"file": name, "label": label, "archetype": p.archetype, "seed": p.seed})
    try:
        with open(out / "labels.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["file", "label", "archetype", "seed"])
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc
    return rows


def render_corpus(counts: dict, noise_range=(0.0, 0.1), seed: int = 0, layout=None):
    """In-memory twin of :func:`gen_corpus`: (uint8 images NHWC, labels, archetypes)."""
    layout = default_layout() if layout is None else layout
    plan = plan_corpus(counts, noise_range, seed)
    imgs = np.empty((len(plan), 134, 136, 3), dtype=np.uint8)
    for i, (_, p) in enumerate(plan):
        imgs[i] = render_topoplot(gen_weights(p, layout.channel_names)[0], layout).rgb
    return imgs, [lab for lab, _ in plan], [p.archetype for _, p in plan]


def read_manifest(corpus_dir) -> list[dict]:
    path = Path(corpus_dir) / "labels.csv"
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def one_vs_rest(labels, category: str, seed: int = 0, negatives: str = "table1"):
    """Indices of a one-vs-rest training set and its 0/1 class targets.

    All samples of ``category`` are positives. With ``negatives='table1'`` the
    other labels are subsampled to the TABLE1 positive:negative ratio (capped
    by availability); ``'all'`` keeps every other sample.
    """
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == category)
    neg = np.flatnonzero(labels != category)
    if negatives == "table1":
        p_ref, n_ref = TABLE1[category]
        want = min(len(neg), int(round(len(pos) * n_ref / p_ref)))
        rng = np.random.default_rng(seed)
        neg = np.sort(rng.choice(neg, size=want, replace=False))
    elif negatives != "all":
        raise ValueError(f"negatives must be 'table1' or 'all', got {negatives!r}")
    idx = np.concatenate([pos, neg])
    order = np.argsort(idx, kind="stable")
    targets = np.concatenate([np.zeros(len(pos), np.intp), np.ones(len(neg), np.intp)])
    return idx[order], targets[order]


# ---------------------------------------------------------------- recordings

def _blink_wave(t, width=0.3):
    """Biphasic pulse: a raised positive lobe followed by a smaller negative one."""
    x = t / width
    inside = (x >= 0) & (x < 1)
    return np.where(inside, np.sin(2 * np.pi * x) * np.sin(np.pi * x) + 0.5 * np.sin(np.pi * x) ** 2, 0.0)


def artifact_waveform(archetype: str, n: int, fs: int, amplitude: float, rng,
                      interval_s: float = 1.5):
    """Source time course for one injected epoch of ``n`` samples."""
    t = np.arange(n) / fs
    if archetype in ("BEOG", "VEOG"):
        width = 0.3 if archetype == "BEOG" else 0.6
        wave = np.zeros(n)
        for start in np.arange(0.25, n / fs - width, interval_s):
            wave += _blink_wave(t - start, width)
        peak = np.max(np.abs(wave)) if np.any(wave) else 1.0
        return amplitude * wave / peak
    if archetype == "HEOG":
        # alternating saccade plateaus
        steps = np.sign(np.sin(2 * np.pi * t / (2 * interval_s)) + 1e-12)
        b, a = signal.butter(2, 10, fs=fs)
        return amplitude * signal.lfilter(b, a, steps)
    if archetype == "ECG":
        wave = np.zeros(n)
        for start in np.arange(0.1, n / fs, 0.85):
            wave += np.exp(-0.5 * ((t - start) / 0.012) ** 2)
        return amplitude * wave
    if archetype == "EMG":
        sos = signal.butter(4, (15, 30), btype="bandpass", fs=fs, output="sos")
        burst = signal.sosfilt(sos, rng.standard_normal(n))
        return amplitude * burst / np.std(burst)
    if archetype == "IF":
        return np.full(n, float(amplitude))
    raise ValueError(f"no waveform for archetype {archetype!r}")


def inject_artifact(rec: Recording, archetype: str, amplitude: float, epochs, seed: int = 0,
                    weights: ComponentWeights | None = None) -> Recording:
    """Add an artifact source spread over the channels by its archetype's weight vector.

    ``epochs`` is a list of ``(start_s, stop_s)`` spans; ``amplitude`` is in microvolts
    at the channel of largest weight.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    spans = []
    for start_s, stop_s in epochs:
        a = int(round(start_s * rec.sample_rate))
        b = int(round(stop_s * rec.sample_rate))
        if not 0 <= a < b <= rec.n_samples:
            raise RangeError(f"epoch ({start_s}, {stop_s}) s outside the {rec.duration_s:g} s recording")
        spans.append((a, b))
    if amplitude == 0:
        return rec
    rng = np.random.default_rng(seed)
    if weights is None:
        weights, _ = gen_weights(ArchetypeParams(archetype, seed=seed), rec.channel_names)
    w = np.asarray(weights.weights)
    if archetype == "IF":
        # the jump is confined to the single electrode of the spike
        w = np.where(np.abs(w) == np.max(np.abs(w)), w, 0.0)
    out = np.array(rec.samples)
    for a, b in spans:
        out[:, a:b] += np.outer(w, artifact_waveform(archetype, b - a, rec.sample_rate, amplitude, rng))
    return rec.replace_samples(out)


def _source_signal(n, fs, rng):
    # sparse super-Gaussian bursts; pure rhythms make FastICA wander between
    # nearly equivalent rotations, so every source is heavy tailed
    x = rng.laplace(size=n) ** 3
    b, a = signal.butter(2, rng.uniform(8, 40), fs=fs)
    x = signal.lfilter(b, a, x)
    return x / np.std(x)


def gen_clean_recording(duration_s: float = 60.0, sample_rate: int = 512,
                        channels=DEAP_CHANNELS, amplitude_uv: float = 10.0,
                        sensor_noise: float = 1e-4, seed: int = 0):
    """Brain-like recording: one smooth dipolar source per channel plus white sensor noise.

    Returns ``(recording, mixing)`` where ``mixing`` has one column per source.
    """
    channels = tuple(channels)
    n = int(round(duration_s * sample_rate))
    rng = np.random.default_rng(seed)
    seeds = sample_seeds(seed, len(channels))
    mixing = np.stack([
        gen_weights(ArchetypeParams("UBS", seed=s), channels)[0].weights for s in seeds
    ], axis=1)
    sources = np.stack([_source_signal(n, sample_rate, rng) for _ in channels])
    sources *= rng.uniform(0.5, 1.5, size=(len(channels), 1))
    x = amplitude_uv * (mixing @ sources)
    x += sensor_noise * amplitude_uv * rng.standard_normal(x.shape)
    return Recording(x, sample_rate, channels), mixing


def load_corpus_images(corpus_dir, rows=None):
    """Load the PNGs listed in the manifest as a uint8 (N, 3, 134, 136) array."""
    from .topomap import load_png
    rows = read_manifest(corpus_dir) if rows is None else rows
    base = Path(corpus_dir) / "images"
    out = np.empty((len(rows), 3, 134, 136), dtype=np.uint8)
    for i, r in enumerate(rows):
        out[i] = load_png(base / r["file"]).transpose(2, 0, 1)
    return out

