"""Recording I/O, power-line notch filtering and sub-trial windowing."""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import FilterDesignError, ParseError, WindowError
from .montage import check_channels

RAW_MAGIC = b"ICASCOPE-RAW\0\0\0\0"


@dataclass(frozen=True)
class Recording:
    samples: np.ndarray  # (n_channels, n_samples), microvolts
    sample_rate: int
    channel_names: tuple[str, ...]

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if samples.ndim != 2:
            raise ParseError(f"samples must be 2-D, got shape {samples.shape}")
        n_ch, n_s = samples.shape
        if n_ch < 2:
            raise ParseError("a recording needs at least two channels")
        if n_s < 1:
            raise ParseError("a recording needs at least one sample")
        if n_ch != len(self.channel_names):
            raise ParseError(f"{n_ch} sample rows but {len(self.channel_names)} channel names")
        if len(set(self.channel_names)) != n_ch:
            raise ParseError("duplicate channel names")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ParseError(f"invalid sample rate {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        check_channels(self.channel_names)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def replace_samples(self, samples) -> "Recording":
        return Recording(samples, self.sample_rate, self.channel_names)


@dataclass(frozen=True)
class SubTrial:
    samples: np.ndarray
    start_sample: int
    duration_s: float
    sample_rate: int
    channel_names: tuple[str, ...] = field(repr=False)


# --------------------------------------------------------------------- loading

def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".f32", ".raw", ".bin"):
        return "raw-f32"
    raise ParseError(f"cannot infer format from {path.name!r}; pass format='csv' or 'raw-f32'")


def load_recording(path, format: str | None = None) -> Recording:
    """Read a recording from CSV or raw-f32.

    CSV layout: ``# fs=<int>``, then a comma-separated channel line, then one
    row per sample. raw-f32 layout: 16-byte magic, little-endian uint32 header
    length, JSON header ``{"fs": int, "channels": [...]}``, then channel-major
    float32 little-endian samples.
    """
    path = Path(path)
    format = format or _infer_format(path)
    if format == "csv":
        return _load_csv(path)
    if format == "raw-f32":
        return _load_raw(path)
    raise ParseError(f"unknown format {format!r}")


def _parse_fs(text: str) -> int:
    text = text.strip()
    if not text.startswith("#"):
        raise ParseError("first line must be '# fs=<int>'")
    key, _, value = text[1:].strip().partition("=")
    if key.strip() != "fs":
        raise ParseError("first line must be '# fs=<int>'")
    try:
        fs = int(value.strip())
    except ValueError:
        raise ParseError(f"bad sample rate {value.strip()!r}") from None
    if fs <= 0:
        raise ParseError(f"bad sample rate {fs}")
    return fs


def _load_csv(path: Path) -> Recording:
    with open(path) as fh:
        fs = _parse_fs(fh.readline())
        header = fh.readline().strip()
        if not header:
            raise ParseError("missing channel-name line")
        channels = [c.strip() for c in header.split(",")]
        check_channels(channels)
        try:
            data = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    if data.size == 0:
        raise ParseError("no sample rows")
    if data.shape[1] != len(channels):
        raise ParseError(f"header lists {len(channels)} channels, rows have {data.shape[1]}")
    return Recording(data.T, fs, channels)


def _load_raw(path: Path) -> Recording:
    blob = path.read_bytes()
    if blob[:16] != RAW_MAGIC:
        raise ParseError("bad raw-f32 magic")
    if len(blob) < 20:
        raise ParseError("truncated raw-f32 header")
    (hlen,) = struct.unpack("<I", blob[16:20])
    try:
        header = json.loads(blob[20:20 + hlen].decode("utf-8"))
        fs = int(header["fs"])
        channels = list(header["channels"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed raw-f32 header: {exc}") from None
    check_channels(channels)
    payload = blob[20 + hlen:]
    n_ch = len(channels)
    if n_ch == 0 or len(payload) % (4 * n_ch):
        raise ParseError(f"payload of {len(payload)} bytes does not split into {n_ch} float32 channels")
    data = np.frombuffer(payload, dtype="<f4").reshape(n_ch, -1)
    return Recording(data.astype(np.float64), fs, channels)


def save_recording(rec: Recording, path, format: str | None = None) -> None:
    path = Path(path)
    format = format or _infer_format(path)
    if format == "csv":
        with open(path, "w") as fh:
            fh.write(f"# fs={rec.sample_rate}\n")
            fh.write(",".join(rec.channel_names) + "\n")
            np.savetxt(fh, rec.samples.T, delimiter=",", fmt="%.17g")
    elif format == "raw-f32":
        header = json.dumps({"fs": rec.sample_rate, "channels": list(rec.channel_names)}).encode()
        with open(path, "wb") as fh:
            fh.write(RAW_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(np.ascontiguousarray(rec.samples, dtype="<f4").tobytes())
    else:
        raise ParseError(f"unknown format {format!r}")


# ------------------------------------------------------------------- filtering

def design_notch(freq: float, bandwidth_hz: float, sample_rate: float):
    """Second-order IIR notch at ``freq`` with a -3 dB width of ``bandwidth_hz``.

    Bilinear-transform design: zeros on the unit circle at the notch
    frequency, poles pulled inward by the prewarped half-bandwidth.
    Returns ``(b, a)`` with ``a[0] == 1``.
    """
    nyquist = sample_rate / 2
    if not 0 < freq < nyquist:
        raise FilterDesignError(f"notch frequency {freq} Hz must lie in (0, {nyquist}) Hz")
    if bandwidth_hz <= 0:
        raise FilterDesignError("bandwidth must be positive")
    w0 = 2 * math.pi * freq / sample_rate
    bw = 2 * math.pi * bandwidth_hz / sample_rate
    if bw >= math.pi:
        raise FilterDesignError(f"bandwidth {bandwidth_hz} Hz too wide for fs={sample_rate}")
    beta = math.tan(bw / 2)
    gain = 1.0 / (1.0 + beta)
    cos_w0 = math.cos(w0)
    b = np.array([gain, -2 * gain * cos_w0, gain])
    a = np.array([1.0, -2 * gain * cos_w0, 2 * gain - 1.0])
    return b, a


def notch_filter(rec: Recording, freqs=(50.0, 60.0), bandwidth_hz: float = 2.0) -> Recording:
    """Causal cascade of biquad notches, one per entry of ``freqs``.

    Each section starts in the steady state for the first sample, so a
    constant offset passes without a start-up transient.
    """
    sections = [design_notch(f, bandwidth_hz, rec.sample_rate) for f in freqs]
    out = np.array(rec.samples)
    for b, a in sections:
        zi = signal.lfilter_zi(b, a)[None, :] * out[:, :1]
        out, _ = signal.lfilter(b, a, out, axis=1, zi=zi)
    return rec.replace_samples(out)


# ------------------------------------------------------------------- windowing

def _to_samples(seconds: float, fs: int, what: str) -> int:
    n = seconds * fs
    if n <= 0 or abs(n - round(n)) > 1e-9:
        raise WindowError(f"{what} of {seconds} s is not a positive whole number of samples at {fs} Hz")
    return int(round(n))


def n_subtrials(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def window_subtrials(rec: Recording, window_s: float = 8.0, hop_s: float = 4.0) -> list[SubTrial]:
    """Cut full-length windows starting every ``hop_s`` seconds; the ragged tail is dropped."""
    window = _to_samples(window_s, rec.sample_rate, "window")
    hop = _to_samples(hop_s, rec.sample_rate, "hop")
    count = n_subtrials(rec.n_samples, window, hop)
    if count == 0:
        raise WindowError(
            f"recording of {rec.duration_s:g} s is shorter than one {window_s:g} s window")
    out = []
    for i in range(count):
        start = i * hop
        out.append(SubTrial(rec.samples[:, start:start + window], start, window / rec.sample_rate,
                            rec.sample_rate, rec.channel_names))
    return out
