"""Rasterize component weights into fixed-geometry 134x136 topoplot images."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IoError, MontageError, NumericError, RangeError
from .ica import ComponentWeights
from .montage import Montage, positions, standard_montage

N_ROWS = 134
N_COLS = 136
RASTER = "134x136 rows x cols"
# polar angle pi/2 (the ear-nasion equator) lands at this fraction of the disk radius
EQUATOR_RADIUS = 0.85
IDW_POWER = 2
BACKGROUND = (255, 255, 255)


@lru_cache(maxsize=None)
def palette() -> np.ndarray:
    """The bundled 64-entry Parula table as a read-only (64, 3) uint8 array."""
    text = resources.files("icascope.assets").joinpath("parula64.csv").read_text()
    rows = [tuple(int(v) for v in r) for r in csv.reader(text.splitlines()) if r]
    table = np.array(rows, dtype=np.uint8)
    if table.shape != (64, 3):
        raise ValueError(f"palette asset has shape {table.shape}, expected (64, 3)")
    table.setflags(write=False)
    return table


def parula64(v: float) -> tuple[int, int, int]:
    if not 0.0 <= v <= 1.0:
        raise RangeError(f"palette coordinate {v!r} outside [0, 1]")
    r, g, b = palette()[int(np.floor(v * 63))]
    return int(r), int(g), int(b)


def color_index(field_values) -> np.ndarray:
    """Palette index of field values in [-1, 1]: floor((f + 1) / 2 * 63)."""
    f = np.clip(field_values, -1.0, 1.0)
    return np.floor((f + 1.0) / 2.0 * 63).astype(np.intp)


@dataclass(frozen=True)
class ScalpLayout:
    channel_names: tuple[str, ...]
    xy: np.ndarray  # (n_channels, 2), nose toward +y, left ear toward -x
    mask: np.ndarray = field(repr=False)           # (N_ROWS, N_COLS) bool
    idw: np.ndarray = field(repr=False)            # (n_mask_pixels, n_channels)

    def position(self, name: str) -> np.ndarray:
        return self.xy[self.channel_names.index(name)]


def pixel_grid():
    """Head-plane coordinates of every pixel centre; the unit disk is inscribed in the raster."""
    scale = min(N_ROWS, N_COLS) / 2.0
    cols = (np.arange(N_COLS) - (N_COLS - 1) / 2.0) / scale
    rows = ((N_ROWS - 1) / 2.0 - np.arange(N_ROWS)) / scale  # row 0 is the top (nose side)
    gx, gy = np.meshgrid(cols, rows)
    return gx, gy


def project_points(xyz) -> np.ndarray:
    """Azimuthal equidistant projection of unit vectors around the vertex."""
    xyz = np.atleast_2d(np.asarray(xyz, dtype=np.float64))
    polar = np.arccos(np.clip(xyz[:, 2], -1.0, 1.0))
    radius = polar / (np.pi / 2) * EQUATOR_RADIUS
    horiz = np.hypot(xyz[:, 0], xyz[:, 1])
    safe = np.where(horiz > 0, horiz, 1.0)
    # viewed from above with the nose up: +x (nose) -> +Y, +y (left ear) -> -X
    px = np.where(horiz > 0, -xyz[:, 1] / safe, 0.0) * radius
    py = np.where(horiz > 0, xyz[:, 0] / safe, 0.0) * radius
    return np.stack([px, py], axis=1)


def project_electrodes(montage: Montage | None = None, channels=None) -> ScalpLayout:
    """Build the layout for ``channels`` together with its pixel interpolation weights."""
    montage = standard_montage() if montage is None else montage
    channels = tuple(montage.keys()) if channels is None else tuple(channels)
    for c in channels:
        if c not in montage:
            raise MontageError(f"unknown channel label {c!r}")
    xy = project_points(positions(channels, montage))
    if np.any(np.hypot(xy[:, 0], xy[:, 1]) > 1.0):
        raise MontageError("electrode projects outside the head disk")
    xy.setflags(write=False)

    gx, gy = pixel_grid()
    mask = gx ** 2 + gy ** 2 <= 1.0
    px = np.stack([gx[mask], gy[mask]], axis=1)
    d2 = ((px[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2)
    with np.errstate(divide="ignore"):
        w = 1.0 / d2 ** (IDW_POWER / 2)
    on_electrode = d2 == 0
    hit = on_electrode.any(axis=1)
    w[hit] = on_electrode[hit].astype(np.float64)
    w /= w.sum(axis=1, keepdims=True)
    mask.setflags(write=False)
    w.setflags(write=False)
    return ScalpLayout(channels, xy, mask, w)


@lru_cache(maxsize=8)
def default_layout(channels=None) -> ScalpLayout:
    from .montage import DEAP_CHANNELS
    return project_electrodes(standard_montage(), DEAP_CHANNELS if channels is None else channels)


@dataclass(frozen=True)
class Topoplot:
    rgb: np.ndarray    # (N_ROWS, N_COLS, 3) uint8
    field: np.ndarray  # (N_ROWS, N_COLS) float64, 0 outside the mask
    mask: np.ndarray   # (N_ROWS, N_COLS) bool

    def as_input(self) -> np.ndarray:
        """Channel-first float32 array scaled to [0, 1] for the classifiers."""
        return to_input(self.rgb)


def to_input(rgb) -> np.ndarray:
    return (np.asarray(rgb, dtype=np.float32) / np.float32(255.0)).transpose(2, 0, 1)


def render_topoplot(w: ComponentWeights, layout: ScalpLayout | None = None) -> Topoplot:
    """Interpolate ``w`` over the head disk and color it with the 64-level palette."""
    layout = default_layout() if layout is None else layout
    values = np.asarray(w.weights, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NumericError("weights contain non-finite values")
    if tuple(w.channel_names) != layout.channel_names:
        order = [w.channel_names.index(c) if c in w.channel_names else -1
                 for c in layout.channel_names]
        if -1 in order or len(w.channel_names) != len(layout.channel_names):
            raise MontageError("weights and layout cover different channels")
        values = values[order]

    inside = np.clip(layout.idw @ values, -1.0, 1.0)
    fld = np.zeros((N_ROWS, N_COLS))
    fld[layout.mask] = inside
    rgb = np.empty((N_ROWS, N_COLS, 3), dtype=np.uint8)
    rgb[...] = BACKGROUND
    rgb[layout.mask] = palette()[color_index(inside)]
    return Topoplot(rgb, fld, layout.mask)


def export_png(t: Topoplot, path) -> None:
    try:
        Image.fromarray(np.ascontiguousarray(t.rgb), mode="RGB").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_png(path) -> np.ndarray:
    """Read an RGB topoplot back as a (134, 136, 3) uint8 array."""
    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if rgb.shape != (N_ROWS, N_COLS, 3):
        raise IoError(f"{path}: expected {N_ROWS}x{N_COLS} RGB image, got {rgb.shape}")
    return rgb
