"""Standard 10-20 electrode positions on the unit head sphere."""
from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import MontageError

# Channel order of the DEAP recordings.
DEAP_CHANNELS = (
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3",
    "P7", "PO3", "O1", "Oz", "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6",
    "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
)

Montage = Mapping[str, np.ndarray]


@lru_cache(maxsize=None)
def standard_montage() -> Montage:
    """Label -> unit vector (x nose, y left ear, z vertex), read from the bundled asset."""
    text = resources.files("icascope.assets").joinpath("montage_1020.csv").read_text()
    table = {}
    for row in csv.DictReader(text.splitlines()):
        v = np.array([float(row["x"]), float(row["y"]), float(row["z"])])
        v.setflags(write=False)
        table[row["label"]] = v
    return MappingProxyType(table)


def check_channels(channels, montage: Montage | None = None) -> None:
    montage = standard_montage() if montage is None else montage
    for name in channels:
        if name not in montage:
            raise MontageError(f"unknown channel label {name!r}")


def positions(channels, montage: Montage | None = None) -> np.ndarray:
    """Stack the 3D positions of ``channels`` into an (n, 3) array."""
    montage = standard_montage() if montage is None else montage
    check_channels(channels, montage)
    return np.stack([montage[c] for c in channels])


def mirror_label(label: str) -> str:
    """Left/right homologue of a 10-20 label (odd <-> even digits, midline unchanged)."""
    stem = label.rstrip("0123456789")
    digits = label[len(stem):]
    if not digits:
        return label
    n = int(digits)
    return f"{stem}{n + 1 if n % 2 else n - 1}"
