"""Regenerate the bundled text assets (electrode montage and 64-level palette).

Run from the repository root:

    python scripts/build_assets.py

The outputs are committed; this script only documents how they were made.
"""
from pathlib import Path

import numpy as np

ASSETS = Path(__file__).resolve().parents[1] / "src" / "icascope" / "assets"

# Parula ramp control points (R, G, B in [0, 1]), dark blue -> yellow.
PARULA_ANCHORS = [
    (0.2422, 0.1504, 0.6603), (0.2504, 0.1650, 0.7076), (0.2578, 0.1818, 0.7511),
    (0.2647, 0.1978, 0.7952), (0.2706, 0.2147, 0.8364), (0.2751, 0.2342, 0.8710),
    (0.2783, 0.2559, 0.8991), (0.2803, 0.2782, 0.9221), (0.2813, 0.3006, 0.9414),
    (0.2810, 0.3228, 0.9579), (0.2795, 0.3447, 0.9717), (0.2760, 0.3667, 0.9829),
    (0.2699, 0.3892, 0.9906), (0.2602, 0.4123, 0.9952), (0.2440, 0.4358, 0.9988),
    (0.2206, 0.4603, 0.9973), (0.1963, 0.4847, 0.9892), (0.1834, 0.5074, 0.9798),
    (0.1786, 0.5289, 0.9682), (0.1764, 0.5499, 0.9520), (0.1687, 0.5703, 0.9359),
    (0.1540, 0.5902, 0.9218), (0.1460, 0.6091, 0.9079), (0.1380, 0.6276, 0.8973),
    (0.1248, 0.6459, 0.8883), (0.1113, 0.6635, 0.8763), (0.0952, 0.6798, 0.8598),
    (0.0689, 0.6948, 0.8394), (0.0297, 0.7082, 0.8163), (0.0036, 0.7199, 0.7913),
    (0.0067, 0.7300, 0.7661), (0.0433, 0.7394, 0.7406), (0.0964, 0.7492, 0.7152),
    (0.1408, 0.7584, 0.6884), (0.1717, 0.7667, 0.6589), (0.1938, 0.7734, 0.6260),
    (0.2161, 0.7785, 0.5922), (0.2470, 0.7818, 0.5564), (0.2906, 0.7829, 0.5196),
    (0.3406, 0.7801, 0.4809), (0.3909, 0.7740, 0.4407), (0.4392, 0.7654, 0.3991),
    (0.4857, 0.7559, 0.3592), (0.5306, 0.7460, 0.3221), (0.5722, 0.7359, 0.2869),
    (0.6115, 0.7254, 0.2546), (0.6486, 0.7152, 0.2222), (0.6853, 0.7037, 0.1963),
    (0.7206, 0.6923, 0.1767), (0.7557, 0.6806, 0.1601), (0.7907, 0.6682, 0.1488),
    (0.8246, 0.6559, 0.1484), (0.8565, 0.6440, 0.1616), (0.8870, 0.6324, 0.1829),
    (0.9164, 0.6212, 0.2082), (0.9455, 0.6111, 0.2301), (0.9712, 0.6031, 0.2439),
    (0.9874, 0.6203, 0.2199), (0.9904, 0.6471, 0.1992), (0.9835, 0.6750, 0.1815),
    (0.9712, 0.7025, 0.1660), (0.9592, 0.7295, 0.1488), (0.9515, 0.7580, 0.1293),
    (0.9525, 0.7868, 0.1107), (0.9636, 0.8161, 0.0919), (0.9718, 0.8436, 0.0760),
    (0.9752, 0.8712, 0.0631), (0.9764, 0.8988, 0.0599), (0.9781, 0.9262, 0.0643),
    (0.9781, 0.9540, 0.0685), (0.9769, 0.9839, 0.0805),
]

# 32 DEAP labels on the 10-20 grid, as (front-back %, left-right %) along the
# nasion-inion and preauricular arcs (50/50 is the vertex).
GRID_PERCENT = {
    "Fp1": (10, 10), "AF3": (20, 30), "F3": (30, 30), "F7": (30, 10),
    "FC5": (40, 20), "FC1": (40, 40), "C3": (50, 30), "T7": (50, 10),
    "CP5": (60, 20), "CP1": (60, 40), "P3": (70, 30), "P7": (70, 10),
    "PO3": (80, 30), "O1": (90, 10), "Oz": (90, 50), "Pz": (70, 50),
    "Fp2": (10, 90), "AF4": (20, 70), "Fz": (30, 50), "F4": (30, 70),
    "F8": (30, 90), "FC6": (40, 80), "FC2": (40, 60), "Cz": (50, 50),
    "C4": (50, 70), "T8": (50, 90), "CP6": (60, 80), "CP2": (60, 60),
    "P4": (70, 70), "P8": (70, 90), "PO4": (80, 70), "O2": (90, 90),
}


def percent_to_head(front_back, left_right):
    """Unit vector with x toward the nose, y toward the left ear, z to the vertex."""
    theta = front_back / 100.0 * np.pi
    phi = left_right / 100.0 * np.pi - np.pi / 2
    # phi < 0 is the left hemisphere (odd labels)
    return np.array([
        np.cos(theta),
        -np.sin(theta) * np.sin(phi),
        np.sin(theta) * np.cos(phi),
    ])


def build_palette():
    anchors = np.asarray(PARULA_ANCHORS)
    src = np.linspace(0.0, 1.0, len(anchors))
    dst = np.linspace(0.0, 1.0, 64)
    rgb = np.stack([np.interp(dst, src, anchors[:, c]) for c in range(3)], axis=1)
    rgb8 = np.round(rgb * 255).astype(int)
    assert len({tuple(r) for r in rgb8}) == 64, "palette entries must be distinct"
    lines = [f"{r},{g},{b}" for r, g, b in rgb8]
    (ASSETS / "parula64.csv").write_text("\n".join(lines) + "\n")


def build_montage():
    lines = ["label,x,y,z"]
    for label, (fb, lr) in GRID_PERCENT.items():
        v = percent_to_head(fb, lr)
        v = v / np.linalg.norm(v)
        lines.append(f"{label},{v[0]:.15f},{v[1]:.15f},{v[2]:.15f}")
    (ASSETS / "montage_1020.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    ASSETS.mkdir(parents=True, exist_ok=True)
    build_palette()
    build_montage()
    print("wrote", ASSETS)
