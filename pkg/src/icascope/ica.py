"""Whitening, symmetric FastICA and per-component scalp weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateComponentError, DegenerateInputError, NumericError


@dataclass(frozen=True)
class IcaResult:
    mixing: np.ndarray       # (n_channels, n_components)
    unmixing: np.ndarray     # (n_components, n_channels), applies to centered data
    sources: np.ndarray      # (n_components, n_samples)
    converged: bool
    iterations: int
    mean: np.ndarray | None = None

    @property
    def n_components(self) -> int:
        return self.mixing.shape[1]


@dataclass(frozen=True)
class ComponentWeights:
    weights: np.ndarray
    channel_names: tuple[str, ...]

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if w.shape != (len(self.channel_names),):
            raise ValueError(f"{w.shape[0]} weights for {len(self.channel_names)} channels")


def center_whiten(x):
    """Return ``(z, whitener, mean)`` with ``z = whitener @ (x - mean)`` and ``cov(z) = I``.

    PCA whitening from the eigendecomposition of the sample covariance.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("input contains non-finite values")
    n_ch, n_s = x.shape
    if n_s <= n_ch:
        raise DegenerateInputError(f"need more samples ({n_s}) than channels ({n_ch})")
    mean = x.mean(axis=1)
    xc = x - mean[:, None]
    cov = xc @ xc.T / n_s
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 0 or evals[0] < 1e-12 * evals[-1]:
        raise DegenerateInputError("covariance is rank deficient")
    whitener = (evecs / np.sqrt(evals)).T
    z = whitener @ xc
    # one correction pass removes round-off so cov(z) == I to ~1e-12
    evals2, evecs2 = np.linalg.eigh(z @ z.T / n_s)
    fix = (evecs2 / np.sqrt(evals2)) @ evecs2.T
    whitener = fix @ whitener
    z = fix @ z
    return z, whitener, mean


def _sym_decorrelate(w):
    """W <- (W W^T)^{-1/2} W."""
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(w.dtype).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fast_ica(z, n_components: int | None = None, tol: float = 1e-4, max_iter: int = 200,
             seed: int = 0, whitener=None, mean=None) -> IcaResult:
    """Symmetric fixed-point FastICA with the tanh (log-cosh) contrast on whitened ``z``.

    Convergence is declared when ``max |1 - |diag(W_new W_old^T)|| < tol``.
    Not converging is reported through ``converged``; it never raises.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("whitened data contains non-finite values")
    n_ch, n_s = z.shape
    n_components = n_ch if n_components is None else int(n_components)
    if not 1 <= n_components <= n_ch:
        raise ValueError(f"n_components must be in [1, {n_ch}], got {n_components}")
    whitener = np.eye(n_ch) if whitener is None else np.asarray(whitener, dtype=np.float64)

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((n_components, n_ch)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = np.tanh(w @ z)
        g_prime = (1.0 - y * y).mean(axis=1)
        w_new = _sym_decorrelate(y @ z.T / n_s - g_prime[:, None] * w)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if lim < tol:
            converged = True
            break

    unmixing = w @ whitener
    mixing = np.linalg.pinv(unmixing)
    sources = w @ z
    return IcaResult(mixing, unmixing, sources, converged, it, mean)


def decompose(x, n_components: int | None = None, tol: float = 1e-4, max_iter: int = 200,
              seed: int = 0) -> IcaResult:
    """Center, whiten and run FastICA on a channels x samples block."""
    z, whitener, mean = center_whiten(x)
    return fast_ica(z, n_components, tol=tol, max_iter=max_iter, seed=seed,
                    whitener=whitener, mean=mean)


def normalize_weights(column) -> np.ndarray:
    col = np.asarray(column, dtype=np.float64)
    if not np.all(np.isfinite(col)):
        raise NumericError("weights contain non-finite values")
    k = int(np.argmax(np.abs(col)))
    peak = col[k]
    if peak == 0:
        raise DegenerateComponentError("all-zero component")
    out = col / peak  # divides by signed peak: largest entry becomes exactly +1
    out[k] = 1.0
    return out


def component_weights(result: IcaResult, k: int, channel_names) -> ComponentWeights:
    """Column ``k`` of the mixing matrix scaled to max-abs 1 with a positive peak."""
    if not 0 <= k < result.n_components:
        raise IndexError(f"component {k} out of range [0, {result.n_components})")
    return ComponentWeights(normalize_weights(result.mixing[:, k]), channel_names)


def amari_index(g) -> float:
    """Amari distance of a square matrix from a scaled permutation; 0 is perfect."""
    p = np.abs(np.asarray(g, dtype=np.float64))
    n = p.shape[0]
    if n < 2:
        return 0.0
    rows = (p.sum(axis=1) / p.max(axis=1) - 1).sum()
    cols = (p.sum(axis=0) / p.max(axis=0) - 1).sum()
    return float((rows + cols) / (2 * n * (n - 1)))

