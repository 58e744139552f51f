import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icascope.errors import DegenerateComponentError, DegenerateInputError, NumericError
from icascope.ica import (IcaResult, _sym_decorrelate, amari_index, center_whiten, component_weights,
                          decompose, fast_ica, normalize_weights)


def best_permutation(g):
    """Brute-force oracle: permutation and signs that best turn g into a scaled identity."""
    n = g.shape[0]
    best = None
    for perm in itertools.permutations(range(n)):
        score = sum(abs(g[i, perm[i]]) for i in range(n))
        if best is None or score > best[0]:
            best = (score, perm)
    perm = best[1]
    p = g[:, perm]
    return p * np.sign(np.diag(p))[:, None], perm


def amari_loops(g):
    p = np.abs(g)
    n = len(p)
    total = 0.0
    for i in range(n):
        total += sum(p[i, j] for j in range(n)) / max(p[i]) - 1
    for j in range(n):
        total += sum(p[i, j] for i in range(n)) / max(p[:, j]) - 1
    return total / (2 * n * (n - 1))


def laplace_mix(n_src, n_ch, n_s, seed, noise=0.0):
    rng = np.random.default_rng(seed)
    s = rng.laplace(size=(n_src, n_s))
    a = rng.standard_normal((n_ch, n_src))
    x = a @ s + noise * rng.standard_normal((n_ch, n_s))
    return x, a, s


# -------------------------------------------------------------- whitening

@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_whitened_covariance_is_identity(n_ch, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_ch, n_ch)) @ rng.standard_normal((n_ch, 500)) + rng.uniform(-5, 5, (n_ch, 1))
    z, w, mean = center_whiten(x)
    assert np.max(np.abs(z.mean(axis=1))) < 1e-9
    np.testing.assert_allclose(z @ z.T / z.shape[1], np.eye(n_ch), atol=1e-6)
    np.testing.assert_allclose(w @ (x - mean[:, None]), z, atol=1e-9)


def test_white_input_whitener_is_rotation():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 200000))
    _, w, _ = center_whiten(x)
    np.testing.assert_allclose(w @ w.T, np.eye(4), atol=2e-2)


def test_duplicate_channel_is_degenerate():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 1000))
    x[3] = x[1]
    with pytest.raises(DegenerateInputError):
        center_whiten(x)


def test_too_few_samples():
    with pytest.raises(DegenerateInputError):
        center_whiten(np.random.default_rng(0).standard_normal((4, 4)))


def test_nan_raises():
    z = np.random.default_rng(0).standard_normal((3, 100))
    z[1, 5] = np.nan
    with pytest.raises(NumericError):
        fast_ica(z)
    with pytest.raises(NumericError):
        decompose(z)


# ----------------------------------------------------------------- fastica

def test_two_laplacian_sources():
    rng = np.random.default_rng(0)
    s = rng.laplace(size=(2, 8192))
    a = np.array([[1.0, 0.5], [0.5, 1.0]])
    r = decompose(a @ s, tol=1e-4)
    g = r.unmixing @ a
    assert amari_index(g) < 0.05
    matched, _ = best_permutation(g)
    off = np.abs(matched - np.diag(np.diag(matched)))
    assert np.max(off) < 0.1 * np.min(np.abs(np.diag(matched)))


@pytest.mark.parametrize("n_src", [4, 8])
def test_recovery_over_seeds(n_src):
    good = 0
    for seed in range(10):
        x, a, _ = laplace_mix(n_src, n_src, 8192, seed)
        r = decompose(x, seed=seed)
        good += amari_index(r.unmixing @ a) < 0.05
    assert good >= 9


def test_eight_sources_in_32_noisy_channels_converge():
    for seed in range(5):
        x, _, _ = laplace_mix(8, 32, 8192, seed, noise=0.01)
        r = decompose(x, 8, seed=seed, max_iter=200)
        assert r.converged and r.iterations <= 200


def test_amari_matches_loop_oracle():
    rng = np.random.default_rng(1)
    for n in (2, 3, 5):
        g = rng.standard_normal((n, n))
        assert amari_index(g) == pytest.approx(amari_loops(g), rel=1e-12)
    perm = np.eye(4)[[2, 0, 3, 1]] * np.array([3.0, -1.0, 0.5, 2.0])
    assert amari_index(perm) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_sym_decorrelate_orthonormal_rows(n, extra, seed):
    w = np.random.default_rng(seed).standard_normal((n, n + extra))
    d = _sym_decorrelate(w)
    np.testing.assert_allclose(d @ d.T, np.eye(n), atol=1e-6)


def test_final_unmixing_rows_orthonormal_in_white_space():
    x, _, _ = laplace_mix(6, 6, 4000, 2)
    z, w, mean = center_whiten(x)
    r = fast_ica(z, whitener=w, mean=mean)
    wz = r.unmixing @ np.linalg.inv(w)
    np.testing.assert_allclose(wz @ wz.T, np.eye(6), atol=1e-6)


def test_sources_and_reconstruction():
    x, _, _ = laplace_mix(5, 5, 3000, 4)
    r = decompose(x)
    xc = x - x.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(r.unmixing @ xc, r.sources, rtol=1e-6, atol=1e-9)
    err = np.linalg.norm(r.mixing @ r.sources - xc) / np.linalg.norm(xc)
    assert err < 1e-5


def test_seed_determinism():
    x, _, _ = laplace_mix(4, 6, 2000, 5, noise=0.1)
    a = decompose(x, seed=11)
    b = decompose(x, seed=11)
    for f in ("mixing", "unmixing", "sources"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    assert (a.converged, a.iterations) == (b.converged, b.iterations)


def test_non_convergence_is_a_flag():
    x, _, _ = laplace_mix(6, 6, 3000, 6)
    r = decompose(x, max_iter=1, tol=1e-12)
    assert r.converged is False and r.iterations == 1


def test_bad_component_count():
    z = np.random.default_rng(0).standard_normal((3, 100))
    with pytest.raises(ValueError):
        fast_ica(z, 4)


# ------------------------------------------------------------------ weights

def _result(mixing):
    mixing = np.asarray(mixing, dtype=float)
    return IcaResult(mixing, np.linalg.pinv(mixing), np.zeros((mixing.shape[1], 1)), True, 1)


@pytest.mark.parametrize("col, expected", [
    ((0, -2, 1), (0, 1, -0.5)),
    ((3, 0, 0), (1, 0, 0)),
])
def test_weights_examples(col, expected):
    r = _result(np.array(col, dtype=float)[:, None])
    w = component_weights(r, 0, ("Fp1", "Fz", "Cz"))
    np.testing.assert_array_equal(w.weights, expected)


def test_weights_zero_column():
    r = _result(np.zeros((3, 1)))
    with pytest.raises(DegenerateComponentError):
        component_weights(r, 0, ("Fp1", "Fz", "Cz"))


def test_weights_index_error():
    r = _result(np.eye(3))
    with pytest.raises(IndexError):
        component_weights(r, 3, ("Fp1", "Fz", "Cz"))


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=2, max_size=32), st.floats(1e-3, 1e3), st.booleans())
def test_weights_invariants_and_scale(col, c, flip):
    col = np.array(col)
    if np.max(np.abs(col)) < 1e-9:
        return
    w = normalize_weights(col)
    assert np.max(np.abs(w)) == 1.0
    assert w[np.argmax(np.abs(w))] == 1.0
    scaled = normalize_weights(col * (-c if flip else c))
    np.testing.assert_allclose(scaled, w, rtol=1e-12, atol=1e-12)
