import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavelet_ph.features import (
    LYNDON_BASIS,
    PathTooShortError,
    eigen_path,
    feature_dim,
    feature_vector,
    hks_extrema,
    log_signature,
    profile_for,
    signature,
    tensor_exp,
    tensor_log,
    tensor_mul,
    unit,
)
from wavelet_ph.graphs import Graph
from wavelet_ph.spectral import SpectralData, graph_spectrum

iisignature = pytest.importorskip("iisignature")

paths = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s).normal(size=(int(np.random.default_rng(s).integers(2, 9)), 2)))


def spectrum(vals):
    vals = np.asarray(vals, dtype=float)
    return SpectralData(vals, np.eye(len(vals)))


def close(a, b, tol):
    return all(np.max(np.abs(x - y), initial=0.0) <= tol for x, y in zip(a, b))


def test_eigen_path_examples():
    assert np.array_equal(eigen_path(spectrum([0, 1, 2]), "delay"), [[0, 1], [1, 2]])
    assert np.array_equal(eigen_path(spectrum([0, 2]), "time"), [[0, 0], [2, 2]])
    t = eigen_path(spectrum(np.linspace(0, 2, 7)), "time")[:, 1]
    assert t[-1] == 2.0 and t[0] == 0.0
    with pytest.raises(PathTooShortError):
        eigen_path(spectrum([0.0]))


def test_level_dimensions():
    def level(w):
        return 1 if isinstance(w, int) else level(w[0]) + level(w[1])

    counts = [sum(level(w) == k for w in LYNDON_BASIS) for k in range(1, 5)]
    # necklace counts for a 2-letter alphabet: (1/k) sum_{d|k} mu(d) 2^(k/d)
    assert counts == [2, 1, 2, 3]
    assert len(LYNDON_BASIS) == 8


def test_single_segment():
    ls = log_signature([[0.3, -1.0], [1.5, 0.25]])
    assert np.allclose(ls, [1.2, 1.25, 0, 0, 0, 0, 0, 0], atol=1e-15)


@given(paths)
def test_straight_line(seed_path):
    d = seed_path[1] - seed_path[0]
    ts = np.sort(np.random.default_rng(0).uniform(0, 3, 6))
    pts = seed_path[0] + ts[:, None] * d
    ls = log_signature(pts)
    assert np.allclose(ls[:2], pts[-1] - pts[0], atol=1e-12)
    assert np.max(np.abs(ls[2:])) < 1e-12


@given(paths, paths)
def test_chen_identity(p, q):
    joined = np.vstack([p, q + (p[-1] - q[0])])
    lhs = signature(joined)
    rhs = tensor_mul(signature(p), signature(q))
    assert close(lhs, rhs, 1e-10)
    # the joined path through an external signature implementation
    ext = iisignature.sig(joined, 4)
    ours = np.concatenate([t.ravel() for t in lhs[1:]])
    assert np.allclose(ours, ext, rtol=0, atol=1e-10)


@given(paths)
def test_matches_external_logsig(p):
    prep = iisignature.prepare(2, 4)
    assert np.allclose(log_signature(p), iisignature.logsig(p, prep), rtol=0, atol=1e-10)


@given(paths, st.floats(-10, 10), st.floats(-10, 10))
def test_translation_invariance(p, a, b):
    assert np.allclose(log_signature(p), log_signature(p + [a, b]), atol=1e-10)


@given(paths)
def test_time_reversal(p):
    prod = tensor_mul(signature(p[::-1]), signature(p))
    assert close(prod, unit(), 1e-10)


@given(paths)
def test_exp_log_round_trip(p):
    lg = tensor_log(signature(p))
    assert close(tensor_exp(lg), signature(p), 1e-10)


def test_hks_examples():
    # an isolated vertex has Laplacian row (1), hence eigenvalue 1
    single = hks_extrema(graph_spectrum(Graph.from_edges(1, [])))
    assert np.allclose(single, [np.exp(-10)] * 2 + [np.exp(-0.1)] * 2, rtol=1e-14)
    ext = hks_extrema(graph_spectrum(Graph.from_edges(2, [(0, 1)])))
    assert ext[0] == pytest.approx(0.5 * (1 + np.exp(-20)), abs=1e-14)
    assert ext[1] == pytest.approx(0.5 * (1 + np.exp(-20)), abs=1e-14)


def test_hks_ordering(mutag_spectra):
    for s in mutag_spectra[:40]:
        e = hks_extrema(s)
        assert e[0] >= e[1] and e[2] >= e[3]


def test_feature_dims(mutag_spectra):
    assert profile_for("MUTAG") == "delay" and profile_for("IMDB-BINARY") == "time+hks"
    assert profile_for("PROTEINS") == "delay"
    assert feature_dim("delay") == 8 and feature_dim("time+hks") == 12
    s = mutag_spectra[0]
    assert feature_vector(s, "delay").shape == (8,)
    assert feature_vector(s, "time+hks").shape == (12,)
    assert feature_vector(s).tobytes() == feature_vector(s).tobytes()
