import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph
from oracles import has_repeated_eigenvalue, interpolated_diagonal, rotate_eigenspaces
from wavelet_ph import spectral as sp
from wavelet_ph.errors import DegenerateBasisError, NumericalError
from wavelet_ph.graphs import Graph

K3 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
EDGE = Graph.from_edges(2, [(0, 1)])


def graphs(n_max=9):
    return st.integers(0, 2**32 - 1).map(lambda s: random_graph(np.random.default_rng(s), n_max))


def test_laplacian_examples():
    assert np.array_equal(sp.normalised_laplacian(EDGE), [[1, -1], [-1, 1]])
    lap = sp.normalised_laplacian(K3)
    assert np.allclose(np.diag(lap), 1)
    assert np.allclose(lap[~np.eye(3, dtype=bool)], -0.5)


def test_isolated_vertex_row_is_identity():
    lap = sp.normalised_laplacian(Graph.from_edges(3, [(0, 1)]))
    assert lap[2].tolist() == [0, 0, 1]


def test_mutag_first_graph_psd(mutag):
    s = sp.graph_spectrum(mutag.graphs[0])
    assert s.eigenvalues.min() >= -1e-9


def test_connected_graph_single_zero_eigenvalue():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)])
    assert int(np.sum(np.abs(sp.graph_spectrum(g).eigenvalues) < 1e-9)) == 1


def test_small_spectra():
    assert np.allclose(sp.graph_spectrum(EDGE).eigenvalues, [0, 2], atol=1e-12)
    assert np.allclose(sp.graph_spectrum(K3).eigenvalues, [0, 1.5, 1.5], atol=1e-12)


def test_non_convergence_raises():
    with pytest.raises(NumericalError):
        sp.jacobi_eigh(sp.normalised_laplacian(K3), max_sweeps=0)


@given(graphs())
def test_spectral_invariants(g):
    s = sp.graph_spectrum(g)
    lam, phi = s.eigenvalues, s.eigenvectors
    assert np.all(lam >= -1e-9) and np.all(lam <= 2 + 1e-9)
    assert np.all(np.diff(lam) >= 0)
    assert np.allclose(phi.T @ phi, np.eye(g.n_vertices), atol=1e-9)
    # an isolated vertex has an identity row, hence eigenvalue 1 rather than 0
    isolated = int(np.sum(g.degree == 0))
    assert int(np.sum(np.abs(lam) < 1e-9)) == g.n_components() - isolated
    assert np.allclose(phi @ np.diag(lam) @ phi.T, sp.normalised_laplacian(g), atol=1e-9)
    # largest-magnitude entry of every eigenvector is positive
    idx = np.argmax(np.abs(phi), axis=0)
    assert np.all(phi[idx, np.arange(len(lam))] > 0)


@given(graphs())
def test_jacobi_matches_lapack(g):
    a = sp.graph_spectrum(g, "jacobi")
    b = sp.graph_spectrum(g, "lapack")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-10)
    assert np.allclose(a.eigenvectors**2 @ np.exp(-a.eigenvalues), b.eigenvectors**2 @ np.exp(-b.eigenvalues), atol=1e-10)


def test_deterministic():
    g = random_graph(np.random.default_rng(5), 9, 6)
    a, b = sp.graph_spectrum(g), sp.graph_spectrum(g)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_signature_examples():
    s = sp.graph_spectrum(EDGE)
    assert np.allclose(sp.wavelet_signature(s, sp.heat_kernel(10)), 0.5 * (1 + np.exp(-20)), atol=1e-15)
    g = random_graph(np.random.default_rng(2), 9, 5)
    assert np.allclose(sp.wavelet_signature(sp.graph_spectrum(g), lambda x: 3.5 + 0 * x), 3.5, atol=1e-10)


@given(graphs(8), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(g, alpha, beta):
    s = sp.graph_spectrum(g)
    f1, f2 = sp.heat_kernel(2.0), lambda x: np.sin(3 * x)
    lhs = sp.wavelet_signature(s, lambda x: alpha * f1(x) + beta * f2(x))
    rhs = alpha * sp.wavelet_signature(s, f1) + beta * sp.wavelet_signature(s, f2)
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(graphs(8), st.integers(0, 2**32 - 1))
def test_interpolation_identity(g, seed):
    s = sp.graph_spectrum(g)
    c = np.random.default_rng(seed).normal(size=4)

    def wav(x):
        return c[0] + c[1] * np.exp(-c[2] ** 2 * x) + c[3] * np.cos(2 * x)

    assert np.allclose(sp.wavelet_signature(s, wav), interpolated_diagonal(sp.normalised_laplacian(g), wav), atol=1e-7)


@pytest.mark.parametrize("g", [
    Graph.from_edges(6, [(0, i) for i in range(1, 6)]),
    Graph.from_edges(6, [(i, (i + 1) % 6) for i in range(6)]),
    Graph.from_edges(5, [(i, j) for i in range(5) for j in range(i + 1, 5)]),
])
def test_eigenbasis_invariance(g):
    rng = np.random.default_rng(0)
    s = sp.graph_spectrum(g)
    assert has_repeated_eigenvalue(s)
    r = rotate_eigenspaces(s, rng)
    assert not np.allclose(r.eigenvectors, s.eigenvectors)
    for wav in (sp.heat_kernel(1.3), lambda x: np.sin(5 * x) + x**3):
        assert np.max(np.abs(sp.wavelet_signature(s, wav) - sp.wavelet_signature(r, wav))) < 1e-9


def test_chebyshev_basis():
    b = sp.chebyshev_basis(5)
    x = np.linspace(0, 2, 7)
    assert b.m == 5
    assert b.degrees == [0, 2, 3, 4, 5]
    assert np.allclose(b(0)(x), 1)
    assert np.isclose(b(1)(np.array([1.0]))[0], -1.0)
    assert np.allclose(b.evaluate(x)[:, 2], np.cos(3 * np.arccos(x - 1)))


@given(graphs())
def test_degree_one_chebyshev_vanishes(g):
    s = sp.graph_spectrum(g)
    assert np.allclose(sp.wavelet_signature(s, lambda x: x - 1), 0, atol=1e-12)


def test_rbf_basis():
    b = sp.rbf_basis()
    assert b.m == 12
    assert np.isclose(b.width, 2 / 9)
    assert np.isclose(b.centroids[0], -2 / 9) and np.isclose(b.centroids[-1], 20 / 9)
    for j in range(1, 10):
        c = b.centroids[j]
        assert np.isclose(b(j)(np.array([c]))[0], 1.0)
        assert np.isclose(b(j)(np.array([c + b.width]))[0] if c + b.width <= 2 else 1 / np.sqrt(2), 1 / np.sqrt(2))
    assert np.all(np.isfinite(b.evaluate(np.linspace(0, 2, 101))))


def test_constant_basis_parametrisation():
    g = random_graph(np.random.default_rng(1), 9, 6)
    basis = sp.WaveletBasis("const", [lambda x: np.ones_like(x)])
    p = sp.build_parametrisation([sp.graph_spectrum(g)], basis)
    assert np.allclose(p.matrix[:, 0], 1)
    assert np.isclose(p.singular_values[0], np.sqrt(g.n_vertices))


def test_zero_basis_rejected():
    g = random_graph(np.random.default_rng(1), 9, 6)
    with pytest.raises(DegenerateBasisError):
        sp.build_parametrisation([sp.graph_spectrum(g)], sp.WaveletBasis("zero", [lambda x: 0 * x]))


@pytest.fixture(scope="module")
def mutag_rbf(mutag_spectra):
    return sp.build_parametrisation(mutag_spectra, sp.rbf_basis())


def test_mutag_rbf_spread(mutag_rbf):
    assert mutag_rbf.singular_values[-1] / mutag_rbf.singular_values[0] < 1e-2
    assert mutag_rbf.rank <= 12


def test_svd_relation(mutag_rbf):
    f, v, u, s = mutag_rbf.matrix, mutag_rbf.right_vectors, mutag_rbf.left_vectors, mutag_rbf.singular_values
    assert np.allclose(f @ v, u * s, atol=1e-8)
    assert np.allclose(u.T @ u, np.eye(mutag_rbf.rank), atol=1e-8)
    assert np.allclose(s, np.linalg.svd(f, compute_uv=False)[: len(s)], rtol=1e-10)


def test_recondition(mutag_rbf, mutag_spectra):
    p = sp.recondition(mutag_rbf)
    assert np.allclose(p.matrix.T @ p.matrix, np.eye(p.rank), atol=1e-8)
    assert np.allclose(np.linalg.svd(p.matrix, compute_uv=False), 1, atol=1e-8)
    # the new basis functions really have signatures u_k
    rebuilt = np.vstack([p.basis.signatures(s) for s in mutag_spectra])
    assert np.allclose(rebuilt, p.matrix, atol=1e-8)


def test_recondition_orthonormal_input():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(7, 3)))
    sigma, u, v = sp.jacobi_svd(q)
    assert np.allclose(sigma, 1)
    p = sp.Parametrisation(q, sigma, u, v, sp.WaveletBasis("x", [np.cos, np.sin, np.exp]), np.array([0]), np.array([7]))
    r = sp.recondition(p)
    assert np.allclose(np.linalg.svd(r.matrix, compute_uv=False), 1)
    # same column space
    assert np.allclose(r.matrix @ (r.matrix.T @ q), q)


def test_least_squares(mutag_rbf, mutag_spectra):
    p = sp.recondition(mutag_rbf)
    assert np.allclose(sp.least_squares_init(p, p.matrix[:, 0]), np.eye(p.rank)[0], atol=1e-12)
    rng = np.random.default_rng(0)
    z = rng.normal(size=p.matrix.shape[0])
    z -= p.matrix @ (p.matrix.T @ z)
    assert np.allclose(sp.least_squares_init(p, z), 0, atol=1e-10)
    target = sp.stacked_signature(mutag_spectra, sp.heat_kernel(10))
    theta = sp.least_squares_init(p, target)
    best = np.linalg.norm(p.matrix @ theta - target)
    for _ in range(100):
        other = theta + rng.normal(scale=0.1, size=theta.shape)
        assert best <= np.linalg.norm(p.matrix @ other - target)
    with pytest.raises(ValueError):
        sp.least_squares_init(mutag_rbf, target)


def test_apply_and_pullback(mutag_rbf):
    p = sp.recondition(mutag_rbf)
    assert np.all(sp.apply(p, np.zeros(p.rank)) == 0)
    for k in range(p.rank):
        assert np.allclose(sp.apply(p, np.eye(p.rank)[k]), p.left_vectors[:, k])
    rng = np.random.default_rng(0)
    for _ in range(10):
        theta, g = rng.normal(size=p.rank), rng.normal(size=p.matrix.shape[0])
        assert abs(sp.apply(p, theta) @ g - theta @ sp.pullback_gradient(p, g)) < 1e-10
    with pytest.raises(ValueError):
        sp.apply(p, np.zeros(p.rank + 1))
    with pytest.raises(ValueError):
        sp.pullback_gradient(p, np.zeros(3))


def test_chebyshev_parametrisation_rank(mutag_spectra):
    p = sp.build_parametrisation(mutag_spectra, sp.chebyshev_basis())
    assert 1 <= p.rank <= 13
    assert np.allclose(np.linalg.svd(sp.recondition(p).matrix, compute_uv=False), 1, atol=1e-8)
