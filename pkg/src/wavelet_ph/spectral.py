"""Normalised Laplacian spectra, wavelet signatures and their parametrisation.

A wavelet ``g : [0, 2] -> R`` is turned into a vertex function by

    W(g)_v = sum_i g(lambda_i) * phi_i[v] ** 2

where ``(lambda_i, phi_i)`` is an orthonormal eigenbasis of the normalised
Laplacian. Wavelets are linear combinations of ``m`` basis functions, so the
map from coefficients to (stacked) vertex functions is a matrix ``F`` whose
columns are the signatures of the basis functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateBasisError, NumericalError
from .graphs import Graph

EIGEN_ATOL = 1e-9
RANK_RTOL = 1e-8


def normalised_laplacian(g: Graph) -> np.ndarray:
    """``I - D^{-1/2} A D^{-1/2}``; isolated vertices keep an identity row."""
    n = g.n_vertices
    lap = np.eye(n)
    if g.n_edges:
        deg = g.degree.astype(float)
        u, v = g.edges[:, 0], g.edges[:, 1]
        w = -1.0 / np.sqrt(deg[u] * deg[v])
        lap[u, v] = w
        lap[v, u] = w
    return lap


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigenvalue algorithm for a real symmetric matrix.

    Returns unsorted eigenvalues and the matrix whose columns are the
    corresponding eigenvectors. Raises NumericalError if the off-diagonal
    Frobenius norm is still above ``tol`` after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    vecs = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), vecs

    iu = np.triu_indices(n, 1)

    def off_norm():
        return np.sqrt(2.0 * np.sum(a[iu] ** 2))

    for _ in range(max_sweeps):
        if off_norm() <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = vecs[:, p].copy()
                vq = vecs[:, q]
                vecs[:, p] = c * vp - s * vq
                vecs[:, q] = s * vp + c * vq
    else:
        if off_norm() > tol:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(a).copy(), vecs


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigendecompose(lap: np.ndarray, method: str = "jacobi") -> SpectralData:
    """Ascending eigenvalues with sign-normalised orthonormal eigenvectors.

    ``method="jacobi"`` uses :func:`jacobi_eigh`; ``"lapack"`` delegates to
    :func:`numpy.linalg.eigh` for large graphs.
    """
    if method == "jacobi":
        vals, vecs = jacobi_eigh(lap)
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(lap)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = np.ascontiguousarray(_fix_signs(vecs[:, order]))
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralData(vals, vecs)


def graph_spectrum(g: Graph, method: str = "jacobi") -> SpectralData:
    return eigendecompose(normalised_laplacian(g), method)


def wavelet_signature(s: SpectralData, g: Callable) -> np.ndarray:
    """Vertex function ``W(g)``; ``g`` must accept a numpy array."""
    lam = np.clip(s.eigenvalues, 0.0, 2.0)
    return (s.eigenvectors**2) @ np.broadcast_to(np.asarray(g(lam), dtype=float), lam.shape)


def heat_kernel(t: float) -> Callable:
    return lambda x: np.exp(-t * np.asarray(x, dtype=float))


# -- wavelet bases -----------------------------------------------------------


class WaveletBasis:
    """Finite family ``h_1 .. h_m`` of wavelets on ``[0, 2]``.

    Optionally the family is a fixed linear recombination of another one:
    ``h'_k = sum_j mixing[j, k] * h_j``.
    """

    def __init__(self, kind: str, functions: Sequence[Callable], mixing: np.ndarray | None = None):
        self.kind = kind
        self.functions = list(functions)
        self.mixing = None if mixing is None else np.asarray(mixing, dtype=float)

    @property
    def m(self) -> int:
        return len(self.functions) if self.mixing is None else self.mixing.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """``(len(x), m)`` matrix of basis values, inputs clamped to ``[0, 2]``."""
        x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), 0.0, 2.0)
        raw = np.stack([np.broadcast_to(h(x), x.shape) for h in self.functions], axis=1)
        return raw if self.mixing is None else raw @ self.mixing

    def __call__(self, j: int) -> Callable:
        return lambda x: self.evaluate(x)[:, j]

    def signatures(self, s: SpectralData) -> np.ndarray:
        """``(|V|, m)`` block of ``F`` for one graph."""
        return (s.eigenvectors**2) @ self.evaluate(s.eigenvalues)


def _chebyshev(n: int) -> Callable:
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return lambda lam: np.polynomial.chebyshev.chebval(np.asarray(lam) - 1.0, coef)


def chebyshev_basis(m: int = 13) -> WaveletBasis:
    """``T_n(lambda - 1)`` for ``n = 0, 2, 3, ...`` (``T_1`` has zero signature)."""
    if m < 1:
        raise ValueError("m >= 1 required")
    degrees = [0] + list(range(2, m + 1))
    basis = WaveletBasis("chebyshev", [_chebyshev(n) for n in degrees])
    basis.degrees = degrees
    return basis


RBF_WIDTH = 2.0 / 9.0
RBF_CENTROIDS = np.array([2.0 * (j - 1) / 9.0 for j in range(12)])


def _inverse_multiquadric(centre: float, width: float) -> Callable:
    return lambda x: 1.0 / np.sqrt(((np.asarray(x) - centre) / width) ** 2 + 1.0)


def rbf_basis(centroids=RBF_CENTROIDS, width: float = RBF_WIDTH) -> WaveletBasis:
    """Twelve inverse multiquadrics at ``x_j = 2(j-1)/9``, ``j = 0..11``, width 2/9."""
    basis = WaveletBasis("rbf-inverse-multiquadric", [_inverse_multiquadric(c, width) for c in centroids])
    basis.centroids = np.asarray(centroids, dtype=float)
    basis.width = width
    return basis


def make_basis(kind: str) -> WaveletBasis:
    if kind in ("rbf", "rbf-inverse-multiquadric"):
        return rbf_basis()
    if kind == "chebyshev":
        return chebyshev_basis()
    raise ValueError(f"unknown basis kind {kind!r}")


# -- parametrisation ---------------------------------------------------------


def jacobi_svd(f: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """One-sided (Hestenes) Jacobi SVD of a tall matrix.

    Returns ``(sigma, U, V)`` with ``sigma`` descending, ``f @ V = U * sigma``
    and ``U`` having orthonormal columns wherever ``sigma > 0``.
    """
    a = np.array(f, dtype=float, copy=True)
    m = a.shape[1]
    v = np.eye(m)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(m - 1):
            for j in range(i + 1, m):
                ai, aj = a[:, i], a[:, j]
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                if alpha == 0.0 or beta == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_i = c * ai - s * aj
                a[:, j] = s * ai + c * aj
                a[:, i] = new_i
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * v[:, j]
                v[:, j] = s * vi + c * v[:, j]
        if not rotated:
            break
    else:
        raise NumericalError(f"one-sided Jacobi SVD did not converge in {max_sweeps} sweeps")
    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, a, v = sigma[order], a[:, order], v[:, order]
    u = np.zeros_like(a)
    nz = sigma > 0
    u[:, nz] = a[:, nz] / sigma[nz]
    return sigma, u, v


@dataclass(frozen=True)
class Parametrisation:
    """Linear map from wavelet coefficients to stacked vertex functions.

    ``matrix`` has one row per vertex of the disjoint union of graphs, blocks
    delimited by ``offsets``; ``right_vectors[:, k]`` is mapped to
    ``singular_values[k] * left_vectors[:, k]``.
    """

    matrix: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    basis: WaveletBasis
    offsets: np.ndarray
    sizes: np.ndarray
    reconditioned: bool = False

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    @property
    def n_params(self) -> int:
        return self.matrix.shape[1]

    def block(self, i: int) -> np.ndarray:
        o = self.offsets[i]
        return self.matrix[o : o + self.sizes[i]]

    def split(self, stacked: np.ndarray) -> list[np.ndarray]:
        return [stacked[o : o + n] for o, n in zip(self.offsets, self.sizes)]


def _stack(spectra: Sequence[SpectralData], basis: WaveletBasis):
    sizes = np.array([s.n for s in spectra], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    blocks = [basis.signatures(s) for s in spectra]
    return np.vstack(blocks) if blocks else np.zeros((0, basis.m)), offsets, sizes


def build_parametrisation(spectra: Sequence[SpectralData], basis: WaveletBasis) -> Parametrisation:
    f, offsets, sizes = _stack(spectra, basis)
    if not np.any(f):
        raise DegenerateBasisError("parametrisation matrix is identically zero")
    sigma, u, v = jacobi_svd(f)
    r = int(np.sum(sigma > RANK_RTOL * sigma[0]))
    return Parametrisation(f, sigma[:r], u[:, :r], v[:, :r], basis, offsets, sizes)


def recondition(p: Parametrisation) -> Parametrisation:
    """Swap to the basis ``h'_k = (1/sigma_k) sum_j (v_k)_j h_j``.

    Its signatures are the left singular vectors ``u_k``, so the new map has
    all singular values equal to one.
    """
    r = p.rank
    if r < 1:
        raise DegenerateBasisError("rank-zero parametrisation")
    mixing = p.right_vectors / p.singular_values
    if p.basis.mixing is not None:
        mixing = p.basis.mixing @ mixing
    new_basis = WaveletBasis(p.basis.kind, p.basis.functions, mixing)
    u = p.left_vectors.copy()
    return Parametrisation(u, np.ones(r), u, np.eye(r), new_basis, p.offsets, p.sizes, reconditioned=True)


def least_squares_init(p: Parametrisation, target: np.ndarray) -> np.ndarray:
    """Least-squares coefficients; a projection since the columns are orthonormal."""
    if not p.reconditioned:
        raise ValueError("least_squares_init expects a reconditioned parametrisation")
    target = np.asarray(target, dtype=float)
    if target.shape != (p.matrix.shape[0],):
        raise ValueError("target has the wrong length")
    return p.matrix.T @ target


def apply(p: Parametrisation, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (p.n_params,):
        raise ValueError(f"expected {p.n_params} coefficients, got shape {theta.shape}")
    return p.matrix @ theta


def pullback_gradient(p: Parametrisation, grad_f: np.ndarray) -> np.ndarray:
    grad_f = np.asarray(grad_f, dtype=float)
    if grad_f.shape != (p.matrix.shape[0],):
        raise ValueError(f"expected a gradient of length {p.matrix.shape[0]}, got {grad_f.shape}")
    return p.matrix.T @ grad_f


def stacked_signature(spectra: Sequence[SpectralData], g: Callable) -> np.ndarray:
    return np.concatenate([wavelet_signature(s, g) for s in spectra]) if spectra else np.zeros(0)
