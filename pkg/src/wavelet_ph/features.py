"""Fixed spectral features: log-signatures of eigenvalue paths and HKS extrema."""

from __future__ import annotations

from math import factorial

import numpy as np

from .errors import DataFormatError
from .spectral import SpectralData, heat_kernel, wavelet_signature

DEPTH = 4
DIM = 2

# Lyndon words over {1, 2} up to length 4 in standard bracketing; an int is a
# letter and a pair (a, b) is the Lie bracket [a, b].
LYNDON_BASIS = (
    1,
    2,
    (1, 2),
    (1, (1, 2)),
    ((1, 2), 2),
    (1, (1, (1, 2))),
    (1, ((1, 2), 2)),
    (((1, 2), 2), 2),
)

PROFILES = {
    "MUTAG": "delay",
    "COX2": "delay",
    "DHFR": "delay",
    "NCI1": "delay",
    "PROTEINS": "delay",
    "IMDB-BINARY": "time+hks",
    "IMDB-B": "time+hks",
}


class PathTooShortError(DataFormatError):
    pass


# -- truncated tensor algebra over R^2, levels 0..DEPTH --------------------------


def zero() -> list:
    return [np.zeros((DIM,) * k) for k in range(DEPTH + 1)]


def unit() -> list:
    t = zero()
    t[0] = np.array(1.0)
    return t


def tensor_mul(a: list, b: list) -> list:
    out = zero()
    for i in range(DEPTH + 1):
        for j in range(DEPTH + 1 - i):
            out[i + j] = out[i + j] + np.multiply.outer(a[i], b[j])
    return out


def _scale(a: list, c: float) -> list:
    return [c * x for x in a]


def _add(a: list, b: list) -> list:
    return [x + y for x, y in zip(a, b)]


def tensor_exp(x: list) -> list:
    if abs(float(x[0])) > 0:
        raise ValueError("tensor_exp expects zero scalar part")
    out = unit()
    power = unit()
    for n in range(1, DEPTH + 1):
        power = tensor_mul(power, x)
        out = _add(out, _scale(power, 1.0 / factorial(n)))
    return out


def tensor_log(a: list) -> list:
    if abs(float(a[0]) - 1.0) > 1e-12:
        raise ValueError("tensor_log expects unit scalar part")
    y = list(a)
    y[0] = np.array(0.0)
    out = zero()
    power = unit()
    for n in range(1, DEPTH + 1):
        power = tensor_mul(power, y)
        out = _add(out, _scale(power, (-1.0) ** (n + 1) / n))
    return out


def segment_signature(increment) -> list:
    v = np.asarray(increment, dtype=float)
    out = unit()
    power = np.array(1.0)
    for k in range(1, DEPTH + 1):
        power = np.multiply.outer(power, v)
        out[k] = power / factorial(k)
    return out


def signature(path) -> list:
    """Truncated signature of a piecewise-linear path via Chen's relation."""
    pts = np.asarray(path, dtype=float).reshape(-1, DIM)
    if len(pts) < 1:
        raise PathTooShortError("empty path")
    sig = unit()
    for inc in np.diff(pts, axis=0):
        sig = tensor_mul(sig, segment_signature(inc))
    return sig


# -- Lyndon projection -----------------------------------------------------------


def _level(word) -> int:
    return 1 if isinstance(word, int) else _level(word[0]) + _level(word[1])


def _expand(word) -> np.ndarray:
    if isinstance(word, int):
        e = np.zeros(DIM)
        e[word - 1] = 1.0
        return e
    a, b = _expand(word[0]), _expand(word[1])
    return np.multiply.outer(a, b) - np.multiply.outer(b, a)


def _projectors():
    mats = {}
    for k in range(1, DEPTH + 1):
        cols = [_expand(w).ravel() for w in LYNDON_BASIS if _level(w) == k]
        mats[k] = np.stack(cols, axis=1)
    return mats


_BRACKETS = _projectors()


def lyndon_coordinates(log_tensor: list) -> np.ndarray:
    """Coordinates of a Lie element in the Lyndon basis, level by level."""
    out = []
    for k in range(1, DEPTH + 1):
        coef, *_ = np.linalg.lstsq(_BRACKETS[k], log_tensor[k].ravel(), rcond=None)
        out.append(coef)
    return np.concatenate(out)


def log_signature(path) -> np.ndarray:
    """8 Lyndon coordinates of the level-4 log-signature of a planar path."""
    return lyndon_coordinates(tensor_log(signature(path)))


# -- eigenvalue paths and HKS ----------------------------------------------------


def eigen_path(s: SpectralData, mode: str = "delay") -> np.ndarray:
    lam = np.asarray(s.eigenvalues, dtype=float)
    n = len(lam)
    if n < 2:
        raise PathTooShortError(f"need at least 2 eigenvalues, got {n}")
    if mode == "delay":
        return np.stack([lam[:-1], lam[1:]], axis=1)
    if mode == "time":
        return np.stack([lam, 2.0 * np.arange(n) / (n - 1)], axis=1)
    raise ValueError(f"unknown path mode {mode!r}")


def hks_extrema(s: SpectralData) -> np.ndarray:
    """(max, min) of the heat kernel signature at t=10, then at t=0.1."""
    a = wavelet_signature(s, heat_kernel(10.0))
    b = wavelet_signature(s, heat_kernel(0.1))
    return np.array([a.max(), a.min(), b.max(), b.min()])


def profile_for(dataset: str) -> str:
    return PROFILES.get(dataset.upper(), "delay")


def feature_dim(profile: str) -> int:
    return 12 if profile.endswith("+hks") else 8


def feature_vector(s: SpectralData, profile: str = "delay") -> np.ndarray:
    if profile == "delay":
        return log_signature(eigen_path(s, "delay"))
    if profile == "time+hks":
        return np.concatenate([log_signature(eigen_path(s, "time")), hks_extrema(s)])
    raise ValueError(f"unknown feature profile {profile!r}")
