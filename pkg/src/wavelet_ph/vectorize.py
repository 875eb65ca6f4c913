"""Persistence images of extended diagrams.

Diagram coordinates are first mapped through a fixed affine rescaling, then
each point ``(b, d)`` is placed at ``(b, d - b)`` and contributes a Gaussian
of width ``SIGMA`` weighted by ``sin^2(pi/2 * min(p / SIGMA, 1))``. The grid
has 20 nodes per axis spaced exactly ``SIGMA`` apart on ``[-SIGMA, 1 + SIGMA]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .persistence import ExtendedDiagram

SIGMA = 1.0 / 17.0
RESOLUTION = 20
GRID = -SIGMA + SIGMA * np.arange(RESOLUTION)
CHANNELS = (("ord0", "ext0"), ("rel1",), ("ext1",))


@dataclass(frozen=True)
class ImageSpec:
    sigma: float = SIGMA
    resolution: int = RESOLUTION

    @property
    def grid(self) -> np.ndarray:
        return -self.sigma + self.sigma * np.arange(self.resolution)


@dataclass(frozen=True)
class AffineRescale:
    scale: float
    shift: float

    def __call__(self, x):
        return self.scale * np.asarray(x, dtype=float) + self.shift


def fit_rescale(values) -> AffineRescale:
    """Affine map sending min(values) to 0 and max(values) to 1."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        raise NumericalError("cannot rescale a constant function")
    scale = 1.0 / (hi - lo)
    return AffineRescale(scale, -lo * scale)


def weight(p, sigma: float = SIGMA):
    return np.sin(0.5 * np.pi * np.minimum(np.asarray(p, dtype=float) / sigma, 1.0)) ** 2


def weight_grad(p, sigma: float = SIGMA):
    p = np.asarray(p, dtype=float)
    a = 0.5 * np.pi / sigma
    return np.where(p < sigma, a * np.sin(2 * a * p), 0.0)


def persistence_image(points, spec: ImageSpec = ImageSpec()):
    """Image of a multiset of (birth, death) points with ``death >= birth``.

    Returns ``(image, backward)`` where ``image[i, j]`` is sampled at
    persistence ``grid[i]`` and birth ``grid[j]``, and ``backward(G)`` maps an
    image cotangent ``G`` to the ``(P, 2)`` cotangent on (birth, death).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    grid = spec.grid
    s2 = spec.sigma**2
    birth = pts[:, 0]
    pers = pts[:, 1] - pts[:, 0]
    w = weight(pers, spec.sigma)
    dx = grid[None, :] - birth[:, None]
    dy = grid[None, :] - pers[:, None]
    gx = np.exp(-0.5 * dx**2 / s2)
    gy = np.exp(-0.5 * dy**2 / s2)
    image = np.einsum("p,pi,pj->ij", w, gy, gx)

    def backward(g):
        g = np.asarray(g, dtype=float)
        if not len(pts):
            return np.zeros((0, 2))
        gy_g = gy @ g  # (P, res) contracted over persistence rows
        gx_g = gx @ g.T  # (P, res) contracted over birth columns
        d_w = np.sum(gy_g * gx, axis=1)
        d_birth = w * np.sum(gy_g * gx * dx, axis=1) / s2
        d_pers = w * np.sum(gx_g * gy * dy, axis=1) / s2 + d_w * weight_grad(pers, spec.sigma)
        return np.stack([d_birth - d_pers, d_pers], axis=1)

    return image, backward


def vectorise_diagram(d: ExtendedDiagram, rescale: AffineRescale, spec: ImageSpec = ImageSpec()):
    """Three-channel image (Ord0+Ext0, Rel1, Ext1) and its backward map.

    Points are reoriented to ``(min, max)`` before imaging so that persistence
    is non-negative. ``backward(G)`` takes a ``(3, res, res)`` cotangent and
    returns per-quadrant ``(P, 2)`` cotangents in the original (unscaled)
    diagram coordinates, ready for :func:`persistence.diagram_gradient`.
    """
    images = []
    parts = []
    for quads in CHANNELS:
        raw = np.vstack([d[q] for q in quads]) if quads else np.zeros((0, 2))
        scaled = rescale(raw)
        swapped = scaled[:, 0] > scaled[:, 1]
        oriented = np.where(swapped[:, None], scaled[:, ::-1], scaled)
        img, back = persistence_image(oriented, spec)
        images.append(img)
        parts.append((quads, [d.count(q) for q in quads], swapped, back))
    stack = np.stack(images)

    def backward(g):
        g = np.asarray(g, dtype=float)
        out = {}
        for c, (quads, counts, swapped, back) in enumerate(parts):
            cot = back(g[c])
            cot = np.where(swapped[:, None], cot[:, ::-1], cot) * rescale.scale
            start = 0
            for q, n in zip(quads, counts):
                out[q] = cot[start : start + n]
                start += n
        return out

    return stack, backward


def to_csv(image: np.ndarray) -> str:
    """Row-major CSV with 6 significant digits; channels stacked vertically."""
    rows = np.asarray(image).reshape(-1, np.asarray(image).shape[-1])
    return "\n".join(",".join(f"{v:.6g}" for v in row) for row in rows) + "\n"


def to_pgm(image: np.ndarray) -> bytes:
    """Binary 8-bit PGM of a single channel scaled to its own maximum."""
    img = np.asarray(image, dtype=float)
    top = img.max()
    scaled = np.zeros_like(img) if top <= 0 else img / top
    data = np.round(255 * np.clip(scaled, 0, 1)).astype(np.uint8)[::-1]
    h, w = data.shape
    return f"P5\n{w} {h}\n255\n".encode() + data.tobytes()
