"""Extended persistence of vertex functions on graphs, with gradients.

The extended barcode of ``f`` on ``G`` is read off the ordinary sublevel-set
persistence of the cone ``G * omega`` filtered by

    f_R(sigma)          = max_{v in sigma} f(v)
    f_R(sigma + omega)  = 2R - min_{v in sigma} f(v)
    f_R(omega)          = -R

with ``R > sup |f|``. A cone pair ``(b, d)`` lands in the ordinary part when
``d < R``, in the extended part when ``b < R < d`` (death reflected to
``2R - d``) and in the relative part when ``R < b`` (both reflected).

Every simplex value equals ``sign * f(v) + offset`` for one critical vertex
``v``: the argmax for uncone simplices and the argmin for coned ones. Points of
the extended diagram inherit that attribution, which gives the derivative of
each coordinate with respect to ``f``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DegenerateThresholdError, NonGenericError
from .graphs import Graph

QUADRANTS = ("ord0", "ext0", "ext1", "rel1")
THRESHOLD_ATOL = 1e-9


class DiagramPoint(NamedTuple):
    birth: float
    death: float
    birth_attr: tuple  # (vertex, sign)
    death_attr: tuple


@dataclass(frozen=True)
class ConeComplex:
    """Cone of a graph, simplices listed in filtration order.

    ``simplices[i]`` is a vertex tuple where the apex is ``n_vertices``;
    ``critical[i]``, ``sign[i]`` and ``offset[i]`` express
    ``values[i] = sign[i] * f[critical[i]] + offset[i]`` (the apex alone has
    critical vertex ``-1``).
    """

    n_vertices: int
    R: float
    simplices: list
    dims: np.ndarray
    values: np.ndarray
    critical: np.ndarray
    sign: np.ndarray
    offset: np.ndarray

    @property
    def apex(self) -> int:
        return self.n_vertices

    def __len__(self):
        return len(self.simplices)

    def boundary(self, i: int) -> list:
        s = self.simplices[i]
        if len(s) == 1:
            return []
        return [s[:k] + s[k + 1 :] for k in range(len(s))]


def _argext(f, u, v, pick_max):
    # ties go to the lower vertex index
    fu, fv = f[u], f[v]
    u_wins = (fu > fv) if pick_max else (fu < fv)
    v_wins = (fv > fu) if pick_max else (fv < fu)
    return np.where(u_wins, u, np.where(v_wins, v, np.minimum(u, v)))


def default_radius(f) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.max(np.abs(f))) + 1.0 if f.size else 1.0


def build_cone(g: Graph, f, R: float | None = None) -> ConeComplex:
    f = np.asarray(f, dtype=float)
    n = g.n_vertices
    if f.shape != (n,):
        raise ValueError(f"vertex function has shape {f.shape}, expected ({n},)")
    if not np.all(np.isfinite(f)):
        raise ValueError("vertex function must be finite")
    R = default_radius(f) if R is None else float(R)
    if n and R <= np.max(np.abs(f)):
        raise ValueError("R must exceed sup |f|")
    apex = n
    u, v = (g.edges[:, 0], g.edges[:, 1]) if g.n_edges else (np.zeros(0, int), np.zeros(0, int))
    e = len(u)
    verts = np.arange(n)

    hi = _argext(f, u, v, True) if e else u
    lo = _argext(f, u, v, False) if e else u

    # simplex columns: vertices, apex, edges, cone edges, triangles
    dims = np.concatenate([np.zeros(n + 1, int), np.ones(e + n, int), np.full(e, 2)])
    values = np.concatenate([f, [-R], f[hi] if e else [], 2 * R - f, 2 * R - f[lo] if e else []])
    critical = np.concatenate([verts, [-1], hi, verts, lo]).astype(np.int64)
    sign = np.concatenate([np.ones(n), [0.0], np.ones(e), -np.ones(n), -np.ones(e)])
    offset = np.concatenate([np.zeros(n), [-R], np.zeros(e), np.full(n, 2 * R), np.full(e, 2 * R)])
    c0 = np.concatenate([verts, [apex], u, verts, u])
    c1 = np.concatenate([np.full(n + 1, -1), v, np.full(n, apex), v])
    c2 = np.concatenate([np.full(n + 1 + e + n, -1), np.full(e, apex)])

    order = np.lexsort((c2, c1, c0, dims, values))
    simplices = [
        (a,) if b < 0 else ((a, b) if c < 0 else (a, b, c))
        for a, b, c in zip(c0[order].tolist(), c1[order].tolist(), c2[order].tolist())
    ]
    return ConeComplex(n, R, simplices, dims[order], values[order], critical[order], sign[order], offset[order])


@dataclass(frozen=True)
class ConeBarcode:
    """Finite pairs of the reduced ordinary barcode of a cone filtration.

    Pairs are given as filtration indices into the generating ``ConeComplex``.
    """

    complex: ConeComplex
    degree: np.ndarray
    birth_index: np.ndarray
    death_index: np.ndarray

    @property
    def births(self):
        return self.complex.values[self.birth_index]

    @property
    def deaths(self):
        return self.complex.values[self.death_index]

    def intervals(self, degree: int) -> list:
        m = self.degree == degree
        return list(zip(self.births[m].tolist(), self.deaths[m].tolist()))


def _reduce(columns: dict, order: list, pivots: dict, reduced: dict, pairs: list, cleared: set):
    # columns are int bitsets over filtration indices; pivot = highest set bit
    for j in order:
        if j in cleared:
            continue
        col = columns[j]
        while col:
            low = col.bit_length() - 1
            k = pivots.get(low)
            if k is None:
                pivots[low] = j
                reduced[j] = col
                pairs.append((low, j))
                break
            col ^= reduced[k]


def ordinary_persistence(c: ConeComplex) -> ConeBarcode:
    """Reduced persistence pairs of ``c`` over GF(2) by column reduction.

    Columns are processed top dimension first; every edge that is the pivot of
    a reduced triangle column is positive, so its column is cleared without
    being reduced (twist). The single unbounded H0 class is dropped.
    """
    index = {s: i for i, s in enumerate(c.simplices)}
    columns2, columns1 = {}, {}
    order2, order1 = [], []
    for j, s in enumerate(c.simplices):
        if len(s) == 3:
            a, b, w = s
            columns2[j] = (1 << index[(a, b)]) | (1 << index[(a, w)]) | (1 << index[(b, w)])
            order2.append(j)
        elif len(s) == 2:
            columns1[j] = (1 << index[(s[0],)]) | (1 << index[(s[1],)])
            order1.append(j)

    pivots: dict = {}
    reduced: dict = {}
    pairs2: list = []
    _reduce(columns2, order2, pivots, reduced, pairs2, set())
    cleared = {low for low, _ in pairs2}
    pairs1: list = []
    _reduce(columns1, order1, pivots, reduced, pairs1, cleared)

    pairs = [(0, b, d) for b, d in pairs1] + [(1, b, d) for b, d in pairs2]
    pairs.sort(key=lambda t: (t[0], t[1]))
    arr = np.array(pairs, dtype=np.int64).reshape(-1, 3)
    return ConeBarcode(c, arr[:, 0], arr[:, 1], arr[:, 2])


class ExtendedDiagram:
    """The four barcodes Ord0, Ext0, Ext1, Rel1 with vertex attribution.

    Each quadrant stores arrays ``birth``, ``death``, ``birth_vertex``,
    ``death_vertex``, ``birth_sign``, ``death_sign``, ``birth_offset`` and
    ``death_offset`` such that ``birth == birth_sign * f[birth_vertex] +
    birth_offset`` (likewise for deaths).
    """

    FIELDS = ("birth", "death", "birth_vertex", "death_vertex", "birth_sign", "death_sign", "birth_offset", "death_offset")

    def __init__(self, quadrants: dict, n_vertices: int, R: float = float("nan"), generic: bool = True):
        self.quadrants = {}
        for q in QUADRANTS:
            data = quadrants.get(q, {})
            self.quadrants[q] = {
                k: np.asarray(data.get(k, []), dtype=np.int64 if k.endswith("vertex") else float)
                for k in self.FIELDS
            }
        self.n_vertices = n_vertices
        self.R = R
        self.generic = generic

    def __getitem__(self, q: str) -> np.ndarray:
        """``(P, 2)`` array of (birth, death) for a quadrant."""
        d = self.quadrants[q]
        return np.stack([d["birth"], d["death"]], axis=1).reshape(-1, 2)

    def __len__(self):
        return sum(len(self.quadrants[q]["birth"]) for q in QUADRANTS)

    def attribution_key(self) -> bytes:
        """Pairing pattern without coordinates; equal keys mean equal local coordinates."""
        parts = []
        for q in QUADRANTS:
            d = self.quadrants[q]
            parts.append(np.stack([d["birth_vertex"], d["death_vertex"]]).tobytes() + b"|")
        return b"".join(parts)

    def count(self, q: str) -> int:
        return len(self.quadrants[q]["birth"])

    def points(self, q: str) -> Iterator[DiagramPoint]:
        d = self.quadrants[q]
        for i in range(len(d["birth"])):
            yield DiagramPoint(
                float(d["birth"][i]),
                float(d["death"][i]),
                (int(d["birth_vertex"][i]), int(d["birth_sign"][i])),
                (int(d["death_vertex"][i]), int(d["death_sign"][i])),
            )

    def reconstruct(self, f) -> "ExtendedDiagram":
        """Same pairing re-evaluated at another vertex function ``f``."""
        f = np.asarray(f, dtype=float)
        out = {}
        for q, d in self.quadrants.items():
            nd = dict(d)
            for end in ("birth", "death"):
                vert = d[f"{end}_vertex"]
                nd[end] = d[f"{end}_sign"] * f[vert] + d[f"{end}_offset"] if len(vert) else d[end]
            out[q] = nd
        return ExtendedDiagram(out, self.n_vertices, self.R, self.generic)

    def to_text(self) -> str:
        buf = io.StringIO()
        for q in QUADRANTS:
            for p in self.points(q):
                buf.write(f"{q} {p.birth!r} {p.death!r} {p.birth_attr[0]} {p.birth_attr[1]} {p.death_attr[0]} {p.death_attr[1]}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, n_vertices: int = -1) -> "ExtendedDiagram":
        quadrants = {q: {k: [] for k in cls.FIELDS} for q in QUADRANTS}
        for lineno, ln in enumerate(text.splitlines(), 1):
            parts = ln.split()
            if not parts:
                continue
            if len(parts) != 7 or parts[0] not in QUADRANTS:
                raise ValueError(f"line {lineno}: malformed diagram point {ln!r}")
            d = quadrants[parts[0]]
            d["birth"].append(float(parts[1]))
            d["death"].append(float(parts[2]))
            d["birth_vertex"].append(int(parts[3]))
            d["birth_sign"].append(int(parts[4]))
            d["death_vertex"].append(int(parts[5]))
            d["death_sign"].append(int(parts[6]))
            d["birth_offset"].append(0.0)
            d["death_offset"].append(0.0)
        return cls(quadrants, n_vertices)

    def __repr__(self):
        counts = ", ".join(f"{q}={self.count(q)}" for q in QUADRANTS)
        return f"ExtendedDiagram({counts})"


def decode(barcode: ConeBarcode, R: float | None = None) -> ExtendedDiagram:
    """Split cone pairs into the four extended quadrants."""
    c = barcode.complex
    R = c.R if R is None else float(R)
    quadrants = {q: {k: [] for k in ExtendedDiagram.FIELDS} for q in QUADRANTS}

    def coord(idx):
        value = c.values[idx]
        if value < R:
            return value, c.critical[idx], c.sign[idx], c.offset[idx]
        # reflect t -> 2R - t
        return 2 * R - value, c.critical[idx], -c.sign[idx], 2 * R - c.offset[idx]

    for deg, bi, di in zip(barcode.degree.tolist(), barcode.birth_index.tolist(), barcode.death_index.tolist()):
        b, d = c.values[bi], c.values[di]
        if abs(b - R) <= THRESHOLD_ATOL or abs(d - R) <= THRESHOLD_ATOL:
            raise DegenerateThresholdError(f"pair ({b}, {d}) touches R = {R}")
        if d < R:
            kind = "ord"
        elif b < R:
            kind = "ext"
        else:
            kind = "rel"
        q = f"{kind}{deg}"
        if q not in quadrants:
            continue
        if kind != "ext" and b == d:
            continue
        bval, bv, bs, bo = coord(bi)
        dval, dv, ds, do = coord(di)
        rec = quadrants[q]
        rec["birth"].append(bval)
        rec["death"].append(dval)
        rec["birth_vertex"].append(bv)
        rec["death_vertex"].append(dv)
        rec["birth_sign"].append(bs)
        rec["death_sign"].append(ds)
        rec["birth_offset"].append(bo)
        rec["death_offset"].append(do)
    return ExtendedDiagram(quadrants, c.n_vertices, R)


def is_generic(f) -> bool:
    f = np.asarray(f)
    return len(np.unique(f)) == len(f)


def extended_persistence(g: Graph, f, R: float | None = None) -> ExtendedDiagram:
    cone = build_cone(g, f, R)
    diagram = decode(ordinary_persistence(cone))
    diagram.generic = is_generic(f)
    return diagram


def diagram_gradient(d: ExtendedDiagram, grad_points: dict, strict: bool = False) -> np.ndarray:
    """Pull cotangents on diagram coordinates back to the vertex function.

    ``grad_points[q]`` is a ``(P, 2)`` array of cotangents for the (birth,
    death) coordinates of quadrant ``q``; missing quadrants count as zero. With
    ``strict=True`` a diagram computed from tied vertex values raises
    NonGenericError instead of returning the tie-broken one-sided gradient.
    """
    if strict and not d.generic:
        raise NonGenericError("vertex function has tied values")
    grad = np.zeros(d.n_vertices)
    for q, cot in grad_points.items():
        cot = np.asarray(cot, dtype=float).reshape(-1, 2)
        rec = d.quadrants[q]
        if len(cot) != len(rec["birth"]):
            raise ValueError(f"{q}: {len(cot)} cotangents for {len(rec['birth'])} points")
        if not len(cot):
            continue
        np.add.at(grad, rec["birth_vertex"], rec["birth_sign"] * cot[:, 0])
        np.add.at(grad, rec["death_vertex"], rec["death_sign"] * cot[:, 1])
    return grad
