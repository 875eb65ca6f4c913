"""Brute-force extended persistence, used to cross-check the cone algorithm.

The extended module of a graph is sampled at its critical values ``c_1 < ... <
c_k``:

    H(G_{<=c_1}) -> ... -> H(G_{<=c_k}) = H(G, {}) -> H(G, G^{>=c_k}) -> ... -> H(G, G^{>=c_1}) = 0

For every pair of positions the rank of the induced map is computed from
explicit (relative) chain groups over GF(2) and interval multiplicities follow
by inclusion-exclusion on the rank function. Intended for small graphs only.
"""

from __future__ import annotations

import numpy as np

from .graphs import Graph
from .persistence import QUADRANTS, ExtendedDiagram, is_generic


def _rank(vectors) -> int:
    pivots: dict = {}
    for vec in vectors:
        while vec:
            top = vec.bit_length() - 1
            if top not in pivots:
                pivots[top] = vec
                break
            vec ^= pivots[top]
    return len(pivots)


def _kernel(columns: list) -> list:
    """Basis of the GF(2) kernel; ``columns`` are (image, label) bitset pairs."""
    pivots: dict = {}
    kernel = []
    for image, label in columns:
        while image:
            top = image.bit_length() - 1
            if top not in pivots:
                pivots[top] = (image, label)
                break
            pim, plab = pivots[top]
            image ^= pim
            label ^= plab
        if not image:
            kernel.append(label)
    return kernel


def _mask(indices) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def rank_function(g: Graph, f):
    """Critical values and ranks ``r[p][i][j]`` of the maps between positions.

    Positions are 1-based; ``r[p][i][i]`` is the Betti number at position ``i``.
    """
    f = np.asarray(f, dtype=float)
    crit = np.unique(f)
    k = len(crit)
    edges = g.edges.tolist()
    emax = [max(f[u], f[v]) for u, v in edges]
    emin = [min(f[u], f[v]) for u, v in edges]
    n = g.n_vertices

    # (X vertices, X edges, A vertices, A edges) per position
    spaces = [None]
    for c in crit:
        spaces.append(
            (
                [v for v in range(n) if f[v] <= c],
                [e for e in range(len(edges)) if emax[e] <= c],
                [],
                [],
            )
        )
    for c in crit[::-1]:
        spaces.append(
            (
                list(range(n)),
                list(range(len(edges))),
                [v for v in range(n) if f[v] >= c],
                [e for e in range(len(edges)) if emin[e] >= c],
            )
        )

    edge_bd = [(1 << u) | (1 << v) for u, v in edges]
    cycles = {0: [None], 1: [None]}
    trivial = {0: [None], 1: [None]}
    for xv, xe, av, ae in spaces[1:]:
        a_vmask = _mask(av)
        cycles[0].append([1 << v for v in xv])
        trivial[0].append([1 << v for v in av] + [edge_bd[e] for e in xe])
        cols = [(edge_bd[e] & ~a_vmask, 1 << e) for e in xe]
        cycles[1].append(_kernel(cols))
        trivial[1].append([1 << e for e in ae])

    size = 2 * k
    ranks = {}
    for p in (0, 1):
        r = np.zeros((size + 2, size + 2), dtype=np.int64)
        base = [0] + [_rank(trivial[p][j]) for j in range(1, size + 1)]
        for i in range(1, size + 1):
            for j in range(i, size + 1):
                r[i, j] = _rank(cycles[p][i] + trivial[p][j]) - base[j]
        ranks[p] = r
    return crit, ranks


def oracle_extended_persistence(g: Graph, f) -> ExtendedDiagram:
    f = np.asarray(f, dtype=float)
    crit, ranks = rank_function(g, f)
    k = len(crit)
    size = 2 * k
    quadrants = {q: {key: [] for key in ExtendedDiagram.FIELDS} for q in QUADRANTS}

    def vertex_of(value):
        return int(np.flatnonzero(f == value)[0])

    for p in (0, 1):
        r = ranks[p]
        for s in range(1, size + 1):
            for e in range(s, size + 1):
                mu = r[s, e] - r[s - 1, e] - r[s, e + 1] + r[s - 1, e + 1]
                if mu == 0:
                    continue
                if s <= k and e + 1 <= k:
                    kind, b, d = "ord", crit[s - 1], crit[e]
                elif s <= k:
                    kind, b, d = "ext", crit[s - 1], crit[2 * k - e - 1]
                else:
                    kind, b, d = "rel", crit[2 * k - s], crit[2 * k - e - 1]
                q = f"{kind}{p}"
                if q not in quadrants:
                    raise AssertionError(f"unexpected {q} interval on a graph")
                rec = quadrants[q]
                for _ in range(mu):
                    rec["birth"].append(b)
                    rec["death"].append(d)
                    rec["birth_vertex"].append(vertex_of(b))
                    rec["death_vertex"].append(vertex_of(d))
                    rec["birth_sign"].append(1)
                    rec["death_sign"].append(1)
                    rec["birth_offset"].append(0.0)
                    rec["death_offset"].append(0.0)
    return ExtendedDiagram(quadrants, g.n_vertices, generic=is_generic(f))
