import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_function, random_graph
from oracles import bottleneck_upper_bound, same_diagrams
from wavelet_ph.errors import DegenerateThresholdError, NonGenericError
from wavelet_ph.graphs import Graph
from wavelet_ph.oracle import oracle_extended_persistence
from wavelet_ph.persistence import (
    QUADRANTS,
    ExtendedDiagram,
    build_cone,
    decode,
    diagram_gradient,
    extended_persistence,
    ordinary_persistence,
)

PATH3 = Graph.from_edges(3, [(0, 1), (1, 2)])
VEE = Graph.from_edges(3, [(0, 2), (1, 2)])
C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


def graph_and_function(n_max=8):
    def make(seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n_max)
        return g, random_function(rng, g.n_vertices)

    return st.integers(0, 2**32 - 1).map(make)


def generic_pair(n_max=8):
    def make(seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n_max, 2)
        return g, rng.normal(size=g.n_vertices)

    return st.integers(0, 2**32 - 1).map(make)


def rows(d, q):
    return sorted(map(tuple, d[q].tolist()))


# -- cone ----------------------------------------------------------------------


def test_single_vertex_cone():
    c = build_cone(Graph.from_edges(1, []), np.array([0.0]))
    assert c.R == 1.0
    got = dict(zip(c.simplices, c.values.tolist()))
    assert got == {(1,): -1.0, (0,): 0.0, (0, 1): 2.0}


def test_single_edge_cone_triangle():
    c = build_cone(Graph.from_edges(2, [(0, 1)]), np.array([0.0, 1.0]))
    assert len(c) == 1 + 2 + 1 + 2 + 1
    tri = [v for s, v in zip(c.simplices, c.values) if len(s) == 3]
    assert tri == [2 * c.R]


@given(graph_and_function(9))
def test_cone_faces_precede(gf):
    g, f = gf
    c = build_cone(g, f)
    assert len(c) == (g.n_vertices + 1) + (g.n_edges + g.n_vertices) + g.n_edges
    pos = {s: i for i, s in enumerate(c.simplices)}
    for i, s in enumerate(c.simplices):
        for face in c.boundary(i):
            assert c.values[pos[face]] <= c.values[i]
            assert pos[face] < i
    vals = c.sign * np.where(c.critical >= 0, f[np.maximum(c.critical, 0)], 0) + c.offset
    assert np.allclose(vals, c.values)


def test_cone_rejects_small_radius():
    with pytest.raises(ValueError):
        build_cone(PATH3, np.array([0.0, 1.0, 2.0]), R=2.0)


# -- ordinary persistence and decode --------------------------------------------


def test_two_isolated_vertices():
    c = build_cone(Graph.from_edges(2, []), np.array([0.0, 1.0]))
    assert c.R == 2.0
    bars = ordinary_persistence(c)
    assert sorted(bars.intervals(0)) == [(0.0, 4.0), (1.0, 3.0)]
    assert (1.0, 2 * c.R - 1) in bars.intervals(0)
    d = decode(bars)
    assert rows(d, "ext0") == [(0.0, 0.0), (1.0, 1.0)]


def test_c4_single_h1_pair():
    bars = ordinary_persistence(build_cone(C4, np.array([0.0, 1.0, 2.0, 3.0])))
    (b, d), = [(b, d) for b, d in bars.intervals(1) if d > b]
    assert b < bars.complex.R < d


def test_empty_graph():
    bars = ordinary_persistence(build_cone(Graph.from_edges(0, []), np.zeros(0)))
    assert len(bars.degree) == 0
    assert len(extended_persistence(Graph.from_edges(0, []), np.zeros(0))) == 0


def test_decode_examples():
    d = extended_persistence(Graph.from_edges(1, []), np.array([2.5]))
    assert rows(d, "ext0") == [(2.5, 2.5)] and len(d) == 1

    d = extended_persistence(PATH3, np.array([0.0, 1.0, 2.0]))
    assert rows(d, "ext0") == [(0.0, 2.0)] and len(d) == 1

    d = extended_persistence(VEE, np.array([0.0, 0.0, 1.0]))
    assert rows(d, "ord0") == [(0.0, 1.0)]
    assert rows(d, "ext0") == [(0.0, 1.0)]
    assert d.count("ext1") == d.count("rel1") == 0

    d = extended_persistence(C4, np.array([0.0, 1.0, 2.0, 3.0]))
    assert rows(d, "ext1") == [(3.0, 0.0)]
    assert rows(d, "ext0") == [(0.0, 3.0)]


def test_rel1_example():
    d = extended_persistence(VEE, np.array([1.0, 1.0, 0.0]))
    assert rows(d, "rel1") == [(1.0, 0.0)]


def test_degenerate_threshold():
    c = build_cone(PATH3, np.array([0.0, 1.0, 2.0]))
    bars = ordinary_persistence(c)
    with pytest.raises(DegenerateThresholdError):
        decode(bars, R=float(bars.deaths[0]))
    with pytest.raises(DegenerateThresholdError):
        decode(bars, R=float(bars.births[0]))


def test_constant_function():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)])
    d = extended_persistence(g, np.full(4, 0.7))
    assert np.allclose(d["ext0"], [[0.7, 0.7]], atol=1e-12)
    assert np.allclose(d["ext1"], np.full((g.cycle_rank(), 2), 0.7), atol=1e-12)
    assert d.count("ord0") == d.count("rel1") == 0


# -- oracle and invariants -------------------------------------------------------


def test_oracle_small_examples():
    assert rows(oracle_extended_persistence(Graph.from_edges(2, [(0, 1)]), np.zeros(2)), "ext0") == [(0.0, 0.0)]
    for g, f in [(PATH3, [0, 1, 2]), (VEE, [0, 0, 1]), (C4, [0, 1, 2, 3])]:
        f = np.array(f, dtype=float)
        assert same_diagrams(extended_persistence(g, f), oracle_extended_persistence(g, f))


@given(graph_and_function(8))
def test_matches_oracle(gf):
    g, f = gf
    assert same_diagrams(extended_persistence(g, f), oracle_extended_persistence(g, f))


@given(graph_and_function(10))
def test_counting(gf):
    g, f = gf
    d = extended_persistence(g, f)
    assert d.count("ext0") == g.n_components()
    assert d.count("ext1") == g.cycle_rank()
    for q in ("ord0", "rel1"):
        assert np.all(d[q][:, 0] != d[q][:, 1])


@given(graph_and_function(10), st.floats(-5, 5))
def test_shift_equivariance(gf, c):
    g, f = gf
    a, b = extended_persistence(g, f), extended_persistence(g, f + c)
    for q in QUADRANTS:
        assert np.allclose(sorted(map(tuple, a[q] + c)), sorted(map(tuple, b[q])), atol=1e-9) if a.count(q) else b.count(q) == 0


@given(graph_and_function(10))
def test_radius_independence(gf):
    g, f = gf
    r = np.max(np.abs(f)) if len(f) else 0.0
    assert same_diagrams(extended_persistence(g, f, R=r + 1), extended_persistence(g, f, R=r + 10))


@given(graph_and_function(10))
def test_reconstruction_from_attribution(gf):
    g, f = gf
    d = extended_persistence(g, f)
    for q in QUADRANTS:
        rec = d.quadrants[q]
        assert np.allclose(rec["birth"], rec["birth_sign"] * f[rec["birth_vertex"]] + rec["birth_offset"], atol=1e-12)
        assert np.allclose(rec["death"], rec["death_sign"] * f[rec["death_vertex"]] + rec["death_offset"], atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_stability(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 5, 2)
    f = rng.normal(size=g.n_vertices)
    delta = rng.normal(scale=0.05, size=g.n_vertices)
    a, b = extended_persistence(g, f), extended_persistence(g, f + delta)
    if max(a.count(q) + b.count(q) for q in QUADRANTS) > 8:
        return
    assert bottleneck_upper_bound(a, b) <= np.max(np.abs(delta)) + 1e-12


def test_text_round_trip():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 9, 6)
    f = rng.normal(size=g.n_vertices)
    d = extended_persistence(g, f)
    text = d.to_text()
    assert all(len(line.split()) == 7 for line in text.splitlines())
    back = ExtendedDiagram.from_text(text, g.n_vertices)
    assert same_diagrams(d, back, atol=0)
    assert back.to_text() == text


# -- gradients ---------------------------------------------------------------------


def test_ext0_gradient_indicators():
    rng = np.random.default_rng(1)
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    f = rng.normal(size=5)
    d = extended_persistence(g, f)
    grad_b = diagram_gradient(d, {"ext0": np.array([[1.0, 0.0]])})
    grad_d = diagram_gradient(d, {"ext0": np.array([[0.0, 1.0]])})
    assert np.array_equal(grad_b, np.eye(5)[np.argmin(f)])
    assert np.array_equal(grad_d, np.eye(5)[np.argmax(f)])


def test_zero_cotangent():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 8, 4)
    d = extended_persistence(g, rng.normal(size=g.n_vertices))
    zero = {q: np.zeros((d.count(q), 2)) for q in QUADRANTS}
    assert np.all(diagram_gradient(d, zero) == 0)


def test_strict_non_generic():
    d = extended_persistence(VEE, np.array([0.0, 0.0, 1.0]))
    assert not d.generic
    with pytest.raises(NonGenericError):
        diagram_gradient(d, {}, strict=True)


def _loss(g, f, weights):
    d = extended_persistence(g, f)
    return sum(float(np.sum(d[q] * weights[q][: d.count(q)])) for q in QUADRANTS), d


@given(generic_pair(9))
def test_gradient_matches_finite_differences(gf):
    g, f = gf
    rng = np.random.default_rng(0)
    weights = {q: rng.normal(size=(64, 2)) for q in QUADRANTS}
    _, d = _loss(g, f, weights)
    grad = diagram_gradient(d, {q: weights[q][: d.count(q)] for q in QUADRANTS})
    h = 1e-5
    key = d.attribution_key()
    for v in range(g.n_vertices):
        e = np.eye(g.n_vertices)[v] * h
        lp, dp = _loss(g, f + e, weights)
        lm, dm = _loss(g, f - e, weights)
        if dp.attribution_key() != key or dm.attribution_key() != key:
            continue  # stencil crosses a pairing change
        fd = (lp - lm) / (2 * h)
        assert abs(fd - grad[v]) <= 1e-4 * max(1.0, abs(fd))


def test_unattributed_vertex_perturbation():
    # vertex 1 sits in the middle of a path: it is not critical
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    f = np.array([0.0, 0.5, 1.0])
    a = extended_persistence(g, f)
    b = extended_persistence(g, f + np.array([0.0, 1e-3, 0.0]))
    assert 1 not in np.concatenate([a.quadrants[q][k] for q in QUADRANTS for k in ("birth_vertex", "death_vertex")])
    assert same_diagrams(a, b, atol=0)
