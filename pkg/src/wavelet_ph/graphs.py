"""Simple undirected graphs and the TUDataset text format."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0 .. n_vertices - 1``.

    ``edges`` is an ``(E, 2)`` integer array with ``u < v`` in every row and
    rows sorted lexicographically, so two graphs with the same edge set
    compare equal.
    """

    n_vertices: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.n_vertices:
                raise ValueError("edge endpoint out of range")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @classmethod
    def from_edges(cls, n_vertices, edges):
        return cls(int(n_vertices), np.asarray(list(edges), dtype=np.int64).reshape(-1, 2))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_vertices, self.n_vertices))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def n_components(self) -> int:
        parent = list(range(self.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        count = self.n_vertices
        for u, v in self.edges.tolist():
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
                count -= 1
        return count

    def cycle_rank(self) -> int:
        return self.n_edges - self.n_vertices + self.n_components()

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n_vertices == other.n_vertices and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n_vertices, self.edges.tobytes()))


@dataclass(frozen=True)
class Dataset:
    name: str
    graphs: tuple
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        labels = np.asarray(self.labels, dtype=np.int64)
        if len(labels) != len(self.graphs):
            raise ValueError("one label per graph required")
        if len(labels) and not set(np.unique(labels).tolist()) <= {0, 1}:
            raise ValueError("labels must be 0/1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.graphs)

    def subset(self, indices) -> "Dataset":
        idx = list(indices)
        return Dataset(self.name, [self.graphs[i] for i in idx], self.labels[idx])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.n_vertices for g in self.graphs], dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.graphs == other.graphs
            and np.array_equal(self.labels, other.labels)
        )


def disjoint_union_offsets(d: Dataset) -> np.ndarray:
    """Start index of each graph's block in the stacked vertex vector."""
    sizes = d.sizes
    return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64) if len(sizes) else sizes


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise FileNotFoundError(f"missing TUDataset file: {path}")
    with open(path) as fh:
        return [ln.strip() for ln in fh]


def remap_labels(raw) -> np.ndarray:
    """Map raw graph labels onto {0, 1}; the smaller raw label becomes 0."""
    values = sorted(set(raw))
    if len(values) > 2:
        raise DataFormatError(f"expected a binary task, found labels {values}")
    lookup = {v: i for i, v in enumerate(values)}
    return np.array([lookup[v] for v in raw], dtype=np.int64)


def load_tudataset(root_path, name: str) -> Dataset:
    """Read ``<name>_A.txt``, ``_graph_indicator.txt`` and ``_graph_labels.txt``.

    ``root_path`` may either contain the three files directly or contain a
    ``<name>/`` subdirectory holding them. Node/edge labels and attributes are
    ignored.
    """
    root = Path(root_path)
    if (root / name).is_dir():
        root = root / name

    indicator_lines = _read_lines(root / f"{name}_graph_indicator.txt")
    label_lines = _read_lines(root / f"{name}_graph_labels.txt")
    edge_lines = _read_lines(root / f"{name}_A.txt")

    indicator = []
    for lineno, ln in enumerate(indicator_lines, 1):
        if not ln:
            continue
        try:
            indicator.append(int(ln))
        except ValueError:
            raise DataFormatError(f"{name}_graph_indicator.txt:{lineno}: not an integer: {ln!r}") from None
    raw_labels = []
    for lineno, ln in enumerate(label_lines, 1):
        if not ln:
            continue
        try:
            raw_labels.append(int(ln))
        except ValueError:
            raise DataFormatError(f"{name}_graph_labels.txt:{lineno}: not an integer: {ln!r}") from None

    n_graphs = len(raw_labels)
    indicator = np.asarray(indicator, dtype=np.int64)
    if len(indicator) and (indicator.min() < 1 or indicator.max() > n_graphs):
        raise DataFormatError(f"{name}_graph_indicator.txt references a graph id outside 1..{n_graphs}")
    if np.any(np.diff(indicator) < 0):
        raise DataFormatError(f"{name}_graph_indicator.txt: vertices are not grouped by graph")

    sizes = np.bincount(indicator - 1, minlength=n_graphs)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    edge_sets: list[set] = [set() for _ in range(n_graphs)]
    self_loops = 0
    for lineno, ln in enumerate(edge_lines, 1):
        if not ln:
            continue
        parts = ln.replace(",", " ").split()
        if len(parts) != 2:
            raise DataFormatError(f"{name}_A.txt:{lineno}: expected 'i, j', got {ln!r}")
        i, j = int(parts[0]) - 1, int(parts[1]) - 1
        if not (0 <= i < len(indicator) and 0 <= j < len(indicator)):
            raise DataFormatError(f"{name}_A.txt:{lineno}: vertex index out of range")
        gi = indicator[i] - 1
        if indicator[j] - 1 != gi:
            raise DataFormatError(f"{name}_A.txt:{lineno}: edge joins vertices of different graphs")
        if i == j:
            self_loops += 1
            continue
        u, v = i - starts[gi], j - starts[gi]
        edge_sets[gi].add((min(u, v), max(u, v)))
    if self_loops:
        log.warning("%s: dropped %d self-loop(s)", name, self_loops)

    graphs = [Graph.from_edges(int(sizes[g]), sorted(edge_sets[g])) for g in range(n_graphs)]
    return Dataset(name, graphs, remap_labels(raw_labels))


def save_tudataset(d: Dataset, root_path, raw_labels=None) -> Path:
    """Write ``d`` in the three-file TUDataset format (both edge directions)."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    labels = d.labels if raw_labels is None else raw_labels
    offsets = disjoint_union_offsets(d)
    with open(root / f"{d.name}_A.txt", "w") as fa, open(root / f"{d.name}_graph_indicator.txt", "w") as fi:
        for gi, (g, off) in enumerate(zip(d.graphs, offsets)):
            fi.writelines(f"{gi + 1}\n" for _ in range(g.n_vertices))
            for u, v in g.edges.tolist():
                fa.write(f"{u + off + 1}, {v + off + 1}\n{v + off + 1}, {u + off + 1}\n")
    with open(root / f"{d.name}_graph_labels.txt", "w") as fl:
        fl.writelines(f"{int(y)}\n" for y in labels)
    return root
