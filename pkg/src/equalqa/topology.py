"""Benchmark instance generators: Chimera hardware graphs, SK Max-Cut graphs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import IsingModel, LengthMismatchError, as_spins

CELL_SIZE = 8
SHORE = 4


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    node_count: int
    edges: tuple[tuple[int, int, float], ...]
    inactive: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.node_count < 1:
            raise InvalidSpecError("node_count must be positive")
        seen = set()
        clean = []
        for i, j, w in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidSpecError(f"self-loop on node {i}")
            if i > j:
                i, j = j, i
            if not (0 <= i and j < self.node_count):
                raise InvalidSpecError(f"edge ({i}, {j}) outside [0, {self.node_count})")
            if (i, j) in seen:
                raise InvalidSpecError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            clean.append((i, j, float(w)))
        object.__setattr__(self, "edges", tuple(clean))
        object.__setattr__(self, "inactive", frozenset(int(q) for q in self.inactive))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def without_nodes(self, dead: Iterable[int]) -> Graph:
        """Drop every edge touching a dead node; node numbering is kept."""
        dead = frozenset(int(q) for q in dead)
        edges = tuple(e for e in self.edges if e[0] not in dead and e[1] not in dead)
        return Graph(self.node_count, edges, self.inactive | dead)


@dataclass(frozen=True)
class ChimeraSpec:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidSpecError(f"Chimera grid dimension must be >= 1, got {self.m!r}")

    @property
    def num_qubits(self) -> int:
        return CELL_SIZE * self.m * self.m

    @property
    def num_couplers(self) -> int:
        return 16 * self.m**2 + 8 * self.m * (self.m - 1)


def chimera_index(m: int, row: int, col: int, k: int) -> int:
    """Linear index of qubit ``k`` (0-3 left shore, 4-7 right) in cell (row, col)."""
    return CELL_SIZE * (row * m + col) + k


def chimera_graph(spec: ChimeraSpec | int, dead: Iterable[int] = ()) -> Graph:
    """Chimera C_m: an m x m grid of K_{4,4} cells.

    Left-shore qubits couple vertically to the same position in the cell below;
    right-shore qubits couple horizontally to the cell to the right.
    """
    if not isinstance(spec, ChimeraSpec):
        spec = ChimeraSpec(spec)
    m = spec.m
    edges = []
    for row in range(m):
        for col in range(m):
            for a in range(SHORE):
                for b in range(SHORE, CELL_SIZE):
                    edges.append((chimera_index(m, row, col, a), chimera_index(m, row, col, b), 1.0))
            if row + 1 < m:
                for a in range(SHORE):
                    edges.append((chimera_index(m, row, col, a), chimera_index(m, row + 1, col, a), 1.0))
            if col + 1 < m:
                for b in range(SHORE, CELL_SIZE):
                    edges.append((chimera_index(m, row, col, b), chimera_index(m, row, col + 1, b), 1.0))
    edges.sort()
    g = Graph(spec.num_qubits, tuple(edges))
    dead = list(dead)
    return g.without_nodes(dead) if dead else g


def random_chimera_instance(
    spec: ChimeraSpec | int,
    seed: int,
    couplers_only: bool = False,
    dead: Iterable[int] = (),
) -> IsingModel:
    """Standard-normal h and J on every active Chimera qubit and coupler."""
    g = chimera_graph(spec, dead)
    rng = np.random.default_rng(seed)
    h_draw = rng.standard_normal(g.node_count)
    j_draw = rng.standard_normal(len(g.edges))
    h = {} if couplers_only else {
        q: float(h_draw[q]) for q in range(g.node_count) if q not in g.inactive
    }
    J = {(i, j): float(w) for (i, j, _), w in zip(g.edges, j_draw)}
    return IsingModel(g.node_count, h, J, 0.0)


def sk_maxcut_graph(n: int, seed: int) -> Graph:
    """Complete graph with i.i.d. standard-normal edge weights."""
    if int(n) != n or n < 2:
        raise InvalidSpecError(f"SK graph needs at least 2 nodes, got {n!r}")
    rng = np.random.default_rng(seed)
    ii, jj = np.triu_indices(n, k=1)
    w = rng.standard_normal(ii.size)
    return Graph(n, tuple(zip(ii.tolist(), jj.tolist(), w.tolist())))


def cast_maxcut(g: Graph) -> IsingModel:
    """Ising model whose energy is exactly minus the cut value."""
    J = {}
    total = 0.0
    for i, j, w in g.edges:
        J[(i, j)] = w / 2.0
        total += w
    return IsingModel(g.node_count, {}, J, -total / 2.0)


def cut_value(g: Graph, z) -> float:
    s = as_spins(z)
    if s.shape[0] != g.node_count:
        raise LengthMismatchError(f"expected {g.node_count} spins, got {s.shape[0]}")
    return float(sum(w * (1 - int(s[i]) * int(s[j])) / 2 for i, j, w in g.edges))


def graph_to_dict(g: Graph) -> dict:
    return {"n": g.node_count, "edges": [[i, j, w] for i, j, w in g.edges]}


def graph_from_dict(data: dict) -> Graph:
    return Graph(int(data["n"]), tuple((int(i), int(j), float(w)) for i, j, w in data["edges"]))


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")


def load_graph(path) -> Graph:
    return graph_from_dict(json.loads(Path(path).read_text()))
