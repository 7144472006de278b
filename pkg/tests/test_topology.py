import numpy as np
import pytest

from conftest import random_spins
from equalqa.core import energy
from equalqa.topology import (
    ChimeraSpec,
    Graph,
    InvalidSpecError,
    cast_maxcut,
    chimera_graph,
    cut_value,
    load_graph,
    random_chimera_instance,
    save_graph,
    sk_maxcut_graph,
)


def brute_chimera_edges(m):
    """Edge set by direct adjacency rules on (row, col, shore, k) coordinates."""
    coords = [(r, c, s, k) for r in range(m) for c in range(m) for s in range(2) for k in range(4)]
    index = {q: 8 * (q[0] * m + q[1]) + 4 * q[2] + q[3] for q in coords}
    edges = set()
    for a in coords:
        for b in coords:
            if index[a] >= index[b]:
                continue
            same_cell = a[:2] == b[:2]
            if same_cell and a[2] != b[2]:
                edges.add((index[a], index[b]))
            elif a[2] == b[2] == 0 and a[1] == b[1] and abs(a[0] - b[0]) == 1 and a[3] == b[3]:
                edges.add((index[a], index[b]))
            elif a[2] == b[2] == 1 and a[0] == b[0] and abs(a[1] - b[1]) == 1 and a[3] == b[3]:
                edges.add((index[a], index[b]))
    return edges


@pytest.mark.parametrize("m", range(1, 9))
def test_chimera_counts(m):
    g = chimera_graph(ChimeraSpec(m))
    assert g.node_count == 8 * m * m
    assert len(g.edges) == 16 * m * m + 8 * m * (m - 1)
    assert g.degrees().max() <= 6


def test_chimera_small_examples():
    assert len(chimera_graph(1).edges) == 16
    g = chimera_graph(2)
    assert (g.node_count, len(g.edges)) == (32, 80)
    assert chimera_graph(16).node_count == 2048


@pytest.mark.parametrize("m", [1, 2, 3])
def test_chimera_matches_brute_construction(m):
    g = chimera_graph(m)
    assert {(i, j) for i, j, _ in g.edges} == brute_chimera_edges(m)
    assert all(w == 1.0 for *_, w in g.edges)


def test_chimera_invalid():
    with pytest.raises(InvalidSpecError):
        ChimeraSpec(0)


def test_dead_qubits_masked():
    g = chimera_graph(2, dead=[0, 5])
    assert g.node_count == 32
    assert all(0 not in e[:2] and 5 not in e[:2] for e in g.edges)
    m = random_chimera_instance(2, 1, dead=[0, 5])
    assert 0 not in m.h and 5 not in m.h


def test_random_instance_structure_and_determinism():
    a = random_chimera_instance(ChimeraSpec(1), seed=3)
    assert len(a.h) == 8 and len(a.J) == 16
    assert all(np.isfinite(v) for v in list(a.h.values()) + list(a.J.values()))
    assert a.offset == 0.0
    assert random_chimera_instance(1, seed=3) == a
    assert random_chimera_instance(1, seed=4) != a
    assert random_chimera_instance(1, seed=3, couplers_only=True).h == {}


def test_random_instance_distribution():
    vals = []
    for seed in range(10000):
        m = random_chimera_instance(2, seed)
        vals.extend(m.h.values())
        vals.extend(m.J.values())
    vals = np.array(vals)
    assert abs(vals.mean()) < 0.05
    assert abs(vals.std() - 1.0) < 0.05


@pytest.mark.parametrize("n,edges", [(2, 1), (17, 136), (60, 1770)])
def test_sk_edge_counts(n, edges):
    g = sk_maxcut_graph(n, seed=1)
    assert len(g.edges) == edges
    assert sk_maxcut_graph(n, seed=1) == g


def test_sk_invalid():
    with pytest.raises(InvalidSpecError):
        sk_maxcut_graph(1, 0)


def test_graph_invariants():
    with pytest.raises(InvalidSpecError):
        Graph(3, ((0, 0, 1.0),))
    with pytest.raises(InvalidSpecError):
        Graph(3, ((0, 1, 1.0), (1, 0, 2.0)))
    with pytest.raises(InvalidSpecError):
        Graph(3, ((0, 3, 1.0),))


TRIANGLE = Graph(3, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)))


def test_cut_examples():
    assert cut_value(TRIANGLE, [1, 1, 1]) == 0.0
    assert cut_value(TRIANGLE, [1, 1, -1]) == 2.0
    assert energy(cast_maxcut(TRIANGLE), [1, 1, -1]) == -2.0


def test_negative_edge_stays_uncut():
    g = Graph(2, ((0, 1, -3.0),))
    model = cast_maxcut(g)
    best = min(([a, b] for a in (-1, 1) for b in (-1, 1)), key=lambda z: energy(model, z))
    assert best[0] == best[1]
    assert energy(model, best) == 0.0
    assert cut_value(g, best) == 0.0


def direct_cut(g, z):
    return sum(w for i, j, w in g.edges if z[i] != z[j])


def test_cast_identity_sk(rng):
    g = sk_maxcut_graph(10, seed=5)
    model = cast_maxcut(g)
    for _ in range(100):
        z = random_spins(rng, 10)
        assert energy(model, z) == pytest.approx(-direct_cut(g, z), abs=1e-9)
        assert cut_value(g, z) == pytest.approx(-energy(model, z), abs=1e-9)


def test_graph_file_roundtrip(tmp_path):
    g = sk_maxcut_graph(5, seed=2)
    save_graph(g, tmp_path / "g.json")
    assert load_graph(tmp_path / "g.json") == g
