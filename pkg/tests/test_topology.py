from collections import deque

import pytest
from hypothesis import given, strategies as st

from icsim.topology import (
    DisconnectedGraphError,
    Graph,
    TopologyError,
    build_spanning_tree,
    complete_graph,
    erdos_renyi_graph,
    format_edge_list,
    make_round_schedule,
    neighbors,
    parse_edge_list,
    path_graph,
    ring_graph,
    star_graph,
)


def bfs_distances(g, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for w in g.adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def test_path_tree():
    t = build_spanning_tree(path_graph(3))
    assert t.root == 0
    assert t.level == (1, 2, 3)
    assert t.depth == 3


def test_star_with_center_two():
    g = Graph.from_edges(4, [(2, 0), (2, 1), (2, 3)])
    t = build_spanning_tree(g)
    assert t.root == 0
    assert t.parent[2] == 0
    assert t.parent[1] == 2 and t.parent[3] == 2
    assert t.depth == 3


def test_single_edge():
    t = build_spanning_tree(Graph.from_edges(2, [(0, 1)]))
    assert t.depth == 2
    assert t.children[0] == (1,)


def test_neighbors_sorted():
    assert neighbors(path_graph(3), 1) == (0, 2)
    assert neighbors(path_graph(3), 0) == (1,)
    assert neighbors(complete_graph(4), 3) == (0, 1, 2)


def test_neighbors_out_of_range():
    with pytest.raises(TopologyError):
        neighbors(path_graph(3), 3)


def test_disconnected_rejected_with_components():
    with pytest.raises(DisconnectedGraphError) as exc:
        Graph.from_edges(4, [(0, 1), (2, 3)])
    assert exc.value.components == [[0, 1], [2, 3]]


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)], []])
def test_malformed_edges(edges):
    with pytest.raises(TopologyError):
        Graph.from_edges(3 if edges != [(0, 5)] else 2, edges)


def test_generators_sizes():
    assert ring_graph(8).m == 8
    assert star_graph(6).m == 5
    assert complete_graph(5).m == 10
    assert path_graph(6).m == 5
    g = erdos_renyi_graph(7, 0.5, seed=3)
    assert g == erdos_renyi_graph(7, 0.5, seed=3)


def test_edge_list_roundtrip():
    g = ring_graph(5)
    assert parse_edge_list(format_edge_list(g)) == g


def test_edge_list_header_mismatch():
    with pytest.raises(TopologyError):
        parse_edge_list("3 3\n0 1\n1 2\n")


def test_round_schedule_counts():
    g = ring_graph(8)
    tree = build_spanning_tree(g)
    s = make_round_schedule(g, tree, K=8, mp_bits=40)
    assert s.rounds_simulation == 41
    assert s.rounds_rewind == 8
    assert s.rounds_flag_passing == 2 * tree.depth
    assert s.iteration_length == 40 + 2 * tree.depth + 41 + 8
    assert s.offsets == {"meeting_points": 0, "flag_passing": 40, "simulation": 40 + 2 * tree.depth, "rewind": 40 + 2 * tree.depth + 41}


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 9))
    # random spanning tree plus extra edges
    edges = {(draw(st.integers(0, v - 1)), v) for v in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=10))
    for u, v in extra:
        if u != v:
            edges.add((min(u, v), max(u, v)))
    # relabel so the lowest id is not always the tree root
    perm = draw(st.permutations(range(n)))
    return Graph.from_edges(n, {tuple(sorted((perm[u], perm[v]))) for u, v in edges})


@given(connected_graphs())
def test_levels_are_bfs_distances(g):
    t = build_spanning_tree(g)
    dist = bfs_distances(g, 0)
    for v in range(g.n):
        assert t.level[v] - 1 == dist[v]
    assert t == build_spanning_tree(g)
    assert len(t.edges()) == g.n - 1
    assert set(t.edges()) <= set(g.edges)
