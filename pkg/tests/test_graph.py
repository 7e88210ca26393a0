"""Unit tests for graph generators, distances and geodesics."""
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertree.errors import GraphError
from hypertree.graph import (
    all_geodesics, all_pairs_distances, arc_position, bfs_levels,
    count_geodesics, generate, generate_cycle, generate_example1,
    generate_example2, generate_path, generate_tree, graph_from_edges,
    koenig_ray, least_bfs_parent, make_path, one_geodesic,
)


@st.composite
def small_graphs(draw):
    """Draw a generated graph small enough for exhaustive checks."""
    family = draw(st.sampled_from(
        ["tree", "example1", "example2", "cycle", "path"]))
    if family == "tree":
        return generate_tree(draw(st.integers(2, 3)), draw(st.integers(1, 3)))
    if family == "example1":
        return generate_example1(draw(st.integers(1, 5)))
    if family == "example2":
        return generate_example2(draw(st.integers(0, 4)))
    if family == "cycle":
        return generate_cycle(draw(st.integers(3, 12)))
    return generate_path(draw(st.integers(1, 10)))


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_generated_graphs_are_valid(g):
    """Adjacency is symmetric and loop free, and g is connected."""
    for v, nbrs in enumerate(g.adjacency):
        assert v not in nbrs
        for u in nbrs:
            assert v in g.adjacency[u]
    assert g.is_connected()
    assert max(g.root_distances()) == g.depth
    assert 0 <= g.sphere_radius <= g.depth


@settings(max_examples=40, deadline=None)
@given(small_graphs())
def test_distances_are_a_graph_metric(g):
    """dist is symmetric, zero on the diagonal and 1 exactly on edges."""
    d = all_pairs_distances(g)
    n = g.n_vertices
    assert (d.dist == d.dist.T).all()
    for x in range(n):
        assert d(x, x) == 0
        for y in range(n):
            assert (d(x, y) == 1) == g.has_edge(x, y)
    assert list(d.dist[g.root]) == g.root_distances()


def test_example2_counts():
    """Example2 at depth 2 has 7 vertices and 13 edges."""
    g = generate_example2(2)
    assert g.n_vertices == 7
    assert g.n_edges == 13
    assert g.layer_of == (0, 1, 1, 2, 2, 2, 2)
    assert generate_example2(0).n_edges == 0


def test_example2_branching():
    """Each vertex of V_1 has exactly two children in V_2."""
    g = generate_example2(2)
    for v in (1, 2):
        children = [u for u in g.adjacency[v] if g.layer_of[u] == 2]
        assert len(children) == 2
    for u in range(3, 7):
        parents = [v for v in g.adjacency[u] if g.layer_of[v] == 1]
        assert len(parents) == 1


def test_tree_counts():
    """Complete trees have (b^(d+1) - 1)/(b - 1) vertices."""
    assert (generate_tree(2, 1).n_vertices, generate_tree(2, 1).n_edges) \
        == (3, 2)
    assert (generate_tree(2, 3).n_vertices, generate_tree(2, 3).n_edges) \
        == (15, 14)
    assert (generate_tree(3, 2).n_vertices, generate_tree(3, 2).n_edges) \
        == (13, 12)


def test_example1_layers():
    """Layer k of example1 has 2^(k-1) + 1 vertices."""
    g = generate_example1(3)
    assert g.n_vertices == 10
    assert g.n_edges == 12
    assert [g.layer_of.count(k) for k in (1, 2, 3)] == [2, 3, 5]
    assert g.sphere_radius == 2
    assert g.family == "example1"


def test_example1_arc_positions():
    """Arc positions run from 0 to 1 along every layer."""
    g = generate_example1(3)
    layer3 = [v for v in range(g.n_vertices) if g.layer_of[v] == 3]
    positions = [arc_position(g, v) for v in layer3]
    assert positions == [Fraction(i, 4) for i in range(5)]
    with pytest.raises(GraphError):
        arc_position(generate_tree(2, 2), 0)


def test_generator_preconditions():
    """Generators refuse degenerate parameters."""
    with pytest.raises(GraphError):
        generate_example1(0)
    with pytest.raises(GraphError):
        generate_tree(1, 3)
    with pytest.raises(GraphError):
        generate_cycle(2)
    with pytest.raises(GraphError):
        generate("torus", 3)


def test_distances_path():
    """On a path a-b-c the ends are two apart."""
    d = all_pairs_distances(generate_path(2))
    assert d(0, 2) == 2
    assert d.diameter() == 2
    assert d.sphere(0, 1) == (1,)


def test_distances_example2():
    """Every V_2 vertex of example2 is two steps from the root."""
    g = generate_example2(2)
    d = all_pairs_distances(g)
    assert [d(0, v) for v in range(3, 7)] == [2, 2, 2, 2]


def test_disconnected_graph():
    """A disconnected graph names an unreachable pair."""
    g = graph_from_edges(3, [(0, 1)])
    with pytest.raises(GraphError, match="not connected"):
        all_pairs_distances(g)


def test_one_geodesic_trivial():
    """A geodesic from x to itself is the single vertex."""
    g = generate_cycle(5)
    d = all_pairs_distances(g)
    path = one_geodesic(g, d, 3, 3)
    assert path.vertices == (3,)
    assert path.length == 0


def test_one_geodesic_least():
    """The least geodesic between opposite corners of C_4 goes through 1."""
    g = generate_cycle(4)
    d = all_pairs_distances(g)
    assert one_geodesic(g, d, 0, 2).vertices == (0, 1, 2)


def test_all_geodesics_cycle():
    """Opposite corners of C_4 have exactly two geodesics."""
    g = generate_cycle(4)
    d = all_pairs_distances(g)
    found = all_geodesics(g, d, 0, 2, cap=10)
    assert found.count == 2
    assert not found.truncated
    assert [p.vertices for p in found.paths] == [(0, 1, 2), (0, 3, 2)]
    assert count_geodesics(g, d, 0, 2) == 2


def test_all_geodesics_truncated():
    """Hitting the cap flags the result and keeps a lower bound."""
    g = generate_cycle(4)
    d = all_pairs_distances(g)
    found = all_geodesics(g, d, 0, 2, cap=1)
    assert found.truncated
    assert found.count == 1


def test_example2_unique_geodesics():
    """Example2 has a unique geodesic from the root to every vertex."""
    g = generate_example2(4)
    d = all_pairs_distances(g)
    for v in range(g.n_vertices):
        assert count_geodesics(g, d, 0, v) == 1


def test_count_matches_enumeration():
    """The counting dynamic program agrees with enumeration."""
    g = generate_example1(4)
    d = all_pairs_distances(g)
    for y in range(g.n_vertices):
        found = all_geodesics(g, d, 0, y, cap=1000)
        assert found.count == count_geodesics(g, d, 0, y)


def test_make_path():
    """Paths are validated and flagged as geodesic or not."""
    g = generate_cycle(5)
    d = all_pairs_distances(g)
    assert make_path(g, d, [0, 1, 2]).geodesic
    assert not make_path(g, d, [0, 1, 2, 3]).geodesic
    assert make_path(g, None, [0, 1]).geodesic is None
    with pytest.raises(GraphError):
        make_path(g, d, [0, 2])


def test_koenig_ray_chain():
    """Single-vertex levels give the chain itself."""
    path = koenig_ray([(0,), (1,), (2,)], {1: 0, 2: 1})
    assert path.vertices == (0, 1, 2)


def test_koenig_ray_tree():
    """Binary tree levels with the parent map give the leftmost branch."""
    g = generate_tree(2, 3)
    d = all_pairs_distances(g)
    path = koenig_ray(bfs_levels(d, 0), lambda v: (v - 1) // 2, d)
    assert path.vertices == (0, 1, 3, 7)
    assert path.geodesic


def test_koenig_ray_example1():
    """Least BFS parents on example1 give a root-to-sphere geodesic."""
    g = generate_example1(5)
    d = all_pairs_distances(g)
    levels = bfs_levels(d, g.root)
    path = koenig_ray(levels,
                      lambda v: least_bfs_parent(g, d, g.root, v), d)
    assert path.length == g.depth
    assert path.geodesic
    assert make_path(g, d, path.vertices).geodesic


def test_koenig_ray_empty_level():
    """An empty level is an error."""
    with pytest.raises(GraphError, match="empty"):
        koenig_ray([(0,), ()], {})
