"""Unit tests for geodetic trees, limit sets and the ray audit."""
import numpy as np
import pytest

from hypertree.errors import CoverError, GraphError
from hypertree.geodetic import (
    TIE_BREAKS, arc_halves, ball_multiplicity, build_geodetic_tree,
    check_cover, example2_ray_growth, find_separator, limit_sets,
    lower_bound_audit, resolve_cover,
)
from hypertree.graph import (
    all_pairs_distances, generate_cycle, generate_example1,
    generate_example2, generate_tree,
)
from hypertree.hyperbolicity import gromov_table
from hypertree.visual import (
    adjacent_threshold2, auto_epsilon, boundary_cells,
)


def tree_and_cells(g, epsilon=False):
    """Return the least-id geodetic tree and the default cells of g."""
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    cells = boundary_cells(
        g, d, t, epsilon=auto_epsilon(t.delta) if epsilon else None)
    return build_geodetic_tree(g, d), cells


@pytest.mark.parametrize("tie_break", TIE_BREAKS)
@pytest.mark.parametrize("g", [
    generate_example1(5), generate_example2(3), generate_cycle(7),
    generate_tree(3, 2),
], ids=["example1", "example2", "cycle", "tree"])
def test_geodetic_trees_are_certified(g, tie_break):
    """Tree depth equals graph distance for every tie-break."""
    d = all_pairs_distances(g)
    gt = build_geodetic_tree(g, d, tie_break=tie_break, seed=5)
    assert gt.certified
    assert gt.violations == ()
    assert gt.tree.is_spanning(g)
    for v in range(g.n_vertices):
        assert gt.tree.depth_of(v) == d(g.root, v)


def test_tie_breaks_differ_on_a_square():
    """Vertex 2 of C_4 has parents 1 and 3 to choose from."""
    g = generate_cycle(4)
    d = all_pairs_distances(g)
    assert build_geodetic_tree(g, d).tree.parent[2] == 1
    assert build_geodetic_tree(g, d, tie_break="greatest-id") \
        .tree.parent[2] == 3


def test_unknown_tie_break():
    """Only the listed tie-breaks are accepted."""
    g = generate_cycle(4)
    with pytest.raises(GraphError, match="tie-break"):
        build_geodetic_tree(g, all_pairs_distances(g), tie_break="median")


def test_geodetic_document():
    """The document lists parents and the certificate."""
    g = generate_tree(2, 2)
    gt, _ = tree_and_cells(g)
    doc = gt.to_dict(g.n_vertices)
    assert doc["parents"] == [0, 0, 0, 1, 1, 2, 2]
    assert doc["certified"]
    assert doc["tie_break"] == "least-id"


def test_example2_ray_growth():
    """The single example2 cell is reached by 2^R rays."""
    assert example2_ray_growth([1, 2, 3]) == [(1, 2), (2, 4), (3, 8)]
    assert example2_ray_growth(range(1, 11)) == \
        [(r, 2 ** r) for r in range(1, 11)]
    with pytest.raises(GraphError):
        example2_ray_growth([0])


def test_limit_sets_example2():
    """Cutting example2 at the root leaves two parts reaching one cell."""
    gt, cells = tree_and_cells(generate_example2(4))
    family = limit_sets(gt, [0], cells)
    assert family.separator == (0,)
    assert family.limit_sets == [(0,), (0,)]
    assert family.m == 2
    assert family.infinite() == [0, 1]
    assert family.certified
    doc = family.to_dict()
    assert [c["top"] for c in doc["components"]] == [1, 2]
    assert doc["closed"]


def test_limit_sets_tree():
    """Subtrees of the root see disjoint halves of the leaves."""
    gt, cells = tree_and_cells(generate_tree(2, 3), epsilon=True)
    family = limit_sets(gt, [0], cells)
    assert family.limit_sets == [(0, 1, 2, 3), (4, 5, 6, 7)]
    assert family.m == 1
    assert family.epsilon_star > 0
    assert family.certified


def test_limit_sets_need_the_sphere():
    """A separator containing the whole sphere is refused."""
    gt, cells = tree_and_cells(generate_tree(2, 2))
    with pytest.raises(GraphError, match="outside the separator"):
        limit_sets(gt, cells.sphere, cells)


def test_ball_multiplicity():
    """Counts sets meeting each open ball."""
    dmat = np.array([[0.0, 0.5, 2.0], [0.5, 0.0, 1.0], [2.0, 1.0, 0.0]])
    assert ball_multiplicity(dmat, [(0,), (1, 2)], 1.0) == [2, 2, 1]


def test_arc_halves_off_the_strip():
    """Away from example1 the arc order is the cell order."""
    _, cells = tree_and_cells(generate_tree(2, 3))
    g = generate_tree(2, 3)
    assert arc_halves(g, cells) == [[0, 1, 2, 3, 4], [3, 4, 5, 6, 7]]
    assert arc_halves(g, cells, overlap=0) == [[0, 1, 2, 3], [4, 5, 6, 7]]


def test_arc_halves_cover_example1():
    """The two halves of the strip cover every cell."""
    g = generate_example1(6)
    _, cells = tree_and_cells(g)
    first, second = arc_halves(g, cells)
    assert set(first) | set(second) == set(range(cells.n_cells))


def test_resolve_cover():
    """Cover specs name explicit sets or arc halves."""
    g = generate_tree(2, 3)
    _, cells = tree_and_cells(g)
    sets, dim = resolve_cover({"version": 1, "sets": [[1, 0], [2]]},
                              g, cells)
    assert sets == [[0, 1], [2]]
    assert dim == 1
    sets, dim = resolve_cover({"version": 1, "halves": 0, "dim": 3},
                              g, cells)
    assert len(sets) == 2
    assert dim == 3
    with pytest.raises(CoverError, match="unknown cell 9"):
        resolve_cover({"version": 1, "sets": [[0, 9]]}, g, cells)


def test_check_cover():
    """A cover must reach every cell."""
    check_cover([[0, 1], [1, 2]], 3)
    with pytest.raises(CoverError, match=r"misses cells \[2\]"):
        check_cover([[0], [1]], 3)


def test_find_separator_tree():
    """Removing the root splits the leaves along the arc halves."""
    g = generate_tree(2, 3)
    gt, cells = tree_and_cells(g)
    result = find_separator(gt, arc_halves(g, cells), cells)
    assert result.found
    assert result.separator == (0,)
    assert result.rounds == 1
    assert result.to_dict()["limit_sets"]["m"] == 1


def test_find_separator_gives_up():
    """Singleton covers need cuts below max_depth."""
    gt, cells = tree_and_cells(generate_tree(2, 3))
    cover = [[c] for c in range(cells.n_cells)]
    result = find_separator(gt, cover, cells, max_depth=2)
    assert not result.found
    assert result.separator == (0, 1, 2)
    assert result.rounds == 2
    assert find_separator(gt, cover, cells).found


def test_audit_example2():
    """Two copies of the one cell give dimension 1 and two rays."""
    gt, cells = tree_and_cells(generate_example2(4))
    report = lower_bound_audit(gt, cells, [[0], [0]], 1, separator=[0])
    assert report["established"]
    assert report["cover_multiplicity"] == 2
    assert report["separator_found"] is None
    assert report["limit_sets"]["m"] == 2
    assert report["refinement_multiplicity"] == [2]
    assert report["links"]["rays_at_least_m"]["rays"] == 16
    assert report["all_links_hold"]


def test_audit_not_established():
    """Without enough overlap no claim is made."""
    gt, cells = tree_and_cells(generate_example2(3))
    report = lower_bound_audit(gt, cells, [[0]], 1)
    assert not report["established"]
    assert report["links"] == {}
    assert not report["all_links_hold"]
    assert report["reason"] == "criticality not established at this depth"
    assert report["separator_found"]


def test_audit_searches_for_a_separator():
    """Without a separator the greedy search supplies one."""
    g = generate_tree(2, 3)
    gt, cells = tree_and_cells(g, epsilon=True)
    report = lower_bound_audit(gt, cells, arc_halves(g, cells), 1)
    assert report["separator_found"]
    assert report["limit_sets"]["separator"] == [0]
    assert report["established"]
    assert report["links"]["refinement_covers"]["holds"]


@pytest.mark.slow
def test_example1_depth_10_audit():
    """Arc halves over the adjacent cells get a certified separator."""
    g = generate_example1(10)
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    cells = boundary_cells(
        g, d, t, threshold2=adjacent_threshold2(g.sphere_radius),
        epsilon=auto_epsilon(t.delta))
    assert cells.n_cells == 51
    gt = build_geodetic_tree(g, d)
    cover = arc_halves(g, cells, overlap=1)
    search = find_separator(gt, cover, cells)
    assert search.found
    assert search.family.certified
    for z in search.family.limit_sets:
        assert not z or any(set(z) <= set(u) for u in cover)
    again = limit_sets(gt, search.separator, cells)
    assert again.m == search.family.m
    assert again.certified
    audit = lower_bound_audit(gt, cells, cover, dim=1)
    assert audit["established"]
    assert audit["separator_found"]
    assert audit["links"]["refinement_covers"]["holds"]
    assert audit["links"]["refinement_refines"]["holds"]
