"""Unit tests for Gromov products, delta and the delta cross-checks."""
import itertools
from fractions import Fraction

import pytest
from utils import brute_delta2, thin_all_geodesics

from hypertree.graph import (
    all_pairs_distances, generate_cycle, generate_example1,
    generate_example2, generate_tree,
)
from hypertree.hyperbolicity import (
    basepoint_transfer_check, delta_report, gromov_table, max_defect,
    parallel_map, product_vs_geodesic_check, stratified_sample,
    thin_triangle_delta,
)


@pytest.mark.parametrize("branching, depth",
                         [(2, 1), (2, 4), (2, 6), (3, 2), (3, 4)])
def test_trees_have_delta_zero(branching, depth):
    """Trees are 0-hyperbolic."""
    d = all_pairs_distances(generate_tree(branching, depth))
    t = gromov_table(d, 0)
    assert t.delta2 == 0
    assert t.delta == 0
    assert not t.sampled


@pytest.mark.parametrize("length", range(4, 13))
def test_cycle_delta_matches_oracle(length):
    """Four-point delta on cycles equals the triple-loop oracle."""
    d = all_pairs_distances(generate_cycle(length))
    t = gromov_table(d, 0)
    assert t.delta2 == brute_delta2(d.dist.tolist(), 0)


def test_example2_delta_positive():
    """Example2 has a witness with doubled defect at least 1."""
    g = generate_example2(3)
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    assert t.delta2 >= 1
    assert t.delta2 == brute_delta2(d.dist.tolist(), g.root)
    x, y, z = t.witness
    defect = min(t.prod2[x, z], t.prod2[y, z]) - t.prod2[x, y]
    assert defect == t.delta2


def test_products_are_exact():
    """Products are halves of integers and match the definition."""
    g = generate_cycle(5)
    d = all_pairs_distances(g)
    t = gromov_table(d, 0)
    assert t.product(2, 3) == Fraction(3, 2)
    for x, y in itertools.product(range(5), repeat=2):
        assert 2 * t.product(x, y) == d(x, 0) + d(y, 0) - d(x, y)


def test_sampled_table():
    """Past the cap the z scan is sampled and only lower-bounds delta."""
    g = generate_example1(5)
    d = all_pairs_distances(g)
    full = gromov_table(d, 0)
    sampled = gromov_table(d, 0, cap=5, sample=6, seed=3)
    assert sampled.sampled
    assert sampled.seed == 3
    assert sampled.delta2 <= full.delta2


def test_stratified_sample_hits_every_class():
    """Every distance class is represented and output is sorted."""
    radii = [0, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3, 3]
    chosen = stratified_sample(radii, 6, seed=0)
    assert chosen == sorted(chosen)
    assert {radii[v] for v in chosen} == {0, 1, 2, 3}
    assert chosen == stratified_sample(radii, 6, seed=0)


def test_parallel_map_keeps_order():
    """Results come back in input order whatever the thread count."""
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, threads=4) == \
        [x * x for x in items]


def test_thread_count_does_not_change_delta():
    """max_defect reduces chunks in order, so threads do not matter."""
    g = generate_example1(5)
    d = all_pairs_distances(g)
    t = gromov_table(d, 0)
    zs = range(g.n_vertices)
    assert max_defect(t.prod2, zs, 1) == max_defect(t.prod2, zs, 4)


@pytest.mark.parametrize("g", [
    generate_example1(5), generate_example2(4), generate_tree(2, 4),
    generate_cycle(7), generate_cycle(10),
], ids=["example1", "example2", "tree", "cycle7", "cycle10"])
def test_basepoint_transfer(g):
    """Delta at the root gives 2 delta at every other base."""
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    report = basepoint_transfer_check(d, g.root, t.delta2, threads=2)
    assert report.violation_count == 0
    assert report.max_slack2 <= 2 * t.delta2
    assert report.bases == g.n_vertices
    assert not report.sampled


def test_transfer_flags_a_too_small_delta():
    """Claiming delta 0 on a cycle produces witnesses."""
    d = all_pairs_distances(generate_cycle(6))
    report = basepoint_transfer_check(d, 0, 0, max_witnesses=3)
    assert report.violation_count > 0
    assert len(report.violations) == 3
    assert report.to_dict()["violations"][0].keys() == set("wxyz")


@pytest.mark.parametrize("g", [
    generate_example1(5), generate_example2(4), generate_tree(2, 4),
    generate_cycle(8),
], ids=["example1", "example2", "tree", "cycle8"])
def test_product_vs_geodesic(g):
    """A geodesic [x,y] passes within (x,y)_o + 2 delta + 1 of o."""
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    delta2 = basepoint_transfer_check(d, g.root, t.delta2).max_slack2
    report = product_vs_geodesic_check(g, d, t, delta2=delta2)
    assert not report.violations
    assert min(report.histogram) >= 0
    assert max(report.histogram) <= 2 * delta2 + 2
    n = g.n_vertices
    assert report.pairs == n * (n + 1) // 2


def test_product_vs_geodesic_tree_is_tight():
    """On a tree the distance to a geodesic is the product itself."""
    g = generate_tree(2, 3)
    d = all_pairs_distances(g)
    report = product_vs_geodesic_check(g, d, gromov_table(d, 0))
    assert set(report.histogram) == {0}


def test_product_vs_geodesic_sources():
    """With sources x is restricted and y runs over every vertex."""
    g = generate_example2(3)
    d = all_pairs_distances(g)
    t = gromov_table(d, 0)
    report = product_vs_geodesic_check(g, d, t, sources=[0, 3, 3])
    assert report.pairs == 2 * g.n_vertices


def test_thin_triangle_tree():
    """Geodesic triangles in a tree are 0-thin."""
    g = generate_tree(2, 3)
    d = all_pairs_distances(g)
    report = thin_triangle_delta(g, d)
    assert report.value == 0
    assert report.triples == 15 * 14 * 13 // 6


def test_thin_triangle_square():
    """In C_4 the side 0-1-2 of triangle (0, 2, 3) bulges by one."""
    g = generate_cycle(4)
    d = all_pairs_distances(g)
    report = thin_triangle_delta(g, d)
    assert report.value == 1
    assert report.witness == (0, 2, 3)


@pytest.mark.parametrize("length", range(4, 13))
def test_thin_triangle_at_least_best_choice(length):
    """Fixed sides are never thinner than the best choice of sides."""
    g = generate_cycle(length)
    d = all_pairs_distances(g)
    report = thin_triangle_delta(g, d)
    best = max(thin_all_geodesics(g, d, x, y, z)
               for x, y, z in itertools.combinations(range(length), 3))
    assert report.value >= best


def test_thin_triangle_sampled():
    """Past the cap a fixed number of distinct triples is drawn."""
    g = generate_example1(4)
    d = all_pairs_distances(g)
    report = thin_triangle_delta(g, d, cap=5, sample=50, seed=2)
    assert report.sampled
    assert report.triples == 50
    assert report == thin_triangle_delta(g, d, cap=5, sample=50, seed=2)


def test_delta_report_document():
    """The delta document carries the witness and every check."""
    g = generate_cycle(6)
    d = all_pairs_distances(g)
    t = gromov_table(d, 0)
    doc = delta_report(
        t,
        transfer=basepoint_transfer_check(d, 0, t.delta2),
        thin=thin_triangle_delta(g, d),
        geodesic=product_vs_geodesic_check(g, d, t),
        config_hash="abc",
    )
    assert doc["delta2x"] == t.delta2
    assert doc["witnesses"][0].keys() == {"x", "y", "z"}
    assert set(doc["checks"]) == {"basepoint_transfer", "thin_triangle",
                                  "product_vs_geodesic"}
    assert doc["config_hash"] == "abc"


DEPTH8 = [
    pytest.param(generate_example1(8), 600, id="example1"),
    pytest.param(generate_example2(8), 100, id="example2"),
]


@pytest.mark.slow
@pytest.mark.parametrize("g, cap", DEPTH8)
def test_transfer_at_depth_8(g, cap):
    """The transfer bound holds at depth 8; example2 samples its bases."""
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    assert not t.sampled
    report = basepoint_transfer_check(d, g.root, t.delta2, cap=cap,
                                      sample=16, threads=4)
    assert report.violation_count == 0
    assert report.max_slack2 <= 2 * t.delta2
    assert report.sampled == (g.n_vertices > cap)


@pytest.mark.slow
@pytest.mark.parametrize("g, cap", DEPTH8)
def test_product_vs_geodesic_at_depth_8(g, cap):
    """Geodesics pass near the root at depth 8, every pair or a sample."""
    d = all_pairs_distances(g)
    t = gromov_table(d, g.root)
    sources = None
    if g.n_vertices > cap:
        sources = stratified_sample(d.dist[g.root], 16, seed=0)
    report = product_vs_geodesic_check(g, d, t, sources=sources,
                                       delta2=2 * t.delta2)
    assert not report.violations
    assert min(report.histogram) >= 0
