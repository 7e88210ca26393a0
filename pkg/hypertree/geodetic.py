"""Geodetic spanning trees, their limit sets and the ray lower-bound audit."""
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from hypertree.errors import CoverError, GraphError
from hypertree.faithful import RootedTree, ray_census
from hypertree.graph import all_pairs_distances, arc_position, \
    generate_example2
from hypertree.hyperbolicity import gromov_table
from hypertree.visual import adjacent_threshold2, boundary_cells

TIE_BREAKS = ("least-id", "greatest-id", "random")


@dataclass(frozen=True, eq=False)
class GeodeticTree:
    """Breadth-first spanning tree with its distance certificate."""

    tree: RootedTree
    tie_break: str
    seed: int
    certified: bool
    violations: tuple

    def to_dict(self, n_vertices):
        """Return a JSON-ready dict."""
        return {
            "root": self.tree.root,
            "parents": self.tree.parents_array(n_vertices),
            "tie_break": self.tie_break,
            "seed": self.seed,
            "certified": self.certified,
            "violations": list(self.violations),
        }


def build_geodetic_tree(g, d, root=None, tie_break="least-id", seed=0):
    """Pick each parent among the neighbours one step closer to root."""
    if tie_break not in TIE_BREAKS:
        raise GraphError(f"unknown tie-break '{tie_break}'")
    if root is None:
        root = g.root
    rng = np.random.default_rng(seed)
    radii = d.dist[root]
    tree = RootedTree(root)
    for v in sorted(range(g.n_vertices), key=lambda v: (radii[v], v)):
        if v == root:
            continue
        options = [u for u in g.adjacency[v] if radii[u] == radii[v] - 1]
        if tie_break == "least-id":
            parent = options[0]
        elif tie_break == "greatest-id":
            parent = options[-1]
        else:
            parent = options[int(rng.integers(len(options)))]
        tree.attach(parent, v)
    violations = tuple(v for v in range(g.n_vertices)
                       if tree.depth_of(v) != radii[v])
    return GeodeticTree(tree, tie_break, seed, not violations, violations)


def example2_ray_growth(depths):
    """Return (R, multiplicity) rows for the single example2 cell.

    The sphere of example2 is a clique, so the adjacent threshold keeps it
    in one cell; the geodetic tree reaches every sphere vertex separately.
    """
    rows = []
    for radius in depths:
        if radius < 1:
            raise GraphError("ray growth needs R >= 1")
        g = generate_example2(radius)
        d = all_pairs_distances(g)
        t = gromov_table(d, g.root, sample=8)
        cells = boundary_cells(g, d, t, radius,
                               threshold2=adjacent_threshold2(radius))
        gt = build_geodetic_tree(g, d)
        census = ray_census(gt.tree, cells)
        rows.append((radius, census.per_cell[0]))
    return rows


def _components(tree, removed):
    forest = nx.Graph()
    forest.add_nodes_from(v for v in tree.members() if v not in removed)
    forest.add_edges_from((p, v) for p, v in tree.edges()
                          if p not in removed and v not in removed)
    return sorted(tuple(sorted(c)) for c in nx.connected_components(forest))


@dataclass
class LimitSetFamily:
    """Cells reached through each component of T - S.

    ``limit_sets[i]`` belongs to ``components[i]``; components without
    sphere vertices have empty limit sets and take no part in m.
    """

    separator: tuple
    components: list
    limit_sets: list
    m: int
    epsilon_star: float
    certified: bool

    def infinite(self):
        """Return indices of components that reach the sphere."""
        return [i for i, z in enumerate(self.limit_sets) if z]

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "separator": list(self.separator),
            "components": [{"size": len(c), "top": min(c),
                            "limit_set": list(z)}
                           for c, z in zip(self.components, self.limit_sets)],
            "m": self.m,
            "epsilon_star": self.epsilon_star,
            "certified": self.certified,
            "closed": True,
        }


def ball_multiplicity(dmat, sets, radius):
    """Return, per cell, how many sets meet its open radius-ball."""
    counts = []
    for eta in range(dmat.shape[0]):
        near = set(np.flatnonzero(dmat[eta] < radius).tolist())
        counts.append(sum(1 for z in sets if near & set(z)))
    return counts


def _epsilon_star(dmat, sets, m):
    if dmat.shape[0] <= 1:
        return 1.0
    candidates = np.unique(dmat[dmat > 0])
    low, high = 0, len(candidates) - 1
    while low < high:
        mid = (low + high + 1) // 2
        if max(ball_multiplicity(dmat, sets, candidates[mid])) <= m:
            low = mid
        else:
            high = mid - 1
    return float(candidates[low])


def limit_sets(gt, separator, cells):
    """Split the tree at separator and collect the cells behind each part."""
    separator = tuple(sorted(set(separator)))
    tree = gt.tree
    sphere = set(cells.sphere)
    if not sphere - set(separator):
        raise GraphError("no sphere vertex outside the separator")
    components = _components(tree, set(separator))
    zs = [tuple(sorted({cells.cell_of[v] for v in c if v in sphere}))
          for c in components]
    reached = [z for z in zs if z]
    m = max(sum(1 for z in reached if eta in z)
            for eta in range(cells.n_cells))
    dmat = cells.metric.dmat if cells.metric is not None \
        else np.zeros((cells.n_cells, cells.n_cells))
    epsilon_star = _epsilon_star(dmat, reached, m)
    certified = max(ball_multiplicity(dmat, reached, epsilon_star)) <= m
    return LimitSetFamily(
        separator=separator,
        components=components,
        limit_sets=zs,
        m=m,
        epsilon_star=epsilon_star,
        certified=certified,
    )


@dataclass
class SeparatorResult:
    """Outcome of the greedy separator search."""

    separator: tuple
    found: bool
    family: LimitSetFamily
    rounds: int

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "separator": list(self.separator),
            "found": self.found,
            "rounds": self.rounds,
            "limit_sets": self.family.to_dict(),
        }


def check_cover(cover, n_cells):
    """Raise CoverError unless the sets cover all cell ids."""
    missing = set(range(n_cells)) - set().union(*map(set, cover))
    if missing:
        raise CoverError(f"cover misses cells {sorted(missing)}")


def _inside_some(z, cover):
    return any(set(z) <= set(u) for u in cover)


def find_separator(gt, cover, cells, max_depth=None):
    """Grow S layer by layer until each limit set fits inside a cover set.

    The tops of the shallowest offending components join S each round.
    Reaching max_depth (default the sphere radius) ends the search without
    a separator, which says nothing about deeper truncations.
    """
    check_cover(cover, cells.n_cells)
    if max_depth is None:
        max_depth = cells.radius
    tree = gt.tree
    separator = set()
    rounds = 0
    while True:
        family = limit_sets(gt, separator, cells)
        bad = [c for c, z in zip(family.components, family.limit_sets)
               if z and not _inside_some(z, cover)]
        if not bad:
            return SeparatorResult(family.separator, True, family, rounds)
        tops = [min(c, key=lambda v: (tree.depth_of(v), v)) for c in bad]
        level = min(tree.depth_of(v) for v in tops)
        if level >= max_depth:
            return SeparatorResult(family.separator, False, family, rounds)
        separator |= {v for v in tops if tree.depth_of(v) == level}
        rounds += 1


def arc_order(g, cells):
    """Return cell ids ordered along the arc, or by id off example1."""
    if g.family != "example1":
        return list(range(cells.n_cells))
    return sorted(range(cells.n_cells),
                  key=lambda i: (min(arc_position(g, v)
                                     for v in cells.cells[i]), i))


def arc_halves(g, cells, overlap=1):
    """Split arc-ordered cells into two halves sharing 2*overlap cells."""
    order = arc_order(g, cells)
    half = math.ceil(len(order) / 2)
    first = order[:min(len(order), half + overlap)]
    second = order[max(0, half - overlap):]
    return [sorted(first), sorted(second)]


def resolve_cover(spec, g, cells):
    """Turn a cover spec into (sets, dim)."""
    if "halves" in spec:
        return arc_halves(g, cells, int(spec["halves"])), \
            int(spec.get("dim", 1))
    sets = [sorted(int(c) for c in s) for s in spec["sets"]]
    for s in sets:
        for c in s:
            if not 0 <= c < cells.n_cells:
                raise CoverError(f"cover names unknown cell {c}")
    return sets, int(spec.get("dim", max(0, len(sets) - 1)))


def lower_bound_audit(gt, cells, cover, dim, separator=None):
    """Audit the chain: cover multiplicity > dim gives 2m >= dim + 1 rays.

    Returns a report with a witness per link.  When no cell lies in dim + 1
    cover sets the precondition is not established and no claim is made.
    """
    check_cover(cover, cells.n_cells)
    multiplicity = [sum(1 for u in cover if eta in u)
                    for eta in range(cells.n_cells)]
    established = max(multiplicity) >= dim + 1
    if separator is None:
        search = find_separator(gt, cover, cells)
        family, found = search.family, search.found
    else:
        family = limit_sets(gt, separator, cells)
        found = None
    dmat = cells.metric.dmat if cells.metric is not None \
        else np.zeros((cells.n_cells, cells.n_cells))
    refinement = []
    for i in family.infinite():
        z = family.limit_sets[i]
        fattened = {eta for eta in range(cells.n_cells)
                    if dmat[eta, list(z)].min() < family.epsilon_star}
        host = max(range(len(cover)),
                   key=lambda k: (set(z) <= set(cover[k]),
                                  len(set(z) & set(cover[k])), -k))
        refinement.append((sorted(fattened & set(cover[host])), host))
    v_mult = [sum(1 for z, _ in refinement if eta in z)
              for eta in range(cells.n_cells)]
    covered = set().union(*(set(z) for z, _ in refinement)) \
        if refinement else set()
    census = ray_census(gt.tree, cells)
    v_cell = int(np.argmax(v_mult))
    m_cell = max(range(cells.n_cells),
                 key=lambda eta: (sum(1 for k in family.infinite()
                                      if eta in family.limit_sets[k]), -eta))
    links = {
        "refinement_covers": {"holds": len(covered) == cells.n_cells,
                              "missing": sorted(set(range(cells.n_cells))
                                                - covered)},
        "refinement_refines": {"holds": all(set(z) <= set(cover[h])
                                            for z, h in refinement)},
        "refinement_multiplicity": {"holds": v_mult[v_cell] >= dim + 1,
                                    "cell": v_cell, "value": v_mult[v_cell]},
        "multiplicity_at_most_2m": {"holds": max(v_mult) <= 2 * family.m,
                                    "value": max(v_mult), "m": family.m},
        "two_m_at_least_dim_plus_1": {"holds": 2 * family.m >= dim + 1,
                                      "m": family.m},
        "rays_at_least_m": {"holds": census.per_cell[m_cell] >= family.m,
                            "cell": m_cell,
                            "rays": census.per_cell[m_cell]},
        "rays_at_least_half_dim_plus_1": {
            "holds": 2 * census.max_multiplicity >= dim + 1,
            "rays": census.max_multiplicity},
    }
    return {
        "dim": dim,
        "established": established,
        "reason": None if established else
        "criticality not established at this depth",
        "cover": [list(u) for u in cover],
        "cover_multiplicity": max(multiplicity),
        "separator_found": found,
        "limit_sets": family.to_dict(),
        "refinement": [{"set": z, "host": h} for z, h in refinement],
        "refinement_multiplicity": v_mult,
        "links": links if established else {},
        "all_links_hold": established and all(
            link["holds"] for link in links.values()),
    }
