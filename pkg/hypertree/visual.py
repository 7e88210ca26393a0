"""Visual metric on vertex sets and the boundary-cell model at a sphere."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import floyd_warshall

from hypertree.errors import GraphError, InadmissibleEpsilon

ADMISSIBLE = math.sqrt(2) - 1
TOLERANCE = 1e-12
LN_SQRT2 = math.log(math.sqrt(2))


def epsilon_prime(epsilon, delta):
    """Return exp(epsilon * delta) - 1."""
    return math.expm1(epsilon * float(delta))


def max_epsilon(delta):
    """Return the largest admissible epsilon, infinite when delta is 0."""
    if delta == 0:
        return math.inf
    return LN_SQRT2 / float(delta)


def auto_epsilon(delta):
    """Return ln(sqrt 2)/delta, or ln(sqrt 2) itself when delta is 0."""
    if delta == 0:
        return LN_SQRT2
    return LN_SQRT2 / float(delta)


def check_admissible(epsilon, delta):
    """Raise InadmissibleEpsilon unless epsilon > 0 and eps' <= sqrt2 - 1."""
    if not epsilon > 0 or \
            epsilon_prime(epsilon, delta) > ADMISSIBLE + TOLERANCE:
        raise InadmissibleEpsilon(epsilon, max_epsilon(delta))


@dataclass(frozen=True, eq=False)
class VisualMetric:
    """Chain-infimum metric d_eps over an ordered tuple of vertices.

    ``rho`` holds the one-step weights exp(-eps (x,y)_o) with a zero
    diagonal; ``dmat`` the shortest chain over the same points.
    """

    epsilon: float
    epsilon_prime: float
    base: int
    points: tuple
    rho: np.ndarray
    dmat: np.ndarray

    def index(self, v):
        """Return the row of vertex v."""
        return self.points.index(v)

    def distance(self, x, y):
        """Return d_eps(x, y) for two vertices of the point set."""
        return float(self.dmat[self.index(x), self.index(y)])

    def restrict(self, points):
        """Restrict to a subset; chains keep using every point."""
        rows = [self.index(v) for v in points]
        return VisualMetric(
            epsilon=self.epsilon,
            epsilon_prime=self.epsilon_prime,
            base=self.base,
            points=tuple(points),
            rho=self.rho[np.ix_(rows, rows)],
            dmat=self.dmat[np.ix_(rows, rows)],
        )


def chain_metric(t, epsilon, points):
    """Build d_eps on points from the product table t.

    Chains may pass through any vertex of points.  Duplicates in points are
    dropped, first occurrence kept.
    """
    check_admissible(epsilon, t.delta)
    points = tuple(dict.fromkeys(int(v) for v in points))
    if not points:
        raise GraphError("visual metric needs at least one point")
    prod = t.prod2[np.ix_(points, points)] / 2.0
    rho = np.exp(-epsilon * prod)
    np.fill_diagonal(rho, 0.0)
    # dense zeros read as missing edges
    weights = np.where(rho > 0, rho, np.finfo(float).tiny)
    np.fill_diagonal(weights, 0.0)
    dmat = floyd_warshall(weights, directed=False)
    np.fill_diagonal(dmat, 0.0)
    return VisualMetric(
        epsilon=float(epsilon),
        epsilon_prime=epsilon_prime(epsilon, t.delta),
        base=t.base,
        points=points,
        rho=rho,
        dmat=dmat,
    )


def metric_violations(dmat, tolerance=TOLERANCE, limit=10):
    """Return up to limit witnesses against the metric axioms of dmat."""
    found = []
    n = dmat.shape[0]
    for x, y in np.argwhere(np.abs(dmat - dmat.T) > tolerance).tolist():
        found.append(("symmetry", x, y))
    off = ~np.eye(n, dtype=bool)
    for x, y in np.argwhere(off & (dmat <= 0)).tolist():
        found.append(("positivity", x, y))
    for z in range(n):
        through = dmat[:, z][:, None] + dmat[z, :][None, :]
        for x, y in np.argwhere(through < dmat - tolerance).tolist():
            found.append(("triangle", x, y, z))
            if len(found) >= limit:
                return found
    return found[:limit]


@dataclass
class SandwichReport:
    """Two-sided bound eps' rho <= d_eps <= rho over all point pairs."""

    epsilon: float
    epsilon_prime: float
    pairs: int
    violations: list
    ratio_histogram: list
    min_ratio: float
    tolerance: float

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "epsilon": self.epsilon,
            "epsilon_prime": self.epsilon_prime,
            "pairs": self.pairs,
            "violations": [{"x": x, "y": y, "side": side}
                           for x, y, side in self.violations],
            "ratio_histogram": self.ratio_histogram,
            "min_ratio": self.min_ratio,
            "tolerance": self.tolerance,
        }


def sandwich_check(vm, t, tolerance=1e-9, bins=10, max_witnesses=100):
    """Check the sandwich bound and report the tightness ratios d_eps/rho."""
    if t.base != vm.base:
        raise GraphError("metric and product table use different bases")
    n = len(vm.points)
    upper_idx = np.triu_indices(n, k=1)
    rho = vm.rho[upper_idx]
    dist = vm.dmat[upper_idx]
    violations = []
    low = dist < vm.epsilon_prime * rho - tolerance
    high = dist > rho + tolerance
    xs, ys = upper_idx
    for i in np.flatnonzero(low | high).tolist()[:max_witnesses]:
        side = "lower" if low[i] else "upper"
        violations.append((vm.points[xs[i]], vm.points[ys[i]], side))
    ratios = dist / rho
    counts, _ = np.histogram(ratios, bins=bins, range=(0.0, 1.0 + tolerance))
    return SandwichReport(
        epsilon=vm.epsilon,
        epsilon_prime=vm.epsilon_prime,
        pairs=len(dist),
        violations=violations,
        ratio_histogram=counts.tolist(),
        min_ratio=float(ratios.min()) if len(ratios) else 1.0,
        tolerance=tolerance,
    )


class UnionFind:
    """Disjoint sets with union by rank and path compression."""

    def __init__(self, items):
        """Start with every item in its own set."""
        self._leader = {s: s for s in items}
        self._rank = dict.fromkeys(self._leader, 0)
        self.n_sets = len(self._leader)

    def find(self, s):
        """Return the leader of the set containing s."""
        path = [s]
        parent = self._leader[s]
        while parent != self._leader[parent]:
            path.append(parent)
            parent = self._leader[parent]
        for a in path:
            self._leader[a] = parent
        return parent

    def union(self, a, b):
        """Merge the sets containing a and b."""
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if self._rank[a] < self._rank[b]:
            a, b = b, a
        self._leader[b] = a
        if self._rank[a] == self._rank[b]:
            self._rank[a] += 1
        self.n_sets -= 1

    def groups(self):
        """Return the sets as sorted tuples, ordered by least member."""
        members = {}
        for s in sorted(self._leader):
            members.setdefault(self.find(s), []).append(s)
        return sorted((tuple(m) for m in members.values()),
                      key=lambda m: m[0])


@dataclass(frozen=True, eq=False)
class BoundaryCellSet:
    """Clusters of sphere vertices standing in for boundary points.

    Cell ids are positions in ``cells``; ``metric`` is d_eps on the
    representatives, in cell order, or None when no epsilon was given.
    """

    radius: int
    threshold2: int
    sphere: tuple
    cells: tuple
    representatives: tuple
    cell_of: dict
    metric: VisualMetric = None

    @property
    def n_cells(self):
        """Return the number of cells."""
        return len(self.cells)

    @property
    def threshold(self):
        """Return the clustering threshold as a float."""
        return self.threshold2 / 2

    def cell_distance(self, a, b):
        """Return d_eps between the representatives of cells a and b."""
        return float(self.metric.dmat[a, b])

    def to_dict(self):
        """Return a JSON-ready dict with a lower-triangular metric."""
        metric = None
        if self.metric is not None:
            metric = [self.metric.dmat[i, :i + 1].tolist()
                      for i in range(self.n_cells)]
        return {
            "R": self.radius,
            "threshold2x": self.threshold2,
            "cells": [{"id": i, "members": list(members),
                       "representative": rep}
                      for i, (members, rep)
                      in enumerate(zip(self.cells, self.representatives))],
            "epsilon": None if self.metric is None else self.metric.epsilon,
            "metric": metric,
        }


def default_threshold2(radius, delta2):
    """Return the doubled default threshold R - 4 delta, floored at 0."""
    return max(0, 2 * radius - 4 * delta2)


def adjacent_threshold2(radius):
    """Return the doubled threshold R - 1/2.

    Sphere vertices at distance 1 have doubled product 2R - 1, so cells are
    the connected runs of the sphere.
    """
    return max(0, 2 * radius - 1)


def _representative(prod2, members):
    if len(members) == 1:
        return members[0]
    block = prod2[np.ix_(members, members)].astype(float)
    np.fill_diagonal(block, np.inf)
    return members[int(block.min(axis=1).argmax())]


def boundary_cells(g, d, t, radius=None, threshold2=None, epsilon=None,
                   chains="sphere"):
    """Cluster the sphere of the given radius around the root.

    Two sphere vertices share a cell when a chain of sphere vertices joins
    them with consecutive doubled products >= threshold2.  With epsilon the
    cell metric is built, chains running over the whole sphere or, with
    chains="representatives", over representatives only.
    """
    if radius is None:
        radius = g.sphere_radius
    if threshold2 is None:
        threshold2 = default_threshold2(radius, t.delta2)
    if threshold2 < 0:
        raise GraphError("threshold must be non-negative")
    sphere = d.sphere(g.root, radius)
    if not sphere:
        raise GraphError(f"sphere of radius {radius} is empty")
    block = t.prod2[np.ix_(sphere, sphere)]
    clusters = UnionFind(sphere)
    for i, j in np.argwhere(np.triu(block >= threshold2, k=1)).tolist():
        clusters.union(sphere[i], sphere[j])
    cells = tuple(clusters.groups())
    reps = tuple(_representative(t.prod2, list(c)) for c in cells)
    cell_of = {v: i for i, members in enumerate(cells) for v in members}
    metric = None
    if epsilon is not None:
        if chains == "sphere":
            metric = chain_metric(t, epsilon, sphere).restrict(reps)
        elif chains == "representatives":
            metric = chain_metric(t, epsilon, reps)
        else:
            raise GraphError(f"unknown chain set '{chains}'")
    return BoundaryCellSet(
        radius=radius,
        threshold2=threshold2,
        sphere=sphere,
        cells=cells,
        representatives=reps,
        cell_of=cell_of,
        metric=metric,
    )


def ray_limit_cell(cells, p):
    """Return the id of the cell containing the endpoint of path p."""
    try:
        return cells.cell_of[p.target]
    except KeyError:
        raise GraphError(
            f"path ends at {p.target}, which is not on the sphere "
            f"of radius {cells.radius}") from None
