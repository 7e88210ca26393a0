"""Packing counts, doubling constants and colored ball covers.

Everything here works on a FiniteMetric, a dense distance matrix over an
ordered tuple of labels.  Indices into the matrix are used internally and
labels appear in reports.
"""
import itertools
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from hypertree.errors import ColorOverflow, SeparationError

TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMetric:
    """Distance matrix over labelled points."""

    points: tuple
    dmat: np.ndarray

    @classmethod
    def from_visual(cls, vm):
        """Wrap a VisualMetric."""
        return cls(tuple(vm.points), vm.dmat)

    @classmethod
    def from_oracle(cls, d, points=None):
        """Restrict a DistanceOracle to points (all vertices by default)."""
        if points is None:
            points = range(d.n_vertices)
        points = tuple(points)
        return cls(points, d.dist[np.ix_(points, points)].astype(float))

    def __len__(self):
        """Return the number of points."""
        return len(self.points)

    def ball(self, center, radius):
        """Return indices within radius of the index center."""
        return np.flatnonzero(self.dmat[center] <= radius + TOLERANCE)

    def positive_distances(self):
        """Return the sorted distinct positive distances."""
        upper = self.dmat[np.triu_indices(len(self), k=1)]
        return np.unique(upper[upper > TOLERANCE])

    def labels(self, indices):
        """Map indices to point labels."""
        return [self.points[i] for i in indices]


@dataclass(frozen=True)
class PackingCount:
    """S(alpha, beta) with a witness subset."""

    alpha: float
    beta: float
    value: int
    witness: tuple
    exact: bool


def packing_count(metric, alpha, beta, exact_cap=64):
    """Return the largest subset with all pairwise distances in [alpha, beta].

    Exact maximum-clique search on the compatibility graph up to exact_cap
    points; a greedy lower bound beyond.
    """
    if not 0 < alpha <= beta:
        raise ValueError(f"need 0 < alpha <= beta, got {alpha}, {beta}")
    n = len(metric)
    if n == 0:
        return PackingCount(alpha, beta, 0, (), True)
    fits = (metric.dmat >= alpha - TOLERANCE) & \
        (metric.dmat <= beta + TOLERANCE)
    if n <= exact_cap:
        compatible = nx.Graph()
        compatible.add_nodes_from(range(n))
        compatible.add_edges_from(
            (i, j) for i, j in np.argwhere(np.triu(fits, k=1)).tolist())
        clique, _ = nx.max_weight_clique(compatible, weight=None)
        chosen = sorted(clique)
        exact = True
    else:
        chosen = []
        for i in range(n):
            if all(fits[i, j] for j in chosen):
                chosen.append(i)
        exact = False
    return PackingCount(alpha, beta, len(chosen),
                        tuple(metric.labels(chosen)), exact)


@dataclass
class PackingReport:
    """Packing counts over a scale grid and the fitted exponent."""

    pairs: list
    fitted_exponent: float
    fit_constant: float
    residuals: list

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "pairs": [{"alpha": p.alpha, "beta": p.beta, "S": p.value,
                       "exact": p.exact, "witness": list(p.witness)}
                      for p in self.pairs],
            "fitted_exponent": self.fitted_exponent,
            "fit_constant": self.fit_constant,
            "residuals": self.residuals,
        }


def default_packing_grid(metric, steps=4):
    """Return (alpha, beta) pairs with beta/alpha = 1, 2, 4, ..."""
    positive = metric.positive_distances()
    low = float(positive[0]) if len(positive) else 1.0
    high = float(positive[-1]) if len(positive) else 1.0
    steps = max(steps, math.ceil(math.log2(high / low)) + 1)
    return [(low, low * 2 ** k) for k in range(steps)]


def assouad_estimate(metric, scale_grid=None, exact_cap=64):
    """Fit log S(alpha, beta) = s log(beta/alpha) + log C by least squares."""
    if scale_grid is None:
        scale_grid = default_packing_grid(metric)
    if len(scale_grid) < 4:
        raise ValueError("assouad_estimate needs at least 4 scale pairs")
    ratios = [math.log(beta / alpha) for alpha, beta in scale_grid]
    if len(set(ratios)) < 2:
        raise ValueError("scale grid has a single ratio beta/alpha")
    pairs = [packing_count(metric, alpha, beta, exact_cap)
             for alpha, beta in scale_grid]
    logs = np.log([max(1, p.value) for p in pairs])
    slope, intercept = np.polyfit(ratios, logs, 1)
    fitted = slope * np.asarray(ratios) + intercept
    return PackingReport(
        pairs=pairs,
        fitted_exponent=float(slope),
        fit_constant=float(np.exp(intercept)),
        residuals=(logs - fitted).tolist(),
    )


@dataclass(frozen=True)
class HalfCover:
    """A cover of one r-ball by balls of radius r/2."""

    center: object
    radius: float
    ball: tuple
    centers: tuple
    exact: bool


@dataclass
class DoublingReport:
    """Smallest kappa such that every tested r-ball needs <= 2^kappa halves."""

    kappa: int
    worst: int
    covers: list

    @property
    def n(self):
        """Return 2^kappa."""
        return 2 ** self.kappa

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "kappa": self.kappa,
            "N": self.n,
            "worst": self.worst,
            "covers": [{"center": c.center, "radius": c.radius,
                        "ball": list(c.ball), "centers": list(c.centers),
                        "exact": c.exact} for c in self.covers],
        }


def default_radius_grid(metric, steps=8):
    """Return up to steps radii log-spaced over the positive distances."""
    positive = metric.positive_distances()
    if not len(positive):
        return []
    if positive[0] == positive[-1]:
        return [float(positive[0])]
    grid = np.geomspace(positive[0], positive[-1], steps)
    return sorted(set(float(r) for r in grid))


def _greedy_set_cover(targets, sets):
    left = set(targets)
    chosen = []
    while left:
        best = max(sets, key=lambda k: (len(sets[k] & left), -k))
        chosen.append(best)
        left -= sets[best]
    return sorted(chosen)


def minimal_half_cover(metric, center, radius, exact_cap=24):
    """Cover the radius-ball around center with as few radius/2 balls.

    Candidate centers are points within 3 radius/2 of center; exact search
    runs when there are at most exact_cap candidates.
    """
    ball = set(metric.ball(center, radius).tolist())
    half = radius / 2
    candidates = metric.ball(center, radius + half).tolist()
    sets = {q: set(metric.ball(q, half).tolist()) & ball for q in candidates}
    greedy = _greedy_set_cover(ball, sets)
    chosen, exact = greedy, False
    if len(candidates) <= exact_cap:
        exact = True
        for size in range(1, len(greedy)):
            found = next(
                (combo for combo in itertools.combinations(candidates, size)
                 if set().union(*(sets[q] for q in combo)) >= ball), None)
            if found is not None:
                chosen = list(found)
                break
    return HalfCover(
        center=metric.points[center],
        radius=float(radius),
        ball=tuple(metric.labels(sorted(ball))),
        centers=tuple(metric.labels(chosen)),
        exact=exact,
    )


def doubling_kappa(metric, scale_grid=None, exact_cap=24):
    """Estimate the doubling exponent over a grid of radii."""
    if scale_grid is None:
        scale_grid = default_radius_grid(metric)
    covers = [minimal_half_cover(metric, c, r, exact_cap)
              for r in scale_grid for c in range(len(metric))]
    worst = max((len(c.centers) for c in covers), default=1)
    return DoublingReport(
        kappa=max(0, math.ceil(math.log2(worst))),
        worst=worst,
        covers=covers,
    )


def r_multiplicity(metric, family, r):
    """Return the most members of family met by one set of diameter <= r.

    family is a list of index sets.  Diameter-r sets are cliques of the
    graph joining points at distance <= r, so maximal cliques suffice.
    Returns (value, witness labels).
    """
    close = nx.Graph()
    close.add_nodes_from(range(len(metric)))
    pairs = np.argwhere(np.triu(metric.dmat <= r + TOLERANCE, k=1))
    close.add_edges_from(tuple(p) for p in pairs.tolist())
    owners = {}
    for k, member in enumerate(family):
        for p in member:
            owners.setdefault(int(p), set()).add(k)
    best = (0, ())
    for clique in nx.find_cliques(close):
        met = set().union(*(owners.get(p, set()) for p in clique))
        if len(met) > best[0]:
            best = (len(met), tuple(metric.labels(sorted(clique))))
    return best


@dataclass
class BallCover:
    """Closed balls of one radius with color classes and certificates."""

    radius: float
    kappa: int
    centers: tuple
    colors: tuple
    seeds: tuple
    certificates: dict

    @property
    def n_colors(self):
        """Return the number of colors used."""
        return len(set(self.colors))

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "r": self.radius,
            "kappa": self.kappa,
            "centers": list(self.centers),
            "colors": list(self.colors),
            "seeds": list(self.seeds),
            "certificates": self.certificates,
        }


def check_separated(metric, seeds, r):
    """Raise SeparationError unless the seed indices are more than r apart."""
    for i, j in itertools.combinations(seeds, 2):
        if metric.dmat[i, j] <= r + TOLERANCE:
            raise SeparationError(
                (metric.points[i], metric.points[j]),
                float(metric.dmat[i, j]), r)


def greedy_net(metric, r, seeds=()):
    """Grow seeds to a maximal r-separated index set in index order."""
    centers = list(seeds)
    for p in range(len(metric)):
        if p in centers:
            continue
        if all(metric.dmat[p, c] > r + TOLERANCE for c in centers):
            centers.append(p)
    return centers


def ls23_cover(metric, r, kappa, seeds=()):
    """Build an r-ball cover containing seeds, colored in 2^kappa+1 classes.

    Same-color centers are more than 3r apart, so each class has
    r-multiplicity at most 1.  seeds are indices into metric.
    """
    seeds = [int(s) for s in seeds]
    check_separated(metric, seeds, r)
    centers = greedy_net(metric, r, seeds)
    palette = 2 ** kappa + 1
    colors = []
    for k, c in enumerate(centers):
        conflicts = [centers[i] for i in range(k)
                     if metric.dmat[c, centers[i]] <= 3 * r + TOLERANCE]
        taken = {colors[i] for i in range(k)
                 if metric.dmat[c, centers[i]] <= 3 * r + TOLERANCE}
        free = next((x for x in range(palette) if x not in taken), None)
        if free is None:
            raise ColorOverflow(metric.points[c],
                                metric.labels(conflicts), kappa)
        colors.append(free)
    balls = [metric.ball(c, r).tolist() for c in centers]
    covered = set().union(*balls) if balls else set()
    per_color = []
    for color in sorted(set(colors)):
        members = [b for b, x in zip(balls, colors) if x == color]
        per_color.append(r_multiplicity(metric, members, r)[0])
    total, witness = r_multiplicity(metric, balls, r)
    return BallCover(
        radius=float(r),
        kappa=kappa,
        centers=tuple(metric.labels(centers)),
        colors=tuple(colors),
        seeds=tuple(metric.labels(seeds)),
        certificates={
            "cover": len(covered) == len(metric),
            "per_color_mult": per_color,
            "total_mult": total,
            "total_mult_witness": list(witness),
            "bound": 2 ** kappa,
        },
    )


def center_indices(metric, cover):
    """Return the matrix indices of the centers of cover."""
    return [metric.points.index(c) for c in cover.centers]


def dimension_report(metric, packing_grid=None, radius_grid=None,
                     packing_exact=64, setcover_exact=24):
    """Assemble packing, Assouad and doubling estimates for one metric."""
    doubling = doubling_kappa(metric, radius_grid, setcover_exact)
    report = {"points": len(metric), "doubling": doubling.to_dict(),
              "caps": {"packing_exact": packing_exact,
                       "setcover_exact": setcover_exact}}
    if len(metric) > 1:
        report["assouad"] = assouad_estimate(
            metric, packing_grid, packing_exact).to_dict()
    return doubling, report
