"""Gromov products, the four-point delta, and the checks built on them.

Products are stored doubled, so every half-integer is an exact integer and
nothing in the delta pipeline touches floating point.
"""
import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from hypertree.graph import one_geodesic


def parallel_map(func, items, threads=1):
    """Map func over items, in order, on at most threads workers."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def stratified_sample(radii, size, seed):
    """Pick about size vertices spread over the distance classes in radii.

    Every class gets at least one vertex while the budget lasts; the rest is
    shared in proportion to class sizes.  Output is sorted.
    """
    radii = np.asarray(radii)
    rng = np.random.default_rng(seed)
    classes = [np.flatnonzero(radii == r) for r in np.unique(radii)]
    total = len(radii)
    chosen = []
    for members in classes:
        quota = max(1, round(size * len(members) / total))
        quota = min(quota, len(members))
        chosen.extend(rng.choice(members, size=quota, replace=False).tolist())
    return sorted(chosen)


def doubled_products(dist, base):
    """Return the matrix 2 * (x, y)_base."""
    column = dist[:, base].astype(np.int64)
    prod2 = column[:, None] + column[None, :] - dist.astype(np.int64)
    return prod2


def _defect_scan(prod2, zs):
    best = (0, (0, 0, 0))
    for z in zs:
        column = prod2[:, z]
        defect = np.minimum.outer(column, column) - prod2
        flat = int(defect.argmax())
        value = int(defect.flat[flat])
        if value > best[0]:
            x, y = divmod(flat, prod2.shape[0])
            best = (value, (x, y, int(z)))
    return best


def _chunks(items, count):
    items = list(items)
    size = max(1, -(-len(items) // max(1, count)))
    return [items[i:i + size] for i in range(0, len(items), size)]


def max_defect(prod2, zs, threads=1):
    """Return the largest doubled four-point defect and a witness triple.

    The defect of (x, y, z) is min{(x,z), (y,z)} - (x,y); x and y range over
    all vertices, z over zs.  Ties keep the first witness in scan order.
    """
    partial = parallel_map(lambda chunk: _defect_scan(prod2, chunk),
                           _chunks(zs, threads), threads)
    best = (0, (0, 0, 0))
    for value, witness in partial:
        if value > best[0]:
            best = (value, witness)
    return best


@dataclass(frozen=True, eq=False)
class GromovTable:
    """All Gromov products at one base vertex plus the tight delta there."""

    base: int
    prod2: np.ndarray
    delta2: int
    witness: tuple
    sampled: bool = False
    seed: int = None

    @property
    def delta(self):
        """Return the four-point delta as a Fraction."""
        return Fraction(self.delta2, 2)

    def product(self, x, y):
        """Return (x, y)_base as a Fraction."""
        return Fraction(int(self.prod2[x, y]), 2)


def gromov_table(d, o, cap=600, sample=64, seed=0, threads=1):
    """Compute the product table at o and its four-point delta.

    The triple scan is exhaustive up to cap vertices; beyond that the third
    point z is drawn from a stratified sample of sample vertices.
    """
    prod2 = doubled_products(d.dist, o)
    prod2.setflags(write=False)
    n = d.n_vertices
    sampled = n > cap
    zs = stratified_sample(d.dist[o], sample, seed) if sampled else range(n)
    delta2, witness = max_defect(prod2, zs, threads)
    return GromovTable(
        base=o,
        prod2=prod2,
        delta2=max(0, delta2),
        witness=witness,
        sampled=sampled,
        seed=seed if sampled else None,
    )


@dataclass
class TransferReport:
    """Outcome of the base-point transfer scan."""

    delta2: int
    max_slack2: int = 0
    violations: list = field(default_factory=list)
    violation_count: int = 0
    bases: int = 0
    sampled: bool = False
    seed: int = None

    @property
    def max_slack(self):
        """Return the worst observed defect as a Fraction."""
        return Fraction(self.max_slack2, 2)

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "delta2x": self.delta2,
            "max_slack2x": self.max_slack2,
            "violations": [dict(zip("wxyz", v)) for v in self.violations],
            "violation_count": self.violation_count,
            "bases": self.bases,
            "sampled": self.sampled,
            "seed": self.seed,
        }


def basepoint_transfer_check(d, o, delta2, cap=600, sample=64, seed=0,
                             threads=1, max_witnesses=100):
    """Check (x,y)_w >= min{(x,z)_w, (y,z)_w} - 2 delta at every base w.

    delta2 is the doubled delta measured at o.  Bases are exhaustive up to
    cap vertices, otherwise a stratified sample around o.
    """
    n = d.n_vertices
    sampled = n > cap
    bases = stratified_sample(d.dist[o], sample, seed) if sampled \
        else list(range(n))
    limit = 2 * delta2

    def scan(w):
        prod2 = doubled_products(d.dist, w)
        worst = 0
        found = []
        for z in range(n):
            column = prod2[:, z]
            defect = np.minimum.outer(column, column) - prod2
            worst = max(worst, int(defect.max()))
            if worst > limit:
                for x, y in np.argwhere(defect > limit).tolist():
                    found.append((w, x, y, z))
        return worst, found

    report = TransferReport(delta2=delta2, bases=len(bases), sampled=sampled,
                            seed=seed if sampled else None)
    for worst, found in parallel_map(scan, bases, threads):
        report.max_slack2 = max(report.max_slack2, worst)
        report.violation_count += len(found)
        room = max_witnesses - len(report.violations)
        report.violations.extend(found[:max(0, room)])
    return report


@dataclass
class ThinTriangleReport:
    """Largest distance from a side to the union of the other two sides."""

    value: int
    witness: tuple
    triples: int
    sampled: bool
    seed: int = None

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "value": self.value,
            "witness": list(self.witness),
            "triples": self.triples,
            "sampled": self.sampled,
            "seed": self.seed,
        }


class GeodesicCache:
    """One fixed geodesic per unordered pair, computed on demand."""

    def __init__(self, g, d, choice=one_geodesic):
        """Remember the graph, the oracle and the geodesic rule."""
        self.g = g
        self.d = d
        self.choice = choice
        self._paths = {}

    def side(self, a, b):
        """Return the vertices of the geodesic chosen between a and b."""
        key = (a, b) if a <= b else (b, a)
        if key not in self._paths:
            self._paths[key] = self.choice(self.g, self.d, *key).vertices
        return self._paths[key]


def triangle_thinness(dist, sides):
    """Return the thinness of a triangle given its three sides."""
    value = 0
    for i in range(3):
        here = list(sides[i])
        others = list(sides[(i + 1) % 3]) + list(sides[(i + 2) % 3])
        gaps = dist[np.ix_(here, others)].min(axis=1)
        value = max(value, int(gaps.max()))
    return value


def _sample_triples(n, size, seed):
    rng = np.random.default_rng(seed)
    triples = set()
    budget = min(size, n * (n - 1) * (n - 2) // 6)
    while len(triples) < budget:
        triple = tuple(sorted(rng.choice(n, size=3, replace=False).tolist()))
        triples.add(triple)
    return sorted(triples)


def thin_triangle_delta(g, d, geodesic_choice=one_geodesic, cap=60,
                        sample=2000, seed=0):
    """Return the thin-triangle constant with sides fixed by geodesic_choice.

    All corner triples are scanned up to cap vertices, otherwise a sorted
    sample of sample distinct triples.
    """
    n = g.n_vertices
    sampled = n > cap
    triples = _sample_triples(n, sample, seed) if sampled \
        else list(itertools.combinations(range(n), 3))
    cache = GeodesicCache(g, d, geodesic_choice)
    best = (0, (g.root, g.root, g.root))
    for x, y, z in triples:
        value = triangle_thinness(
            d.dist, (cache.side(x, y), cache.side(y, z), cache.side(x, z)))
        if value > best[0]:
            best = (value, (x, y, z))
    return ThinTriangleReport(
        value=best[0],
        witness=best[1],
        triples=len(triples),
        sampled=sampled,
        seed=seed if sampled else None,
    )


@dataclass
class GeodesicProductReport:
    """Comparison of (x,y)_o with the distance from o to a geodesic [x,y].

    Slacks are doubled: 2 d(o, [x,y]) - 2 (x,y)_o.
    """

    delta2: int
    histogram: dict
    violations: list
    pairs: int

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "delta2x": self.delta2,
            "slack2x_histogram": {str(k): v for k, v
                                  in sorted(self.histogram.items())},
            "violations": [{"x": x, "y": y, "slack2x": s}
                           for x, y, s in self.violations],
            "pairs": self.pairs,
        }


def product_vs_geodesic_check(g, d, t, geodesic_choice=one_geodesic,
                              sources=None, delta2=None, max_witnesses=100):
    """Check (x,y)_o <= d(o,[x,y]) <= (x,y)_o + 2 delta + 1 on every pair.

    delta2 is the doubled four-point constant over all bases, by default the
    one measured at o.  Walking [x,y] vertex by vertex can overshoot by one
    step; for a half-integral product parity trims that to a half.  With
    sources, x ranges over those vertices only and y over all of them.
    """
    o = t.base
    if delta2 is None:
        delta2 = t.delta2
    cache = GeodesicCache(g, d, geodesic_choice)
    histogram = Counter()
    violations = []
    pairs = 0
    xs = range(g.n_vertices) if sources is None else sorted(set(sources))
    for x in xs:
        for y in range(x if sources is None else 0, g.n_vertices):
            pairs += 1
            side = list(cache.side(x, y))
            reach = int(d.dist[o, side].min())
            prod2 = int(t.prod2[x, y])
            slack2 = 2 * reach - prod2
            histogram[slack2] += 1
            upper = 2 * delta2 + 2 - prod2 % 2
            if (slack2 < 0 or slack2 > upper) \
                    and len(violations) < max_witnesses:
                violations.append((x, y, slack2))
    return GeodesicProductReport(
        delta2=delta2,
        histogram=dict(histogram),
        violations=violations,
        pairs=pairs,
    )


def delta_report(t, transfer=None, thin=None, geodesic=None, config_hash=None):
    """Assemble the JSON document for the delta stage."""
    x, y, z = t.witness
    checks = {}
    if transfer is not None:
        checks["basepoint_transfer"] = transfer.to_dict()
    if thin is not None:
        checks["thin_triangle"] = thin.to_dict()
    if geodesic is not None:
        checks["product_vs_geodesic"] = geodesic.to_dict()
    return {
        "base": t.base,
        "delta2x": t.delta2,
        "witnesses": [{"x": x, "y": y, "z": z}],
        "sampled": t.sampled,
        "seed": t.seed,
        "checks": checks,
        "config_hash": config_hash,
    }
