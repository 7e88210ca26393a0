"""Shared paths and brute-force oracles for the hypertree tests."""
import itertools
import json
import math
from pathlib import Path


# Directory containing unit tests
TEST_DIR = Path(__file__).parent

# Directory containing unit test input files
TESTDATA_DIR = TEST_DIR/"testdata"


def write_config(directory, data):
    """Create directory/config.json holding data and return the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory/"config.json").open("w", encoding="utf-8") as outfile:
        json.dump(data, outfile)
    return directory


def brute_delta2(dist, base):
    """Return the doubled four-point delta at base by plain triple loops."""
    n = len(dist)

    def prod2(x, y):
        return int(dist[x][base]) + int(dist[y][base]) - int(dist[x][y])

    best = 0
    for x in range(n):
        for y in range(n):
            for z in range(n):
                best = max(best,
                           min(prod2(x, z), prod2(y, z)) - prod2(x, y))
    return best


def brute_chain_metric(rho):
    """Return the infimum over chains of summed rho, by path relaxation."""
    n = len(rho)
    best = [[float(rho[i][j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        best[i][i] = 0.0
    changed = True
    while changed:
        changed = False
        for i, j, k in itertools.product(range(n), repeat=3):
            through = best[i][k] + best[k][j]
            if through < best[i][j] - 1e-15:
                best[i][j] = through
                changed = True
    return best


def brute_packing(dmat, alpha, beta):
    """Return the largest subset with pairwise distances in [alpha, beta]."""
    n = len(dmat)
    for size in range(n, 0, -1):
        for subset in itertools.combinations(range(n), size):
            if all(alpha - 1e-12 <= dmat[i][j] <= beta + 1e-12
                   for i, j in itertools.combinations(subset, 2)):
                return size
    return 0


def brute_r_multiplicity(dmat, family, r):
    """Return the most members met by any point subset of diameter <= r."""
    n = len(dmat)
    best = 0
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            if any(dmat[i][j] > r + 1e-12
                   for i, j in itertools.combinations(subset, 2)):
                continue
            met = sum(1 for member in family if set(member) & set(subset))
            best = max(best, met)
    return best


def thin_all_geodesics(g, d, x, y, z):
    """Return the least thinness of triangle xyz over all side choices."""
    def paths(a, b):
        def walk(prefix):
            current = prefix[-1]
            if current == b:
                yield tuple(prefix)
                return
            for u in g.adjacency[current]:
                if d(u, b) == d(current, b) - 1:
                    yield from walk(prefix + [u])
        return list(walk([a]))

    best = math.inf
    for xy, yz, xz in itertools.product(paths(x, y), paths(y, z),
                                        paths(x, z)):
        sides = (xy, yz, xz)
        value = 0
        for i in range(3):
            others = sides[(i + 1) % 3] + sides[(i + 2) % 3]
            for v in sides[i]:
                value = max(value, min(d(v, w) for w in others))
        best = min(best, value)
    return best
