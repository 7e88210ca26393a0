"""Truncated graphs of the generated families, hop distances and geodesics.

Vertices are dense integer ids.  Every generator numbers vertices level by
level, left to right, so that "least id" tie-breaking is reproducible.
"""
import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from hypertree.errors import GraphError


@dataclass(frozen=True)
class TruncatedGraph:
    """Finite truncation of a generated infinite graph around its root.

    ``depth`` is the eccentricity of the root.  ``sphere_radius`` is the
    largest radius whose sphere is complete in the truncation; boundary
    cells live on that sphere.
    """

    adjacency: tuple
    root: int
    depth: int
    family_tag: str
    sphere_radius: int
    layer_of: tuple = None

    def __post_init__(self):
        """Check symmetry, sortedness and the absence of loops."""
        n = len(self.adjacency)
        if not 0 <= self.root < n:
            raise GraphError(f"root {self.root} is not a vertex")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise GraphError(f"neighbors of {v} are not sorted and unique")
            for u in nbrs:
                if u == v:
                    raise GraphError(f"self-loop at {v}")
                if not 0 <= u < n or v not in self.adjacency[u]:
                    raise GraphError(f"edge {v}-{u} is not symmetric")
        if self.layer_of is not None and len(self.layer_of) != n:
            raise GraphError("layer_of does not label every vertex")
        if not 0 <= self.sphere_radius <= self.depth:
            raise GraphError(
                f"sphere radius {self.sphere_radius} outside 0..{self.depth}")

    @property
    def n_vertices(self):
        """Return the number of vertices."""
        return len(self.adjacency)

    @property
    def n_edges(self):
        """Return the number of edges."""
        return sum(len(nbrs) for nbrs in self.adjacency) // 2

    @property
    def family(self):
        """Return the generator name without its parameters."""
        return self.family_tag.split(":")[0]

    def edges(self):
        """Return all edges as sorted (u, v) pairs with u < v."""
        return [(u, v) for u, nbrs in enumerate(self.adjacency)
                for v in nbrs if u < v]

    def has_edge(self, u, v):
        """Return True if u and v are adjacent."""
        return v in self.adjacency[u]

    def root_distances(self):
        """Breadth-first distances from the root; -1 marks unreachable."""
        return bfs_distances(self.adjacency, self.root)

    def is_connected(self):
        """Return True if every vertex is reachable from the root."""
        return min(self.root_distances()) >= 0


def bfs_distances(adjacency, source):
    """Return hop distances from source over an adjacency list."""
    dist = [-1] * len(adjacency)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in adjacency[v]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def graph_from_edges(n_vertices, edges, root=0, family_tag="custom",
                     sphere_radius=None, layer_of=None):
    """Build a TruncatedGraph from an edge list."""
    nbrs = [set() for _ in range(n_vertices)]
    for u, v in edges:
        if u == v:
            raise GraphError(f"self-loop at {u}")
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise GraphError(f"edge {u}-{v} names a missing vertex")
        nbrs[u].add(v)
        nbrs[v].add(u)
    adjacency = tuple(tuple(sorted(s)) for s in nbrs)
    depth = max(bfs_distances(adjacency, root))
    if sphere_radius is None:
        sphere_radius = depth
    return TruncatedGraph(
        adjacency=adjacency,
        root=root,
        depth=depth,
        family_tag=family_tag,
        sphere_radius=sphere_radius,
        layer_of=None if layer_of is None else tuple(layer_of),
    )


def generate_example1(depth):
    """Layered dyadic strip: layer k has 2^(k-1)+1 vertices, k = 1..depth.

    Neighbors inside a layer are consecutive; x(k, i) is joined to
    x(k+1, 2(i-1)+1).  The root is x(1, 1).
    """
    if depth < 1:
        raise GraphError(
            "example1 needs depth >= 1: layer 0 would have 2^(-1)+1 vertices")
    offsets = []
    layer_of = []
    for k in range(1, depth + 1):
        offsets.append(len(layer_of))
        layer_of.extend([k] * (2 ** (k - 1) + 1))
    edges = []
    for k in range(1, depth + 1):
        base = offsets[k - 1]
        size = 2 ** (k - 1) + 1
        edges.extend((base + i, base + i + 1) for i in range(size - 1))
        if k < depth:
            below = offsets[k]
            edges.extend((base + i, below + 2 * i) for i in range(size))
    return graph_from_edges(
        len(layer_of), edges, root=0, family_tag=f"example1:{depth}",
        sphere_radius=depth - 1, layer_of=layer_of)


def generate_example2(depth):
    """Cliques V_0..V_depth with |V_k| = 2^k and binary parent links.

    The children of the i-th vertex of V_k are vertices 2i and 2i+1 of
    V_(k+1).
    """
    if depth < 0:
        raise GraphError("example2 needs depth >= 0")
    edges = []
    layer_of = []
    for k in range(depth + 1):
        base = 2 ** k - 1
        layer_of.extend([k] * 2 ** k)
        edges.extend(itertools.combinations(range(base, base + 2 ** k), 2))
        if k < depth:
            below = 2 ** (k + 1) - 1
            for i in range(2 ** k):
                edges.append((base + i, below + 2 * i))
                edges.append((base + i, below + 2 * i + 1))
    return graph_from_edges(
        len(layer_of), edges, root=0, family_tag=f"example2:{depth}",
        sphere_radius=depth, layer_of=layer_of)


def generate_tree(branching, depth):
    """Complete rooted tree; the children of v are b*v+1 .. b*v+b."""
    if branching < 2 or depth < 1:
        raise GraphError("tree needs branching >= 2 and depth >= 1")
    n_vertices = (branching ** (depth + 1) - 1) // (branching - 1)
    layer_of = []
    for k in range(depth + 1):
        layer_of.extend([k] * branching ** k)
    edges = [((v - 1) // branching, v) for v in range(1, n_vertices)]
    return graph_from_edges(
        n_vertices, edges, root=0, family_tag=f"tree:{branching}:{depth}",
        sphere_radius=depth, layer_of=layer_of)


def generate_cycle(length):
    """Cycle on length vertices rooted at 0."""
    if length < 3:
        raise GraphError("cycle needs at least 3 vertices")
    edges = [(v, (v + 1) % length) for v in range(length)]
    return graph_from_edges(length, edges, family_tag=f"cycle:{length}")


def generate_path(length):
    """Path 0-1-...-length rooted at 0."""
    if length < 1:
        raise GraphError("path needs length >= 1")
    edges = [(v, v + 1) for v in range(length)]
    return graph_from_edges(length + 1, edges, family_tag=f"path:{length}")


def generate(family, depth, branching=2):
    """Dispatch to the generator named by family."""
    if family == "example1":
        return generate_example1(depth)
    if family == "example2":
        return generate_example2(depth)
    if family == "tree":
        return generate_tree(branching, depth)
    if family == "cycle":
        return generate_cycle(depth)
    if family == "path":
        return generate_path(depth)
    raise GraphError(f"unknown family '{family}'")


def arc_position(g, v):
    """Dyadic position in [0, 1] of an example1 vertex along its layer."""
    if g.family != "example1":
        raise GraphError("arc positions exist only for example1")
    k = g.layer_of[v]
    offset = 2 ** (k - 1) - 1 + (k - 1)
    return Fraction(v - offset, 2 ** (k - 1))


@dataclass(frozen=True, eq=False)
class DistanceOracle:
    """Dense matrix of exact hop distances."""

    dist: np.ndarray

    def __call__(self, x, y):
        """Return d(x, y)."""
        return int(self.dist[x, y])

    @property
    def n_vertices(self):
        """Return the number of vertices."""
        return self.dist.shape[0]

    def sphere(self, center, radius):
        """Return the vertices at exactly radius from center."""
        return tuple(np.flatnonzero(self.dist[center] == radius).tolist())

    def diameter(self):
        """Return the largest distance."""
        return int(self.dist.max())


def all_pairs_distances(g):
    """Return the DistanceOracle of g, one breadth-first search per source."""
    edges = g.edges()
    n = g.n_vertices
    rows = np.array([u for u, _ in edges] + [v for _, v in edges], dtype=int)
    cols = np.array([v for _, v in edges] + [u for u, _ in edges], dtype=int)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dist = shortest_path(graph, directed=False, unweighted=True)
    unreachable = np.argwhere(np.isinf(dist))
    if unreachable.size:
        x, y = unreachable[0].tolist()
        raise GraphError(f"vertices {x} and {y} are not connected")
    dist = dist.astype(np.int32)
    dist.setflags(write=False)
    return DistanceOracle(dist)


@dataclass(frozen=True)
class PathInGraph:
    """Vertex sequence v0..vk of consecutive neighbors.

    ``geodesic`` is None when no distance oracle was available.
    """

    vertices: tuple
    geodesic: bool = None

    @property
    def length(self):
        """Return the number of edges."""
        return len(self.vertices) - 1

    @property
    def source(self):
        """Return the first vertex."""
        return self.vertices[0]

    @property
    def target(self):
        """Return the last vertex."""
        return self.vertices[-1]

    def edges(self):
        """Return the edges as (u, v) pairs in path order."""
        return list(zip(self.vertices, self.vertices[1:]))


def make_path(g, d, vertices):
    """Validate a vertex sequence and flag whether it is a geodesic."""
    vertices = tuple(vertices)
    if not vertices:
        raise GraphError("a path needs at least one vertex")
    for u, v in zip(vertices, vertices[1:]):
        if not g.has_edge(u, v):
            raise GraphError(f"{u} and {v} are not adjacent")
    geodesic = None
    if d is not None:
        geodesic = len(vertices) - 1 == d(vertices[0], vertices[-1])
    return PathInGraph(vertices, geodesic)


def one_geodesic(g, d, x, y):
    """Return the lexicographically least geodesic from x to y."""
    path = [x]
    current = x
    while current != y:
        step = d.dist[current, y] - 1
        current = next(u for u in g.adjacency[current] if d.dist[u, y] == step)
        path.append(current)
    return PathInGraph(tuple(path), True)


@dataclass(frozen=True)
class GeodesicSet:
    """Geodesics between two vertices, possibly cut off at a cap."""

    paths: tuple
    count: int
    truncated: bool


def _walk_geodesics(g, dist, prefix, y):
    current = prefix[-1]
    if current == y:
        yield tuple(prefix)
        return
    step = dist[current, y] - 1
    for u in g.adjacency[current]:
        if dist[u, y] == step:
            prefix.append(u)
            yield from _walk_geodesics(g, dist, prefix, y)
            prefix.pop()


def all_geodesics(g, d, x, y, cap):
    """Enumerate geodesics from x to y in lexicographic order, up to cap.

    When more than cap geodesics exist the result is flagged truncated and
    its count is a lower bound.
    """
    found = list(itertools.islice(_walk_geodesics(g, d.dist, [x], y),
                                  cap + 1))
    paths = tuple(PathInGraph(p, True) for p in found[:cap])
    return GeodesicSet(paths, len(paths), len(found) > cap)


def count_geodesics(g, d, x, y):
    """Return the exact number of geodesics from x to y."""
    total = d(x, y)
    between = [v for v in range(g.n_vertices)
               if d.dist[x, v] + d.dist[v, y] == total]
    between.sort(key=lambda v: d.dist[x, v])
    counts = dict.fromkeys(between, 0)
    counts[x] = 1
    for v in between:
        if v == x:
            continue
        counts[v] = sum(counts[u] for u in g.adjacency[v]
                        if u in counts and d.dist[x, u] == d.dist[x, v] - 1)
    return counts[y]


def bfs_levels(d, root):
    """Return the spheres around root as tuples, radius 0 upwards."""
    radius = int(d.dist[root].max())
    return [d.sphere(root, r) for r in range(radius + 1)]


def least_bfs_parent(g, d, root, v):
    """Return the least-id neighbor of v one step closer to root."""
    return next(u for u in g.adjacency[v]
                if d.dist[root, u] == d.dist[root, v] - 1)


def koenig_ray(levels, pred, d=None):
    """Walk pred back from the least-id vertex of the deepest level.

    levels is the partition V_0..V_R and pred maps each vertex of V_n
    (n >= 1) to a neighbor in V_(n-1), either as a mapping or a callable.
    """
    if not levels:
        raise GraphError("no levels given")
    for n, level in enumerate(levels):
        if not level:
            raise GraphError(f"level {n} is empty")
    members = [set(level) for level in levels]
    lookup = pred if callable(pred) else pred.__getitem__
    current = min(levels[-1])
    path = [current]
    for n in range(len(levels) - 1, 0, -1):
        current = lookup(current)
        if current not in members[n - 1]:
            raise GraphError(f"predecessor {current} is not in level {n - 1}")
        path.append(current)
    path.reverse()
    geodesic = None
    if d is not None:
        geodesic = len(path) - 1 == d(path[0], path[-1])
    return PathInGraph(tuple(path), geodesic)
