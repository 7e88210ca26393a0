"""Staged construction of a spanning tree with few rays per boundary cell.

Stage 0 holds one geodesic from the root to the first cell.  Each later
stage covers the cells with balls of radius eps/16, refines the selected
cells to an eps/(128 N)-net and splices one new branch per new cell onto
the tree, always reusing the tail of an existing ray.  Completion then adds
the remaining vertices without opening new routes to the sphere.
"""
import math
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

from hypertree.covering import (
    FiniteMetric, TOLERANCE, greedy_net, ls23_cover, r_multiplicity,
)
from hypertree.errors import ColorOverflow, CoverError, GraphError, RayError
from hypertree.graph import bfs_distances, one_geodesic


class RootedTree:
    """Partial or spanning tree stored as a parent map; root maps to itself."""

    def __init__(self, root, parent=None):
        """Start from the root alone or from an existing parent map."""
        self.root = root
        self.parent = dict(parent) if parent else {root: root}

    def __contains__(self, v):
        """Return True if v is a member."""
        return v in self.parent

    def __len__(self):
        """Return the number of members."""
        return len(self.parent)

    def copy(self):
        """Return an independent copy."""
        return RootedTree(self.root, self.parent)

    def members(self):
        """Return the members in id order."""
        return sorted(self.parent)

    def edges(self):
        """Return the tree edges as (parent, child) pairs in child order."""
        return [(self.parent[v], v) for v in sorted(self.parent)
                if v != self.root]

    def attach(self, parent, child):
        """Hang child below the member parent."""
        if parent not in self.parent:
            raise GraphError(f"{parent} is not in the tree")
        if child in self.parent:
            raise GraphError(f"{child} is already in the tree")
        self.parent[child] = parent

    def attach_path(self, vertices):
        """Hang a path whose first vertex is a member and the rest are not."""
        for u, v in zip(vertices, vertices[1:]):
            self.attach(u, v)

    def root_path(self, v):
        """Return the tree path from the root to v."""
        path = [v]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        path.reverse()
        return tuple(path)

    def tree_path(self, a, b):
        """Return the unique tree path from a to b."""
        up_a = self.root_path(a)
        up_b = self.root_path(b)
        k = 0
        while k < min(len(up_a), len(up_b)) and up_a[k] == up_b[k]:
            k += 1
        return tuple(reversed(up_a[k - 1:])) + up_b[k:]

    def depth_of(self, v):
        """Return the tree distance from the root to v."""
        return len(self.root_path(v)) - 1

    def leaves(self):
        """Return members that are nobody's parent."""
        parents = {p for v, p in self.parent.items() if v != self.root}
        return [v for v in sorted(self.parent) if v not in parents]

    def parents_array(self, n_vertices):
        """Return parent ids per vertex, -1 for non-members."""
        return [self.parent.get(v, -1) for v in range(n_vertices)]

    def validate(self, g):
        """Return a list of problems: foreign edges and unreachable members."""
        problems = []
        for p, v in self.edges():
            if not g.has_edge(p, v):
                problems.append(f"tree edge {p}-{v} is not a graph edge")
        for start in self.parent:
            seen = {start}
            v = start
            while v != self.root:
                v = self.parent[v]
                if v in seen:
                    problems.append(f"cycle through {v}")
                    break
                seen.add(v)
        return problems

    def is_spanning(self, g):
        """Return True if every vertex is a member and the tree is valid."""
        return len(self.parent) == g.n_vertices and not self.validate(g)


def multiplicity_bound(n):
    """Return N^(8 + log2(8N)) for a power of two N."""
    exponent = 8 + int(math.log2(8 * n))
    return n ** exponent


def net_bound(n):
    """Return N^(log2(8N)), the multiplicity allowed for a stage net."""
    return n ** int(math.log2(8 * n))


@dataclass(frozen=True)
class FaithfulParams:
    """Scales and limits of the staged construction.

    ``n`` is 2^kappa from the doubling estimate; ``epsilon`` and ``delta``
    are the visual parameter and the four-point delta.
    """

    epsilon0: float
    n: int
    kappa: int
    epsilon: float
    delta: float
    stage_cap: int = 8
    seed: int = 1

    @property
    def delta_prime(self):
        """Return exp(5 eps delta)."""
        return math.exp(5 * self.epsilon * self.delta)

    def next_epsilon(self, epsilon):
        """Return eps/(128 N); exact for N a power of two."""
        return epsilon / (128 * self.n)

    def schedule(self, stages):
        """Return eps_0 .. eps_stages."""
        values = [self.epsilon0]
        for _ in range(stages):
            values.append(self.next_epsilon(values[-1]))
        return values


@dataclass(frozen=True, eq=False)
class FaithfulContext:
    """Read-only inputs shared by every stage."""

    g: object
    d: object
    cells: object
    metric: FiniteMetric
    params: FaithfulParams


@dataclass
class StageState:
    """Everything the next stage needs from the previous ones."""

    j: int
    epsilon: float
    selected: tuple
    tree: RootedTree
    rays: dict
    double_rays: list
    t0_edges: frozenset
    connected_to: dict
    eventually: dict
    cover: object = None
    kappa: int = 0
    report: dict = field(default_factory=dict)


def cell_metric_of(cells):
    """Return the cell metric as a FiniteMetric over cell ids."""
    if cells.metric is None:
        raise GraphError("boundary cells were built without a metric")
    return FiniteMetric(tuple(range(cells.n_cells)), cells.metric.dmat)


def default_epsilon0(metric):
    """Return the diameter of the cell metric, or 1 for a single cell."""
    diameter = float(metric.dmat.max()) if len(metric) else 0.0
    return diameter if diameter > 0 else 1.0


def init_stage0(ctx):
    """Start from one geodesic to the first cell."""
    g, d, cells = ctx.g, ctx.d, ctx.cells
    if not cells.n_cells:
        raise GraphError("no boundary cells")
    eta = 0
    ray = one_geodesic(g, d, g.root, cells.representatives[eta]).vertices
    tree = RootedTree(g.root)
    tree.attach_path(ray)
    edges = frozenset(zip(ray, ray[1:]))
    return StageState(
        j=0,
        epsilon=ctx.params.epsilon0,
        selected=(eta,),
        tree=tree,
        rays={eta: ray},
        double_rays=[((eta, eta), ray)],
        t0_edges=edges,
        connected_to={eta: eta},
        eventually={eta: eta},
        kappa=ctx.params.kappa,
        report={"j": 0, "epsilon": ctx.params.epsilon0, "selected": [eta],
                "t0": list(ray)},
    )


def _ball_distances(metric, cover):
    if cover is None:
        return np.zeros((len(metric), 0))
    columns = []
    for center in cover.centers:
        members = metric.ball(metric.points.index(center), cover.radius)
        columns.append(metric.dmat[:, members].min(axis=1))
    return np.stack(columns, axis=1)


def multiplicity_class(ball_dist, mu, scale, n):
    """Return the least k <= n with at most k balls within k*scale of mu.

    Returns n + 1 when no such k exists and 1 when there are no balls.
    """
    if ball_dist.shape[1] == 0:
        return 1
    for k in range(1, n + 1):
        if int((ball_dist[mu] <= k * scale + TOLERANCE).sum()) <= k:
            return k
    return n + 1


def _cover_with_retry(metric, radius, kappa, seeds):
    bumps = 0
    while True:
        try:
            cover = ls23_cover(metric, radius, kappa + bumps, seeds)
        except ColorOverflow:
            bumps += 1
            continue
        certificates = cover.certificates
        if certificates["total_mult"] <= certificates["bound"]:
            return cover, bumps
        bumps += 1


def _junction(d, ray, rep_mu):
    rep_eta = ray[-1]
    across = d(rep_mu, rep_eta)
    for k, v in enumerate(ray):
        suffix_geodesic = len(ray) - 1 - k == d(v, rep_eta)
        on_geodesic = d(rep_mu, v) + d(v, rep_eta) == across
        if suffix_geodesic and on_geodesic:
            return v
    return rep_eta


def _eventual(target, eventually, previous):
    chain = [target]
    while chain[-1] not in previous:
        nxt = eventually.get(chain[-1])
        if nxt is None or nxt in chain:
            return chain[-1], True
        chain.append(nxt)
    return chain[-1], False


def splice(ctx, state, mu, eta, previous):
    """Add a branch to cell mu that leaves the ray to eta at a junction.

    Returns the splice record.  state is updated in place.
    """
    g, d, cells, metric = ctx.g, ctx.d, ctx.cells, ctx.metric
    rep_mu = cells.representatives[mu]
    junction = _junction(d, state.rays[eta], rep_mu)
    branch = one_geodesic(g, d, junction, rep_mu).vertices
    last = max(k for k, v in enumerate(branch) if v in state.tree)
    collision = branch[last] if last > 0 else None
    state.tree.attach_path(branch[last:])
    if collision is None:
        connected = eta
    else:
        ends = {e for pair, path in state.double_rays if collision in path
                for e in pair}
        ends.discard(mu)
        connected = min(ends or {eta},
                        key=lambda c: (metric.dmat[mu, c], c))
    state.connected_to[mu] = connected
    if connected in previous:
        final, cycle = connected, False
    else:
        final, cycle = _eventual(connected, state.eventually, previous)
    state.eventually[mu] = final
    ray = state.tree.root_path(rep_mu)
    state.rays[mu] = ray
    rep_end = cells.representatives[connected]
    state.double_rays.append(
        ((mu, connected), state.tree.tree_path(rep_mu, rep_end)))
    return {
        "cell": mu,
        "target": eta,
        "junction": junction,
        "collision": collision,
        "connected_to": connected,
        "eventually_connected_to": final,
        "cycle": cycle,
        "distance_to_target": float(metric.dmat[mu, eta]),
        "distance_to_connected": float(metric.dmat[mu, connected]),
    }


def _claim_checks(ctx, state, new, classes, ball_dist, eps_prev, slack):
    metric, n = ctx.metric, ctx.params.n
    claim1 = []
    scale = 8 * eps_prev
    for a_pos, a in enumerate(new):
        for b in new[a_pos + 1:]:
            if classes[a] != classes[b] or classes[a] > n:
                continue
            if metric.dmat[a, b] > scale + slack:
                continue
            reach = classes[a] * scale
            near_a = ball_dist[a] <= reach + TOLERANCE
            near_b = ball_dist[b] <= reach + TOLERANCE
            gap = max(ball_dist[b][near_a].max(initial=0.0),
                      ball_dist[a][near_b].max(initial=0.0))
            if gap > reach + slack:
                claim1.append({"pair": [a, b], "class": classes[a],
                               "distance": float(gap)})
    claim2 = []
    for mu in new:
        far = float(metric.dmat[mu, state.eventually[mu]])
        if far > 8 * n * eps_prev + slack:
            claim2.append({"cell": mu, "distance": far,
                           "bound": 8 * n * eps_prev})
    return claim1, claim2


def _neighbourhood_sizes(metric, cover, epsilon, n):
    if cover is None or not cover.centers:
        return []
    balls = [metric.ball(metric.points.index(c), cover.radius)
             for c in cover.centers]
    sizes = []
    for a in balls:
        near = sum(1 for b in balls
                   if metric.dmat[np.ix_(a, b)].min() <= 8 * n * epsilon
                   + TOLERANCE)
        sizes.append(near)
    return sizes


def advance_stage(ctx, state):
    """Run one stage and return the new state; the input is not changed."""
    metric, params = ctx.metric, ctx.params
    n = params.n
    eps_prev = state.epsilon
    radius = eps_prev / 16
    epsilon = params.next_epsilon(eps_prev)
    j = state.j + 1
    previous = set(state.selected)
    cover, bumps = _cover_with_retry(metric, radius, state.kappa,
                                     state.selected)
    ys = [metric.points.index(c) for c in cover.centers]
    rng = np.random.default_rng([params.seed, j])
    order = [int(v) for v in rng.permutation(len(metric))]
    net = greedy_net(
        FiniteMetric(tuple(order), metric.dmat[np.ix_(order, order)]),
        epsilon, [order.index(y) for y in ys])
    selected = tuple(ys + [order[k] for k in net[len(ys):]])
    new = [mu for mu in selected if mu not in previous]
    ball_dist = _ball_distances(metric, state.cover)
    classes = {mu: multiplicity_class(ball_dist, mu, 8 * eps_prev, n)
               for mu in new}
    ties = {mu: float(rng.random()) for mu in new}
    new.sort(key=lambda mu: (classes[mu], ties[mu]))
    nxt = replace(
        state, j=j, epsilon=epsilon, selected=selected,
        tree=state.tree.copy(), rays=dict(state.rays),
        double_rays=list(state.double_rays),
        connected_to=dict(state.connected_to),
        eventually=dict(state.eventually), cover=cover,
        kappa=state.kappa + bumps, report={})
    slack = 4 * params.delta * eps_prev
    splices = []
    delta_prime = []
    for mu in new:
        olds = sorted(previous, key=lambda c: (metric.dmat[mu, c], c))
        eta = olds[0]
        if metric.dmat[mu, eta] > eps_prev + TOLERANCE:
            raise CoverError(
                f"stage {j}: cell {mu} is {metric.dmat[mu, eta]!r} from "
                f"the previous net, more than eps = {eps_prev!r}")
        record = splice(ctx, nxt, mu, eta, previous)
        record["class"] = classes[mu]
        splices.append(record)
        if record["collision"] is not None:
            bound = params.delta_prime * eps_prev + slack
            if record["distance_to_connected"] > bound:
                delta_prime.append({"cell": mu, "bound": bound,
                                    "distance": record[
                                        "distance_to_connected"]})
    claim1, claim2 = _claim_checks(ctx, nxt, new, classes, ball_dist,
                                   eps_prev, slack)
    sel = list(selected)
    block = metric.dmat[np.ix_(sel, sel)]
    separation = float(block[np.triu_indices(len(sel), k=1)].min()) \
        if len(sel) > 1 else None
    spread = metric.dmat[:, sel].min(axis=1).max()
    sizes = _neighbourhood_sizes(metric, cover, epsilon, n)
    net_mult, _ = r_multiplicity(metric, [[s] for s in sel], radius)
    nxt.report = {
        "j": j,
        "epsilon": epsilon,
        "exact_schedule": epsilon * 128 * n == eps_prev,
        "cover_radius": radius,
        "cover": cover.to_dict(),
        "kappa_bumps": bumps,
        "selected": sel,
        "new": new,
        "separation": separation,
        "separated": separation is None or separation >= epsilon,
        "net_covers": bool(spread <= epsilon + TOLERANCE),
        "net_multiplicity": net_mult,
        "net_bound": net_bound(n),
        "neighbourhood_max": max(sizes, default=0),
        "neighbourhood_bound": n ** 8,
        "splices": splices,
        "claim1_failures": claim1,
        "claim2_failures": claim2,
        "delta_prime_failures": delta_prime,
        "slack": slack,
        "cycles": [s["cell"] for s in splices if s["cycle"]],
    }
    return nxt


def check_star(tree, t0_edges, double_rays):
    """Return tree edges lying neither in T0 nor on a recorded double ray."""
    covered = set()
    for _, path in double_rays:
        for u, v in zip(path, path[1:]):
            covered.add((u, v))
            covered.add((v, u))
    covered |= set(t0_edges)
    return [e for e in tree.edges() if e not in covered
            and (e[1], e[0]) not in covered]


def geodesic_suffixes(d, rays):
    """Return, per ray, the length of its longest geodesic tail."""
    lengths = {}
    for key, ray in rays.items():
        to_end = d.dist[list(ray), ray[-1]]
        steps = np.arange(len(ray) - 1, -1, -1)
        broken = np.flatnonzero(to_end != steps)
        start = int(broken[-1]) + 1 if broken.size else 0
        lengths[key] = len(ray) - 1 - start
    return lengths


@dataclass
class RayCensus:
    """Rays of a spanning tree counted per boundary cell.

    A ray is the tree path from the root to the first sphere vertex on it.
    """

    per_cell: list
    arrivals: tuple
    max_multiplicity: int
    bound: int

    @property
    def within_bound(self):
        """Return True if no cell exceeds the bound."""
        return self.max_multiplicity <= self.bound

    def to_dict(self):
        """Return a JSON-ready dict."""
        return {
            "per_cell": self.per_cell,
            "arrivals": list(self.arrivals),
            "max_multiplicity": self.max_multiplicity,
            "bound": self.bound,
            "within_bound": self.within_bound,
        }


def first_arrivals(tree, sphere):
    """Return the sphere vertices with no sphere vertex above them."""
    on_sphere = set(sphere)
    first = {tree.root: tree.root if tree.root in on_sphere else None}
    arrivals = []
    for v in sphere:
        if v not in tree:
            continue
        chain = []
        u = v
        while u not in first:
            chain.append(u)
            u = tree.parent[u]
        above = first[u]
        for w in reversed(chain):
            if above is None and w in on_sphere:
                above = w
            first[w] = above
        if first[v] == v:
            arrivals.append(v)
    return tuple(arrivals)


def ray_census(tree, cells, n=1):
    """Count first-arrival sphere vertices of tree in every cell."""
    arrivals = first_arrivals(tree, cells.sphere)
    per_cell = [0] * cells.n_cells
    for v in arrivals:
        per_cell[cells.cell_of[v]] += 1
    return RayCensus(
        per_cell=per_cell,
        arrivals=arrivals,
        max_multiplicity=max(per_cell, default=0),
        bound=multiplicity_bound(n),
    )


def _region_graph(g, region):
    """Return the subgraph of g induced on region as a networkx graph."""
    graph = nx.Graph()
    graph.add_nodes_from(sorted(region))
    graph.add_edges_from((u, v) for u, v in g.edges()
                         if u in region and v in region)
    return graph


def _grow(tree, graph, sources):
    """Attach every vertex of graph reachable from sources in BFS order."""
    search = nx.Graph(graph)
    search.add_node(-1)
    search.add_edges_from((-1, s) for s in sources)
    added = 0
    for parent, child in nx.bfs_edges(search, -1, sort_neighbors=sorted):
        if parent != -1 and child not in tree:
            tree.attach(parent, child)
            added += 1
    return added


def complete_spanning_tree(g, tree, sphere_radius=None):
    """Attach every remaining vertex and return (tree, report).

    Vertices strictly inside the sphere are attached by paths that never
    leave the open ball.  Each component of {d >= R} is then grown from
    the tree vertices it already holds, so sphere vertices only hang below
    existing arrivals.  A component holding no tree vertex is opened at its
    least sphere vertex with a neighbour inside the ball; those openings
    are the only first arrivals completion may add.
    """
    if sphere_radius is None:
        sphere_radius = g.sphere_radius
    if tree.root != g.root:
        raise GraphError("tree and graph have different roots")
    dist = bfs_distances(g.adjacency, g.root)
    if min(dist) < 0:
        raise GraphError("graph is not connected")
    result = tree.copy()
    sphere = [v for v in range(g.n_vertices) if dist[v] == sphere_radius]
    before = set(first_arrivals(result, sphere))
    inner = {v for v in range(g.n_vertices) if dist[v] < sphere_radius}
    outer = set(range(g.n_vertices)) - inner
    rounds = []

    inner_graph = _region_graph(g, inner)
    _grow(result, inner_graph, [v for v in sorted(inner) if v in result])
    rounds.append({"region": "inner", "components": 1, "opened": [],
                   "size": len(result)})

    outer_graph = _region_graph(g, outer)
    components = sorted(sorted(c)
                        for c in nx.connected_components(outer_graph))
    opened = []
    for component in components:
        if any(v in result for v in component):
            continue
        gate = min(((s, u) for s in component for u in g.adjacency[s]
                    if u in inner and u in result), default=None)
        if gate is None:
            raise GraphError(
                f"no tree vertex next to component of {component[0]}")
        result.attach(gate[1], gate[0])
        opened.append(gate[0])
    _grow(result, outer_graph, [v for v in sorted(outer) if v in result])
    rounds.append({"region": "outer", "components": len(components),
                   "opened": opened, "size": len(result)})

    if len(result) < g.n_vertices:
        raise GraphError(
            f"completion reached {len(result)} of {g.n_vertices} vertices")
    after = set(first_arrivals(result, sphere))
    report = {
        "rounds": rounds,
        "opened": sorted(opened),
        "new_sphere_arrivals": sorted(after - before - set(opened)),
    }
    return result, report


@dataclass
class FaithfulResult:
    """Spanning tree, per-stage reports, completion report and census."""

    tree: RootedTree
    partial: RootedTree
    stages: list
    completion: dict
    census: RayCensus
    checks: dict
    params: FaithfulParams

    def to_dict(self, n_vertices):
        """Return the tree document."""
        return {
            "root": self.tree.root,
            "parents": self.tree.parents_array(n_vertices),
            "partial_parents": self.partial.parents_array(n_vertices),
            "params": {
                "epsilon0": self.params.epsilon0,
                "N": self.params.n,
                "kappa": self.params.kappa,
                "epsilon": self.params.epsilon,
                "delta": self.params.delta,
                "delta_prime": self.params.delta_prime,
                "stage_cap": self.params.stage_cap,
                "seed": self.params.seed,
                "schedule": self.params.schedule(len(self.stages) - 1),
            },
            "stages": self.stages,
            "completion": self.completion,
            "census": self.census.to_dict(),
            "checks": self.checks,
        }


def run_faithful(g, d, cells, params):
    """Run every stage, complete the tree and count rays per cell."""
    ctx = FaithfulContext(g, d, cells, cell_metric_of(cells), params)
    state = init_stage0(ctx)
    stages = [state.report]
    terminated = "single cell" if cells.n_cells == 1 else "stage cap"
    while len(state.selected) < cells.n_cells and state.j < params.stage_cap:
        state = advance_stage(ctx, state)
        stages.append(state.report)
        if len(state.selected) == cells.n_cells:
            terminated = "all cells selected"
    uncovered = check_star(state.tree, state.t0_edges, state.double_rays)
    suffixes = geodesic_suffixes(d, state.rays)
    short = [cell for cell, tail in suffixes.items()
             if tail < d(g.root, state.rays[cell][-1]) - 4 * params.delta]
    tree, completion = complete_spanning_tree(g, state.tree, cells.radius)
    if completion["new_sphere_arrivals"]:
        raise RayError(completion["new_sphere_arrivals"])
    census = ray_census(tree, cells, params.n)
    checks = {
        "terminated": terminated,
        "star_uncovered_edges": [list(e) for e in uncovered],
        "star_edges": len(state.tree.edges()),
        "geodesic_suffixes": {str(k): v for k, v in sorted(suffixes.items())},
        "short_suffixes": sorted(short),
        "spanning": tree.is_spanning(g),
        "edge_count": len(tree.edges()),
        "opened_arrivals": completion["opened"],
        "new_sphere_arrivals": completion["new_sphere_arrivals"],
        "within_bound": census.within_bound,
    }
    return FaithfulResult(
        tree=tree,
        partial=state.tree,
        stages=stages,
        completion=completion,
        census=census,
        checks=checks,
        params=params,
    )
