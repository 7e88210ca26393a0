"""Run every stage for one config and write the report bundle."""
import functools
import math
import pathlib
from functools import cached_property

import click
import jinja2
import numpy as np

from hypertree import covering, faithful, geodetic, hyperbolicity, visual
from hypertree.config import config_hash
from hypertree.errors import ConfigError, HypertreeError, StageError
from hypertree.graph import all_pairs_distances, generate
from hypertree.serialize import dump_graph, dump_json, write_csv, write_text

TEMPLATES = pathlib.Path(__file__).parent / "templates"


def staged(name):
    """Re-raise library errors from the wrapped stage as StageError."""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except StageError:
                raise
            except (HypertreeError, ValueError) as e:
                raise StageError(name, e) from e
        return wrapper
    return decorator


class Experiment:
    """Lazily computed stages of one configured experiment."""

    def __init__(self, cfg):
        """Remember the config; nothing is computed yet."""
        self.cfg = cfg
        self.hash = config_hash(cfg)

    def _stamp(self, doc):
        return {**doc, "config_hash": self.hash, "caps": dict(self.cfg.caps)}

    @cached_property
    @staged("graph-core")
    def graph(self):
        """Return the generated graph."""
        return generate(self.cfg.family, self.cfg.depth, self.cfg.branching)

    @cached_property
    @staged("graph-core")
    def distances(self):
        """Return the distance oracle."""
        return all_pairs_distances(self.graph)

    @cached_property
    @staged("config")
    def base(self):
        """Return the base vertex for Gromov products."""
        base = self.graph.root if self.cfg.base is None else self.cfg.base
        if base >= self.graph.n_vertices:
            raise ConfigError(f"base {base} is not a vertex")
        return base

    @cached_property
    @staged("hyperbolicity")
    def table(self):
        """Return the Gromov table at the base vertex."""
        return hyperbolicity.gromov_table(
            self.distances, self.base, cap=self.cfg.cap("triple"),
            sample=self.cfg.cap("triple_sample"), seed=self.cfg.seed,
            threads=self.cfg.threads)

    @cached_property
    @staged("hyperbolicity")
    def delta_checks(self):
        """Return transfer, thin-triangle and product-vs-geodesic reports."""
        cfg, g, d, t = self.cfg, self.graph, self.distances, self.table
        transfer = hyperbolicity.basepoint_transfer_check(
            d, self.base, t.delta2, cap=cfg.cap("transfer"),
            sample=cfg.cap("triple_sample"), seed=cfg.seed,
            threads=cfg.threads)
        thin = hyperbolicity.thin_triangle_delta(
            g, d, cap=cfg.cap("thin"), sample=cfg.cap("thin_sample"),
            seed=cfg.seed)
        sources = None
        if g.n_vertices > cfg.cap("transfer"):
            sources = hyperbolicity.stratified_sample(
                d.dist[self.base], cfg.cap("triple_sample"), cfg.seed)
        product = hyperbolicity.product_vs_geodesic_check(
            g, d, t, sources=sources, delta2=transfer.max_slack2)
        return transfer, thin, product

    def delta_report(self):
        """Return the delta document."""
        transfer, thin, product = self.delta_checks
        return self._stamp(hyperbolicity.delta_report(
            self.table, transfer, thin, product))

    @cached_property
    @staged("visual-boundary")
    def epsilon(self):
        """Return the visual parameter, checked for admissibility."""
        delta = self.table.delta
        if self.cfg.epsilon == "auto":
            epsilon = visual.auto_epsilon(delta)
        else:
            epsilon = self.cfg.epsilon
        visual.check_admissible(epsilon, delta)
        return epsilon

    @cached_property
    @staged("visual-boundary")
    def visual_metric(self):
        """Return d_eps on all vertices, or on the sphere for large graphs."""
        g = self.graph
        points = range(g.n_vertices)
        if g.n_vertices > self.cfg.cap("transfer"):
            points = self.distances.sphere(g.root, g.sphere_radius)
        return visual.chain_metric(self.table, self.epsilon, points)

    def visual_report(self):
        """Return the visual document."""
        vm = self.visual_metric
        sandwich = visual.sandwich_check(vm, self.table)
        limit = visual.max_epsilon(self.table.delta)
        axioms = visual.metric_violations(vm.dmat)
        return self._stamp({
            "epsilon": vm.epsilon,
            "epsilon_prime": vm.epsilon_prime,
            "max_epsilon": None if math.isinf(limit) else limit,
            "base": vm.base,
            "points": len(vm.points),
            "sandwich": sandwich.to_dict(),
            "metric_violations": [list(v) for v in axioms],
        })

    @cached_property
    @staged("visual-boundary")
    def cells(self):
        """Return the boundary cells with their metric."""
        threshold, threshold2 = self.cfg.threshold, None
        if threshold == "adjacent":
            threshold2 = visual.adjacent_threshold2(self.graph.sphere_radius)
        elif threshold != "auto":
            threshold2 = int(2 * threshold)
        return visual.boundary_cells(
            self.graph, self.distances, self.table, None, threshold2,
            self.epsilon, self.cfg.chains)

    def cells_report(self):
        """Return the cells document."""
        return self._stamp(self.cells.to_dict())

    @cached_property
    @staged("covering-dimension")
    def dimension(self):
        """Return the doubling report and the dimension document."""
        metric = faithful.cell_metric_of(self.cells)
        return covering.dimension_report(
            metric, packing_exact=self.cfg.cap("packing_exact"),
            setcover_exact=self.cfg.cap("setcover_exact"))

    def dimension_report(self):
        """Return the dimension document."""
        return self._stamp(self.dimension[1])

    def params(self, seed):
        """Return the faithful parameters for one seed."""
        kappa = self.dimension[0].kappa
        metric = faithful.cell_metric_of(self.cells)
        epsilon0 = self.cfg.epsilon0
        if epsilon0 == "auto":
            epsilon0 = faithful.default_epsilon0(metric)
        return faithful.FaithfulParams(
            epsilon0=epsilon0, n=2 ** kappa, kappa=kappa,
            epsilon=self.epsilon, delta=float(self.table.delta),
            stage_cap=self.cfg.stage_cap, seed=seed)

    @cached_property
    @staged("faithful-spantree")
    def faithful_runs(self):
        """Return one faithful result per configured seed."""
        return [faithful.run_faithful(self.graph, self.distances, self.cells,
                                      self.params(seed))
                for seed in self.cfg.seeds]

    def tree_report(self):
        """Return the faithful tree document for every seed."""
        n = self.graph.n_vertices
        return self._stamp({"runs": [r.to_dict(n)
                                     for r in self.faithful_runs]})

    @cached_property
    @staged("geodesic-spantree")
    def geodetic_tree(self):
        """Return the geodetic tree under the configured tie-break."""
        return geodetic.build_geodetic_tree(
            self.graph, self.distances, tie_break=self.cfg.tie_break,
            seed=self.cfg.seed)

    @cached_property
    @staged("geodesic-spantree")
    def audit(self):
        """Return the lower-bound audit, or None without a cover spec."""
        spec = self.cfg.audit
        if spec is None:
            return None
        sets, dim = geodetic.resolve_cover(spec, self.graph, self.cells)
        return geodetic.lower_bound_audit(
            self.geodetic_tree, self.cells, sets, dim,
            separator=spec.get("separator"))

    @cached_property
    @staged("geodesic-spantree")
    def growth(self):
        """Return example2 ray growth rows up to the configured depth."""
        if self.graph.family != "example2" or self.cfg.depth < 1:
            return None
        return geodetic.example2_ray_growth(range(1, self.cfg.depth + 1))

    def geodetic_report(self):
        """Return the geodetic document."""
        gt = self.geodetic_tree
        census = faithful.ray_census(gt.tree, self.cells)
        doc = {
            "tree": gt.to_dict(self.graph.n_vertices),
            "census": census.to_dict(),
            "audit": self.audit,
        }
        if self.growth is not None:
            doc["growth"] = [{"R": r, "multiplicity": m}
                             for r, m in self.growth]
        return self._stamp(doc)

    def verdicts(self):
        """Return hard-invariant verdicts; None marks a sampled check."""
        transfer, _, product = self.delta_checks
        exhaustive = not self.table.sampled
        vm = self.visual_metric
        runs = self.faithful_runs
        stages = [s for r in runs for s in r.stages[1:]]
        return {
            "transfer": transfer.violation_count == 0 if exhaustive
            else None,
            "product_vs_geodesic": not product.violations if exhaustive
            else None,
            "sandwich": not visual.sandwich_check(vm, self.table).violations,
            "metric_axioms": not visual.metric_violations(vm.dmat),
            "cover_certified": all(cover_certified(s["cover"])
                                   for s in stages),
            "exact_schedule": all(s["exact_schedule"] for s in stages),
            "spanning": all(r.checks["spanning"] for r in runs),
            "star": all(not r.checks["star_uncovered_edges"] for r in runs),
            "census_within_bound": all(r.census.within_bound for r in runs),
            "no_new_rays": all(not r.completion["new_sphere_arrivals"]
                               for r in runs),
            "geodetic_certified": self.geodetic_tree.certified,
        }


def cover_certified(cover):
    """Return True if a stage cover passes every certificate.

    The balls must cover, each color class must have multiplicity at most
    one, the total multiplicity must stay within 2^kappa and the previous
    net must be among the centers.
    """
    certificates = cover["certificates"]
    return bool(
        certificates["cover"]
        and max(certificates["per_color_mult"], default=0) <= 1
        and certificates["total_mult"] <= certificates["bound"]
        and set(cover["seeds"]) <= set(cover["centers"]))


def multiplicity_rows(exp):
    """Return per-cell ray counts for each faithful run and the BFS tree."""
    geodetic_counts = faithful.ray_census(exp.geodetic_tree.tree,
                                          exp.cells).per_cell
    rows = []
    for cell in range(exp.cells.n_cells):
        rows.append([cell] + [r.census.per_cell[cell]
                              for r in exp.faithful_runs]
                    + [geodetic_counts[cell]])
    return rows


def render_summary(context):
    """Render summary.html from the packaged template."""
    env = jinja2.Environment(
        loader=jinja2.FileSystemLoader(str(TEMPLATES)),
        autoescape=jinja2.select_autoescape(['html', 'xml']),
    )
    return env.get_template("summary.html").render(context)


def validate_output_path(output_root):
    """Refuse to write into an existing path."""
    if output_root.exists():
        raise FileExistsError(f"Path already exists: {output_root}")


def _progress(verbose, message):
    if verbose:
        click.echo(message)


def run_pipeline(cfg, output_root, verbose=False):
    """Compute every stage for cfg and write the bundle to output_root.

    Returns the bundle manifest; its "passed" entry is False when a hard
    invariant failed.
    """
    output_root = pathlib.Path(output_root)
    validate_output_path(output_root)
    exp = Experiment(cfg)
    g = exp.graph
    _progress(verbose, f"graph-core: {g.family_tag}, {g.n_vertices} "
              f"vertices, {g.n_edges} edges")
    documents = {"delta.json": exp.delta_report()}
    _progress(verbose, f"hyperbolicity: delta = {exp.table.delta}")
    documents["visual.json"] = exp.visual_report()
    _progress(verbose, f"visual-boundary: epsilon = {exp.epsilon:.6g}")
    documents["cells.json"] = exp.cells_report()
    _progress(verbose, f"visual-boundary: {exp.cells.n_cells} cells at "
              f"R = {exp.cells.radius}")
    documents["dimension.json"] = exp.dimension_report()
    _progress(verbose, f"covering-dimension: kappa = "
              f"{exp.dimension[0].kappa}")
    documents["tree.json"] = exp.tree_report()
    for run in exp.faithful_runs:
        _progress(verbose, f"faithful-spantree: seed {run.params.seed}, "
                  f"{len(run.stages) - 1} stages, max multiplicity "
                  f"{run.census.max_multiplicity}")
    documents["geodetic.json"] = exp.geodetic_report()
    _progress(verbose, "geodesic-spantree: geodetic tree certified "
              f"{exp.geodetic_tree.certified}")
    verdicts = exp.verdicts()
    passed = all(v is not False for v in verdicts.values())

    output_root.mkdir(parents=True)
    write_text(output_root / "graph.txt", dump_graph(g))
    for name, doc in documents.items():
        write_text(output_root / name, dump_json(doc))
    seeds = [f"faithful_seed_{s}" for s in cfg.seeds]
    write_csv(output_root / "multiplicity.csv", ["cell"] + seeds
              + ["geodetic"], multiplicity_rows(exp))
    dmat = exp.cells.metric.dmat
    write_csv(output_root / "cell_metric.csv",
              ["cell"] + list(range(exp.cells.n_cells)),
              [[i] + [repr(float(x)) for x in row]
               for i, row in enumerate(np.asarray(dmat))])
    files = ["graph.txt", *documents, "multiplicity.csv", "cell_metric.csv"]
    if exp.growth is not None:
        write_csv(output_root / "growth.csv", ["R", "multiplicity"],
                  exp.growth)
        files.append("growth.csv")
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": exp.hash,
        "caps": dict(cfg.caps),
        "verdicts": verdicts,
        "passed": passed,
        "files": sorted(files + ["summary.html", "bundle.json"]),
    }
    write_text(output_root / "summary.html", render_summary({
        "cfg": cfg.to_dict(),
        "hash": exp.hash,
        "graph": g,
        "delta": documents["delta.json"],
        "visual": documents["visual.json"],
        "cells": exp.cells,
        "kappa": exp.dimension[0].kappa,
        "runs": exp.faithful_runs,
        "geodetic": documents["geodetic.json"],
        "verdicts": verdicts,
        "passed": passed,
    }) + "\n")
    write_text(output_root / "bundle.json", dump_json(manifest))
    _progress(verbose, f"pipeline: wrote {output_root}, "
              f"{'all invariants hold' if passed else 'invariants failed'}")
    return manifest
