"""Command-line entry point: per-stage reports and the full pipeline."""
import json
import pathlib
import sys

import click

from hypertree.config import (
    FAMILIES, THRESHOLDS, config_from_dict, load_config, load_cover_spec,
)
from hypertree.errors import ConfigError, HypertreeError
from hypertree.geodetic import TIE_BREAKS
from hypertree.graph import generate
from hypertree.pipeline import Experiment, run_pipeline, \
    validate_output_path
from hypertree.serialize import dump_graph, dump_json, write_text

ERRORS = (HypertreeError, FileExistsError, FileNotFoundError,
          json.JSONDecodeError, OSError)


def auto_or_number(ctx, param, value):
    """Click callback accepting "auto" or a number."""
    del ctx
    if value is None or value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise click.BadParameter(
            f"{param.name} must be 'auto' or a number") from None


def threshold_value(ctx, param, value):
    """Click callback accepting a threshold policy name or a number."""
    if value in THRESHOLDS:
        return value
    return auto_or_number(ctx, param, value)


def fail(error):
    """Echo the error to stderr and exit 1."""
    click.echo(f"hypertree error: {error}", err=True)
    sys.exit(1)


def emit(text, output, verbose, label):
    """Write text to output, or to stdout when output is None."""
    if output is None:
        click.echo(text, nl=False)
        if verbose:
            click.echo(f"{label}: done", err=True)
        return
    output_path = pathlib.Path(output)
    validate_output_path(output_path)
    write_text(output_path, text)
    if verbose:
        click.echo(f"{label}: wrote {output_path}")


def read_config(obj, input_dir, seed=(), audit=None, **given):
    """Load INPUT_DIR/config.json, or the options alone, with overrides.

    Options left unset do not override anything.  Without INPUT_DIR the
    options must at least name the family and the depth.
    """
    overrides = {key: value for key, value in given.items()
                 if value is not None}
    if seed:
        overrides["seeds"] = list(seed)
    if audit is not None:
        overrides["audit"] = load_cover_spec(pathlib.Path(audit))
    if input_dir is None:
        return config_from_dict(overrides, obj["threads"])
    return load_config(pathlib.Path(input_dir) / "config.json",
                       obj["threads"], overrides)


def source_options(command):
    """Add INPUT_DIR and the options that can stand in for it."""
    decorators = [
        click.argument("input_dir", nargs=1, required=False,
                       type=click.Path(exists=True)),
        click.option("--family", type=click.Choice(FAMILIES), default=None,
                     help="Graph family (default: from config)."),
        click.option("--depth", type=click.IntRange(min=0), default=None,
                     help="Truncation depth (default: from config)."),
        click.option("--branching", type=click.IntRange(min=2),
                     default=None, help="Children per vertex (tree only)."),
        click.option("--seed", type=int, multiple=True,
                     help="Faithful seed; repeat for several runs."),
        click.option("--tie-break", type=click.Choice(TIE_BREAKS),
                     default=None, help="Geodetic parent rule."),
    ]
    for decorator in reversed(decorators):
        command = decorator(command)
    return command


def stage_command(name, label, document, help_text, **extra):
    """Declare a subcommand that prints one stage document as JSON."""
    @source_options
    @click.option("-o", "--output", "--out", "output", type=click.Path(),
                  help="Output file (default: stdout).")
    @click.option("-v", "--verbose", is_flag=True, help="Print more output.")
    @click.pass_obj
    def command(obj, input_dir, output, verbose, **overrides):
        try:
            exp = Experiment(read_config(obj, input_dir, **overrides))
            emit(dump_json(document(exp)), output, verbose, label)
        except ERRORS as e:
            fail(e)

    for option in extra.values():
        command = option(command)
    return main.command(name, help=help_text)(command)


@click.group()
@click.option("--threads", type=click.IntRange(min=1),
              envvar="HYPERTREE_THREADS", default=None,
              help="Worker threads for the triple scans "
              "[env HYPERTREE_THREADS; default 1].")
@click.pass_context
def main(ctx, threads):
    """Hyperbolic graph experiments at finite depth."""
    ctx.obj = {"threads": threads}


@main.command("generate")
@click.argument("family", type=click.Choice(FAMILIES))
@click.argument("depth", type=click.IntRange(min=0))
@click.option("--branching", type=click.IntRange(min=2), default=2,
              show_default=True, help="Children per vertex (tree only).")
@click.option("-o", "--output", type=click.Path(),
              help="Output file (default: stdout).")
@click.option("-v", "--verbose", is_flag=True, help="Print more output.")
def generate_command(family, depth, branching, output, verbose):
    """Write the text form of a generated graph."""
    try:
        g = generate(family, depth, branching)
        emit(dump_graph(g), output, verbose, "graph-core")
    except ERRORS as e:
        fail(e)


EPSILON = click.option(
    "--epsilon", callback=auto_or_number, default=None,
    help="Visual parameter, 'auto' or a number (default: from config).")
THRESHOLD = click.option(
    "--threshold", callback=threshold_value, default=None,
    help="Cell threshold: 'auto' (R - 4 delta), 'adjacent' (R - 1/2) "
    "or a half-integer.")
AUDIT = click.option(
    "--audit", type=click.Path(exists=True), default=None,
    help="Cover spec JSON for the lower-bound audit.")

stage_command("delta", "hyperbolicity", Experiment.delta_report,
              "Print the four-point delta and its cross-checks.")
stage_command("visual", "visual-boundary", Experiment.visual_report,
              "Print the visual metric report on the vertex set.",
              epsilon=EPSILON)
stage_command("cells", "visual-boundary", Experiment.cells_report,
              "Print the boundary cells and their metric.",
              epsilon=EPSILON, threshold=THRESHOLD)
stage_command("dimension", "covering-dimension",
              Experiment.dimension_report,
              "Print packing, Assouad and doubling estimates of the cells.",
              epsilon=EPSILON, threshold=THRESHOLD)
stage_command("faithful", "faithful-spantree", Experiment.tree_report,
              "Print the staged faithful spanning trees, one per seed.",
              epsilon=EPSILON, threshold=THRESHOLD)
stage_command("geodetic", "geodesic-spantree", Experiment.geodetic_report,
              "Print the geodetic tree, its census and the audit.",
              threshold=THRESHOLD, audit=AUDIT)


@main.command("pipeline")
@source_options
@click.option("-o", "--output", "--out", "output", type=click.Path(),
              help="Output directory (default: INPUT_DIR/bundle).")
@click.option("-v", "--verbose", is_flag=True, help="Print more output.")
@EPSILON
@THRESHOLD
@AUDIT
@click.pass_obj
def pipeline_command(obj, input_dir, output, verbose, **overrides):
    """Run every stage and write the report bundle."""
    try:
        if output is not None:
            output_root = pathlib.Path(output)
        elif input_dir is not None:
            output_root = pathlib.Path(input_dir) / "bundle"
        else:
            raise ConfigError("pipeline needs INPUT_DIR or --output")
        cfg = read_config(obj, input_dir, **overrides)
        manifest = run_pipeline(cfg, output_root, verbose)
        if not manifest["passed"]:
            failed = sorted(k for k, v in manifest["verdicts"].items()
                            if v is False)
            fail(f"hard invariants failed: {', '.join(failed)}")
    except ERRORS as e:
        fail(e)


if __name__ == "__main__":
    main()
