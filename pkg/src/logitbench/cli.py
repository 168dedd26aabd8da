"""Command-line interface.

Subcommands: ingest (CSV summary), dgm (build a generating model),
simulate (run the benchmark grid), score (print a scoreboard), report
(write scoreboard files). Exit codes: 0 success, 2 config error,
3 ingest error, 4 empty results.
"""

from __future__ import annotations

import json
import logging
import sys

import click
import numpy as np

from .dgp import fit_generating_model
from .errors import ConfigError, EmptyModelSelected, IngestError
from .harness import (
    DEFAULT_REFERENCE,
    METHOD_CATALOG,
    SimulationConfig,
    load_archive,
    render_report,
    run_simulation,
)
from .ingest import load_dataset, process_predictors
from .scoring import build_scoreboard, stratify_by_separation

EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_EMPTY = 4


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose):
    """Benchmark harness for logistic-regression variable selection."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)


def _load(path, outcome):
    try:
        return process_predictors(load_dataset(path, outcome))
    except IngestError as exc:
        click.echo(f"ingest error: {exc}", err=True)
        sys.exit(EXIT_INGEST)


@main.command()
@click.argument("path")
@click.option("--outcome", required=True, help="Name of the binary outcome column.")
def ingest(path, outcome):
    """Parse a CSV and print a processed-design summary."""
    data = _load(path, outcome)
    click.echo(f"rows: {data.X.shape[0]}")
    click.echo(f"predictors: {data.X.shape[1]}")
    click.echo(f"outcome prevalence: {float(np.mean(data.y)):.4f}")
    for name, cont in zip(data.names, data.continuous):
        click.echo(f"  {name}: {'continuous' if cont else 'binary'}")


@main.command()
@click.argument("path")
@click.option("--outcome", required=True, help="Name of the binary outcome column.")
@click.option("--out", "out_path", default="-", help="Output file for the model JSON.")
def dgm(path, outcome, out_path):
    """Build and serialize the data-generating model for a dataset."""
    data = _load(path, outcome)
    try:
        gm = fit_generating_model(data.X, data.y)
    except EmptyModelSelected as exc:
        click.echo(f"empty results: {exc}", err=True)
        sys.exit(EXIT_EMPTY)
    text = gm.to_json()
    if out_path == "-":
        click.echo(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
        click.echo(f"wrote {out_path}")


def _parse_methods(methods):
    if not methods:
        return None
    names = [m.strip() for m in methods.split(",") if m.strip()]
    unknown = [m for m in names if m not in METHOD_CATALOG]
    if unknown:
        raise ConfigError(f"unknown methods: {unknown} (catalog: {sorted(METHOD_CATALOG)})")
    return names


@main.command()
@click.option("--config", "config_path", required=True, help="TOML simulation config.")
@click.option("--seed", type=int, default=None, help="Override master seed.")
@click.option("--methods", default=None, help="Comma-separated method subset.")
@click.option("--reference", default=None, help="Override reference method.")
@click.option("--out", "out_dir", default="archive", help="Archive output directory.")
def simulate(config_path, seed, methods, reference, out_dir):
    """Run the simulation grid and write the result archive."""
    try:
        config = SimulationConfig.from_toml(config_path)
        names = _parse_methods(methods)
        if names:
            config = SimulationConfig(**{**config.to_dict(), "methods": names,
                                         "datasets": config.datasets})
        if seed is not None:
            config.master_seed = seed
        if reference is not None:
            if reference not in METHOD_CATALOG:
                raise ConfigError(f"unknown reference method {reference!r}")
            config.reference_method = reference
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        path = run_simulation(config, out_dir)
    except IngestError as exc:
        click.echo(f"ingest error: {exc}", err=True)
        sys.exit(EXIT_INGEST)
    records, _ = load_archive(str(path))
    if not records:
        click.echo("empty results: no replicates produced records", err=True)
        sys.exit(EXIT_EMPTY)
    click.echo(f"wrote {len(records)} records to {path}")


@main.command()
@click.argument("archive_dir")
@click.option("--reference", default=None, help="Reference method for ratios.")
@click.option("--stratify-separation", is_flag=True, help="Score strata separately.")
def score(archive_dir, reference, stratify_separation):
    """Aggregate an archive and print markdown scoreboards."""
    try:
        records, manifest = load_archive(archive_dir)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"config error: cannot read archive: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not records:
        click.echo("empty results: archive has no records", err=True)
        sys.exit(EXIT_EMPTY)
    ref = reference or manifest["config"].get("reference_method", DEFAULT_REFERENCE)
    try:
        boards = (
            stratify_by_separation(records, ref)
            if stratify_separation
            else {"all": build_scoreboard(records, ref)}
        )
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not boards:
        click.echo("empty results: all strata empty", err=True)
        sys.exit(EXIT_EMPTY)
    for name, board in boards.items():
        click.echo(f"## {name} (reference: {ref})")
        click.echo(board.to_markdown())


@main.command()
@click.argument("archive_dir")
@click.option("--out", "out_dir", default="report", help="Report output directory.")
@click.option("--reference", default=None, help="Reference method for ratios.")
@click.option("--stratify-separation", is_flag=True, help="Score strata separately.")
@click.option("--heatmap", is_flag=True, help="Also write an SVG heatmap.")
def report(archive_dir, out_dir, reference, stratify_separation, heatmap):
    """Write CSV/markdown scoreboards (and optionally an SVG heatmap)."""
    try:
        written = render_report(
            archive_dir, out_dir, stratify=stratify_separation,
            reference=reference, heatmap=heatmap,
        )
    except FileNotFoundError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ConfigError as exc:
        click.echo(f"empty results: {exc}", err=True)
        sys.exit(EXIT_EMPTY)
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
