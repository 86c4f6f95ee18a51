"""cpoint: filter quotes, compile models, sweep frontiers, select portfolios."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bundle import bundle_from_json, canonical_dumps, frontier_payload
from .files import filter_output_texts, load_series_dir
from .frontier import report as render_report
from .frontier import select
from .mdl import MdlError
from .moments import (
    InsufficientSamples,
    InvalidCorrelation,
    MissingQuote,
    filter_estimate,
    parse_date,
)
from .pipeline import compile_bundle
from .qp import InfeasibleModel, NumericalBreakdown

_PIPELINE_ERRORS = (MdlError, InvalidCorrelation, MissingQuote, InsufficientSamples,
                    InfeasibleModel, NumericalBreakdown, ValueError, FileNotFoundError)


@click.group()
def main():
    """Mean-variance portfolio toolkit."""


@main.command("filter")
@click.option("--data-dir", envvar="CPOINT_DATA_DIR", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--final-date", required=True, help="last quote date (dd/mm/yy or ISO)")
@click.option("--interval", default=1, show_default=True, help="days between samples")
@click.option("--samples", default=90, show_default=True, help="number of returns")
@click.option("--extrap", default=30.0, show_default=True,
              help="intervals ahead to project the moments")
@click.option("--hurst", default=0.5, show_default=True,
              help="volatility scaling exponent")
@click.option("--extension", default="ofc", show_default=True)
@click.option("--deflator", default="dolof.ofc", show_default=True,
              help="calendar file name to skip")
@click.option("--out-moments", default="FILTER.CP", show_default=True,
              type=click.Path(dir_okay=False))
@click.option("--out-correl", default="CORRELF.M", show_default=True,
              type=click.Path(dir_okay=False))
def cmd_filter(data_dir, final_date, interval, samples, extrap, hurst,
               extension, deflator, out_moments, out_correl):
    """Estimate return moments from the quote files in a directory."""
    try:
        series = load_series_dir(data_dir, extension, deflator)
        result = filter_estimate(series, parse_date(final_date), interval,
                                 samples, extrap, hurst)
    except _PIPELINE_ERRORS as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    params = {"Hurst": hurst, "extrap": extrap, "sample": samples, "interval": interval}
    moments_text, correl_text = filter_output_texts(result, params)
    Path(out_moments).write_text(moments_text)
    Path(out_correl).write_text(correl_text)
    click.echo(f"filtered {len(series)} assets over {samples} samples "
               f"-> {out_moments}, {out_correl}")


@main.command("compile")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--moments", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--correl", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--deriv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="MARKIN.json", show_default=True,
              type=click.Path(dir_okay=False))
@click.option("--print-log", "print_log", type=click.Path(dir_okay=False),
              help="write MDL print output here")
def cmd_compile(model, moments, correl, deriv, out, print_log):
    """Compile an MDL model plus moments into a solved bundle."""
    try:
        result = compile_bundle(
            Path(model).read_text(),
            Path(moments).read_text(),
            Path(correl).read_text(),
            Path(deriv).read_text() if deriv else None,
        )
    except _PIPELINE_ERRORS as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    Path(out).write_text(result.bundle.to_json())
    if print_log:
        Path(print_log).write_text("\n".join(result.evaluation.print_log) + "\n")
    click.echo(f"bundle {result.bundle.id}: {len(result.bundle.model.names)} assets, "
               f"{len(result.bundle.path.etas)} critical points -> {out}")


def _load_bundle(path: str):
    try:
        return bundle_from_json(Path(path).read_text())
    except (ValueError, KeyError) as exc:
        raise click.ClickException(f"bad bundle {path}: {exc}")


@main.command("frontier")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False),
              help="write JSON here instead of stdout")
def cmd_frontier(bundle, out):
    """Emit the efficient frontier of a compiled bundle as JSON."""
    b = _load_bundle(bundle)
    text = canonical_dumps(frontier_payload(b.frontier))
    if out:
        Path(out).write_text(text)
        click.echo(f"frontier with {len(b.frontier.segments)} segments -> {out}")
    else:
        click.echo(text)


@main.command("select")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.option("--by", type=click.Choice(["eta", "e", "s", "r"]), required=True)
@click.option("--value", type=float, required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="json", show_default=True)
def cmd_select(bundle, by, value, fmt):
    """Select one portfolio by eta, return, deviation or tangency rate."""
    b = _load_bundle(bundle)
    sel = select(b.frontier, by, value)
    if fmt == "json":
        click.echo(canonical_dumps(sel.as_dict()))
    else:
        click.echo(render_report([sel]), nl=False)


def _parse_selector(text: str):
    try:
        by, raw = text.split("=", 1)
        by = by.strip()
        if by not in ("eta", "e", "s", "r"):
            raise ValueError
        return by, float(raw)
    except ValueError:
        raise click.ClickException(
            f"bad selector {text!r}: use by=value with by in eta|e|s|r")


@main.command("report")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.option("--select", "selectors", multiple=True, required=True,
              help="repeatable by=value picks, e.g. --select eta=0.4 --select e=0.09")
@click.option("--out", default="REPORT.CP", show_default=True,
              type=click.Path(dir_okay=False))
def cmd_report(bundle, selectors, out):
    """Append a Numeric-Template report for the selected portfolios."""
    b = _load_bundle(bundle)
    sels = [select(b.frontier, *_parse_selector(s)) for s in selectors]
    text = render_report(sels)
    with open(out, "a") as fh:
        fh.write(text)
    click.echo(text, nl=False)
    click.echo(f"(appended to {out})", err=True)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--store", envvar="CPOINT_DATA_DIR", type=click.Path(file_okay=False),
              help="directory for bundle persistence")
def cmd_serve(host, port, store):
    """Run the HTTP JSON API."""
    import uvicorn

    from .bundle import ModelStore
    from .service import create_app

    app = create_app(ModelStore(store) if store else None)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
