"""Command line interface."""

from __future__ import annotations

import sys

import click

from .chase import DepthLimitExceeded, FactLimitExceeded, Limits
from .driver import MODES, PipelineConfig, PipelineError, dump_stage, emit_report, run_pipeline
from .frontend import FrontendError, load_scenario
from .relevance import AbstractionFixpointDiverged, SortMismatch

_GUARDS = (DepthLimitExceeded, FactLimitExceeded, AbstractionFixpointDiverged)


@click.group()
def main():
    """Goal-driven query answering over terminating existential rules with
    equality."""


@main.command()
@click.option("--rules", "rules_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--query-pred", required=True)
@click.option("--mode", type=click.Choice(MODES), default="all", show_default=True)
@click.option("--una", is_flag=True, help="Distinct constants denote distinct objects.")
@click.option(
    "--typed-critical/--untyped-critical",
    default=None,
    help="Type the relevance abstraction by sort (default: typed iff a schema is given).",
)
@click.option("--defun-abstraction", is_flag=True,
              help="Run relevance on the function-abstracted program from the start.")
@click.option("--max-depth", type=int, default=20, show_default=True)
@click.option("--max-facts", type=int, default=10_000_000, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--stats-json", type=click.Path(dir_okay=False))
@click.option("--dump-stage", "dump", type=click.Choice(("sg", "sk", "rel", "magic", "defun", "desg")))
def run(rules_path, data_dir, schema_path, query_pred, mode, una, typed_critical,
        defun_abstraction, max_depth, max_facts, out_dir, stats_json, dump):
    """Answer a query over a rule file and a directory of CSV facts."""
    try:
        scenario = load_scenario(rules_path, data_dir, query_pred, schema_path, una_known=una)
    except FrontendError as err:
        click.echo("error: %s" % err, err=True)
        sys.exit(1)

    cfg = PipelineConfig(
        mode=mode,
        una_known=True if una else None,
        typed_critical=typed_critical,
        defun_abstraction=defun_abstraction,
        limits=Limits(max_depth=max_depth, max_facts=max_facts),
    )
    try:
        report = run_pipeline(scenario, cfg)
    except PipelineError as err:
        click.echo("error: %s" % err, err=True)
        sys.exit(2 if isinstance(err.cause, _GUARDS) else 1)
    except (FrontendError, SortMismatch, ValueError) as err:
        click.echo("error: %s" % err, err=True)
        sys.exit(1)

    emit_report(report, out_dir, stats_json)
    if dump is not None:
        try:
            click.echo(dump_stage(report, dump), nl=False)
        except KeyError as err:
            click.echo("error: %s" % err.args[0], err=True)
            sys.exit(1)
    click.echo(
        "%d answer(s), %d fact(s) derived, reports in %s"
        % (len(report.answers), report.chase_stats.derived_facts, out_dir)
    )


if __name__ == "__main__":
    main()
