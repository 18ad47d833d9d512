"""Command-line entry point.

    tempred analyze --source <repo-or-bundle> [options]
    tempred export-bundle --source <repo> --out <dir>
    tempred oracle --bundle <dir>
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import ConfigurationError
from .fragmenter import Granularity
from .history import (
    DEFAULT_EXCLUDE_GLOBS,
    DEFAULT_INCLUDE_GLOBS,
    export_bundle,
    open_repository,
)
from .redundancy import Scope
from .report import (
    AnalysisConfig,
    Report,
    emit_report,
    render_json,
    run_analysis,
)
from .synth import oracle_classify


def _parse_granularities(_ctx, _param, value: str) -> tuple[Granularity, ...]:
    try:
        return tuple(Granularity(part.strip()) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _parse_scopes(_ctx, _param, value: str) -> tuple[Scope, ...]:
    try:
        return tuple(Scope(part.strip()) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _write_output(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


@click.group()
@click.version_option(package_name="tempred")
def main() -> None:
    """Measure temporal redundancy: the share of a project's commits whose
    added lines or tokens were all introduced by earlier commits."""


@main.command()
@click.option("--source", "sources", multiple=True, required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Repository or bundle directory; repeat for several projects.")
@click.option("--bundle", is_flag=True, help="Treat sources as history bundles.")
@click.option("--branch", default="HEAD", show_default=True)
@click.option("--since", type=int, default=None, help="Earliest commit timestamp (epoch).")
@click.option("--until", type=int, default=None, help="Latest commit timestamp (epoch).")
@click.option("--granularity", default="line,token", show_default=True,
              callback=_parse_granularities, help="Comma-separated: line,token.")
@click.option("--scope", default="global,local", show_default=True,
              callback=_parse_scopes, help="Comma-separated: global,local.")
@click.option("--include", "includes", multiple=True,
              help=f"Include glob (repeatable). Default: {', '.join(DEFAULT_INCLUDE_GLOBS)}")
@click.option("--exclude", "excludes", multiple=True,
              help=f"Exclude glob (repeatable). Default: {', '.join(DEFAULT_EXCLUDE_GLOBS)}")
@click.option("--normalize", type=click.Choice(["pre", "post"]), default="pre",
              show_default=True,
              help="pre: strip comments/whitespace before diffing; "
                   "post: diff raw lines, then drop comment/blank fragments.")
@click.option("--format", "output_format", type=click.Choice(["json", "csv", "table"]),
              default="table", show_default=True)
@click.option("--trace-commits", is_flag=True,
              help="Include per-commit classifications in JSON output.")
@click.option("--diff-size-cap", type=int, default=200_000, show_default=True,
              help="Skip files whose fragment count exceeds this.")
@click.option("--out", default="-", show_default=True, help="Output file, or - for stdout.")
def analyze(sources, bundle, branch, since, until, granularity, scope, includes,
            excludes, normalize, output_format, trace_commits, diff_size_cap, out):
    """Run the full pipeline over one or more repositories or bundles."""
    reports: list[Report] = []
    try:
        for source in sources:
            config = AnalysisConfig(
                source=source,
                bundle=bundle,
                branch=branch,
                since=since,
                until=until,
                granularities=granularity,
                scopes=scope,
                include_globs=includes or DEFAULT_INCLUDE_GLOBS,
                exclude_globs=excludes or DEFAULT_EXCLUDE_GLOBS,
                normalize=normalize,
                output_format=output_format,
                trace_commits=trace_commits,
                diff_size_cap=diff_size_cap,
            )
            reports.append(run_analysis(config))
        _write_output(emit_report(reports, output_format), out)
    except ConfigurationError as exc:
        raise click.ClickException(str(exc))
    except OSError as exc:
        raise click.ClickException(str(exc))


@main.command("export-bundle")
@click.option("--source", required=True, type=click.Path(exists=True, file_okay=False),
              help="Repository to export.")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Bundle directory to create.")
@click.option("--branch", default="HEAD", show_default=True)
@click.option("--since", type=int, default=None)
@click.option("--until", type=int, default=None)
def export_bundle_cmd(source, out, branch, since, until):
    """Export a repository's commit stream as a portable history bundle."""
    try:
        stream = open_repository(source, branch=branch, since=since, until=until)
        export_bundle(stream, out)
    except ConfigurationError as exc:
        raise click.ClickException(str(exc))
    except OSError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"bundle written to {out}")


@main.command()
@click.option("--bundle", "bundle_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="History bundle to classify with the naive reference.")
@click.option("--granularity", default="line,token", show_default=True,
              callback=_parse_granularities)
@click.option("--scope", default="global,local", show_default=True, callback=_parse_scopes)
@click.option("--out", default="-", show_default=True)
def oracle(bundle_dir, granularity, scope, out):
    """Run the brute-force reference classifier (test/diagnostic use)."""
    try:
        config = AnalysisConfig(
            source=bundle_dir,
            bundle=True,
            granularities=granularity,
            scopes=scope,
            output_format="json",
        )
        result = oracle_classify(bundle_dir, config)
        echo = config.echo()
        echo["engine"] = "oracle"
        report = Report(
            project=config.project_name,
            summary=result.summary,
            classifications=result.classifications,
            diagnostics={
                "warnings": [],
                "skipped_oversize_files": [],
                "fallback_tokens": 0,
                "subsumption_violations": [],
                "divergent_acceptability": [],
            },
            config_echo=echo,
            commit_count=max(
                (len(v) for v in result.classifications.values()), default=0
            ),
            trace_commits=True,
        )
        _write_output(render_json([report]), out)
    except ConfigurationError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
