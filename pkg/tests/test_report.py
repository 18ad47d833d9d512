"""Report pipeline, serialization, and CLI tests."""

from __future__ import annotations

import json
from importlib import resources

import jsonschema
import pytest
from click.testing import CliRunner

from tempred.cli import main
from tempred.errors import ConfigurationError
from tempred.fragmenter import Granularity
from tempred.redundancy import Scope
from tempred.report import (
    AnalysisConfig,
    emit_report,
    format_percent,
    render_table,
    report_to_dict,
    run_analysis,
)
from tempred.synth import HistorySpec, generate_history


@pytest.fixture(scope="module")
def schema() -> dict:
    text = resources.files("tempred").joinpath("report.schema.json").read_text("utf-8")
    return json.loads(text)


@pytest.fixture
def small_bundle(tmp_path):
    return generate_history(
        HistorySpec(seed=31, commit_count=14, file_count=3,
                    fragment_alphabet_size=40, reuse_probability=0.55,
                    locality_bias=0.6),
        tmp_path / "bundle",
    )


def test_config_requires_granularity_and_scope():
    with pytest.raises(ConfigurationError):
        AnalysisConfig(source="x", granularities=())
    with pytest.raises(ConfigurationError):
        AnalysisConfig(source="x", scopes=())
    with pytest.raises(ConfigurationError):
        AnalysisConfig(source="x", normalize="sideways")


def test_empty_bundle_report_has_zero_commits_and_null_redundancy(bundle_writer):
    bundle = bundle_writer([])
    report = run_analysis(AnalysisConfig(source=str(bundle), bundle=True))
    assert report.commit_count == 0
    for metric in report.summary.metrics:
        assert metric.temporal_redundancy is None
    payload = report_to_dict(report)
    assert payload["commit_count"] == 0


def test_report_json_validates_against_published_schema(small_bundle, schema):
    report = run_analysis(
        AnalysisConfig(source=str(small_bundle), bundle=True, trace_commits=True)
    )
    jsonschema.validate(report_to_dict(report), schema)


def test_empty_report_validates_against_schema(bundle_writer, schema):
    report = run_analysis(AnalysisConfig(source=str(bundle_writer([])), bundle=True))
    jsonschema.validate(report_to_dict(report), schema)


def test_repeated_runs_are_byte_identical(small_bundle):
    config = AnalysisConfig(source=str(small_bundle), bundle=True, trace_commits=True)
    first = emit_report(run_analysis(config), "json")
    second = emit_report(run_analysis(config), "json")
    assert first == second


def test_csv_has_one_row_per_project_granularity_scope(small_bundle):
    report = run_analysis(AnalysisConfig(source=str(small_bundle), bundle=True))
    lines = emit_report([report, report], "csv").strip().splitlines()
    header, rows = lines[0], lines[1:]
    assert header.split(",")[:3] == ["project", "granularity", "scope"]
    assert len(rows) == 2 * 2 * 2  # projects x granularities x scopes


def test_csv_row_count_follows_selection(small_bundle):
    report = run_analysis(
        AnalysisConfig(source=str(small_bundle), bundle=True,
                       granularities=(Granularity.LINE,), scopes=(Scope.GLOBAL,))
    )
    rows = emit_report(report, "csv").strip().splitlines()[1:]
    assert len(rows) == 1


def test_percent_rendering_matches_rounding_rule():
    assert format_percent(None) == "n/a"
    assert format_percent(0.09) == "9%"
    assert format_percent(0.39) == "39%"
    assert format_percent(0.394) == "39%"
    assert format_percent(0.125) == f"{round(12.5)}%"
    assert format_percent(1.0) == "100%"
    assert format_percent(0.0) == "0%"


def test_table_renders_summary_percentages(small_bundle):
    # A summary in the shape of a published per-project row: 1687 acceptable
    # commits, 9% line-global and 39% token-global redundancy.
    report = run_analysis(AnalysisConfig(source=str(small_bundle), bundle=True))
    report.summary.acceptable_commits = {Granularity.LINE: 1687, Granularity.TOKEN: 1687}
    for metric in report.summary.metrics:
        metric.acceptable_commits = 1687
        if metric.scope is Scope.GLOBAL:
            metric.temporal_redundancy = (
                0.09 if metric.granularity is Granularity.LINE else 0.39
            )
    table = render_table([report])
    row = table.splitlines()[2]
    assert "1687" in row
    assert "9%" in row
    assert "39%" in row


def test_table_renders_null_redundancy_as_na(bundle_writer):
    report = run_analysis(AnalysisConfig(source=str(bundle_writer([])), bundle=True))
    table = emit_report(report, "table")
    assert "n/a" in table


def test_json_ratios_stay_within_unit_interval(small_bundle):
    report = run_analysis(AnalysisConfig(source=str(small_bundle), bundle=True))
    payload = report_to_dict(report)
    for metric in payload["metrics"]:
        value = metric["temporal_redundancy"]
        assert value is None or 0.0 <= value <= 1.0


def test_scope_selection_limits_classification_work(small_bundle):
    report = run_analysis(
        AnalysisConfig(source=str(small_bundle), bundle=True, scopes=(Scope.GLOBAL,))
    )
    for cls in report.classifications[Granularity.LINE]:
        assert Scope.LOCAL not in cls.redundant
    assert {m.scope for m in report.summary.metrics} == {Scope.GLOBAL}


def test_bundle_sources_honor_timestamp_range(bundle_writer):
    bundle = bundle_writer(
        [
            {"id": "c0", "timestamp": 100,
             "files": [{"path": "A.java", "before": None, "after": "a;\n"}]},
            {"id": "c1", "timestamp": 200,
             "files": [{"path": "A.java", "before": "a;\n", "after": "a;\nb;\n"}]},
            {"id": "c2", "timestamp": 300,
             "files": [{"path": "A.java", "before": "a;\nb;\n", "after": "a;\n"}]},
        ]
    )
    report = run_analysis(
        AnalysisConfig(source=str(bundle), bundle=True, since=150, until=250)
    )
    assert report.commit_count == 1
    cls = report.classifications[Granularity.LINE]
    assert [c.commit_id for c in cls] == ["c1"]
    assert cls[0].order_index == 0
    # The clipped commit still diffs against its recorded predecessor state.
    assert cls[0].added_count == 1


def test_post_normalization_mode_runs_and_differs_in_config(small_bundle):
    pre = run_analysis(AnalysisConfig(source=str(small_bundle), bundle=True))
    post = run_analysis(
        AnalysisConfig(source=str(small_bundle), bundle=True, normalize="post")
    )
    assert pre.config_echo["normalize"] == "pre"
    assert post.config_echo["normalize"] == "post"
    # Generated histories carry no comments or blank-line noise, so the two
    # modes agree on acceptability here.
    assert pre.summary.acceptable_commits == post.summary.acceptable_commits


def test_post_mode_ignores_comment_only_edits(bundle_writer):
    before = "int a = 1;\n"
    after = "int a = 1; // note\n"
    bundle = bundle_writer(
        [
            {"id": "c0", "timestamp": 1,
             "files": [{"path": "A.java", "before": None, "after": before}]},
            {"id": "c1", "timestamp": 2,
             "files": [{"path": "A.java", "before": before, "after": after}]},
        ]
    )
    report = run_analysis(
        AnalysisConfig(source=str(bundle), bundle=True, normalize="post")
    )
    line_cls = report.classifications[Granularity.LINE]
    # The raw-line diff sees a changed line, but its replacement differs only
    # in the trailing comment, which post-filtering cannot hide: the new raw
    # line is kept verbatim and is not in the pool.
    assert line_cls[1].acceptable
    assert line_cls[1].redundant[Scope.GLOBAL] is False


def test_pre_mode_makes_comment_only_edits_invisible(bundle_writer):
    before = "int a = 1;\n"
    after = "int a = 1; // note\n"
    bundle = bundle_writer(
        [
            {"id": "c0", "timestamp": 1,
             "files": [{"path": "A.java", "before": None, "after": before}]},
            {"id": "c1", "timestamp": 2,
             "files": [{"path": "A.java", "before": before, "after": after}]},
        ]
    )
    report = run_analysis(AnalysisConfig(source=str(bundle), bundle=True))
    line_cls = report.classifications[Granularity.LINE]
    assert not line_cls[1].acceptable


def test_oversize_files_are_skipped_with_diagnostics(bundle_writer):
    big = "\n".join(f"int x{i} = {i};" for i in range(60)) + "\n"
    bundle = bundle_writer(
        [{"id": "c0", "timestamp": 1,
          "files": [{"path": "A.java", "before": None, "after": big}]}]
    )
    report = run_analysis(
        AnalysisConfig(source=str(bundle), bundle=True, diff_size_cap=10)
    )
    assert report.diagnostics["skipped_oversize_files"]
    assert not report.classifications[Granularity.LINE][0].acceptable


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def test_cli_analyze_bundle_json(small_bundle, schema):
    runner = CliRunner()
    result = runner.invoke(
        main, ["analyze", "--source", str(small_bundle), "--bundle", "--format", "json"]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    jsonschema.validate(payload, schema)


def test_cli_runs_are_byte_identical(small_bundle):
    runner = CliRunner()
    args = ["analyze", "--source", str(small_bundle), "--bundle", "--format", "json"]
    first = runner.invoke(main, args)
    second = runner.invoke(main, args)
    assert first.exit_code == 0 and second.exit_code == 0
    assert first.output == second.output


def test_cli_table_output(small_bundle):
    runner = CliRunner()
    result = runner.invoke(main, ["analyze", "--source", str(small_bundle), "--bundle"])
    assert result.exit_code == 0
    assert "project" in result.output
    assert "line global redundancy" in result.output


def test_cli_write_to_file(small_bundle, tmp_path):
    out = tmp_path / "report.json"
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--source", str(small_bundle), "--bundle",
         "--format", "json", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert json.loads(out.read_text(encoding="utf-8"))["project"] == "bundle"


def test_cli_empty_bundle_exits_zero(bundle_writer):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--source", str(bundle_writer([])), "--bundle", "--format", "json"],
    )
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["commit_count"] == 0
    assert all(m["temporal_redundancy"] is None for m in payload["metrics"])


def test_cli_rejects_missing_source(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["analyze", "--source", str(tmp_path / "nope")])
    assert result.exit_code != 0


def test_cli_reports_config_errors_nonzero(tmp_path):
    plain = tmp_path / "plain"
    plain.mkdir()
    runner = CliRunner()
    result = runner.invoke(main, ["analyze", "--source", str(plain)])
    assert result.exit_code != 0
    assert "not a git repository" in result.output


def test_cli_export_bundle_then_analyze(git_repo, tmp_path):
    git_repo.commit({"src/A.java": "int a = 1;\n"})
    git_repo.commit({"src/A.java": "int a = 1;\nint b = 2;\n"})
    out_dir = tmp_path / "exported"
    runner = CliRunner()
    exported = runner.invoke(
        main,
        ["export-bundle", "--source", str(git_repo.path), "--out", str(out_dir),
         "--branch", "main"],
    )
    assert exported.exit_code == 0, exported.output
    analyzed = runner.invoke(
        main, ["analyze", "--source", str(out_dir), "--bundle", "--format", "json"]
    )
    assert analyzed.exit_code == 0
    assert json.loads(analyzed.output)["commit_count"] == 2


def test_cli_oracle_outputs_trace_json(small_bundle):
    runner = CliRunner()
    result = runner.invoke(main, ["oracle", "--bundle", str(small_bundle)])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["config_echo"]["engine"] == "oracle"
    assert payload["commits"]


def test_cli_multiple_sources_render_one_row_each(small_bundle, tmp_path):
    other = generate_history(HistorySpec(seed=77, commit_count=6), tmp_path / "other")
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["analyze", "--source", str(small_bundle), "--source", str(other),
         "--bundle", "--format", "csv"],
    )
    assert result.exit_code == 0
    rows = result.output.strip().splitlines()[1:]
    assert len(rows) == 8
    projects = {row.split(",")[0] for row in rows}
    assert projects == {"bundle", "other"}
