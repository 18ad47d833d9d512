"""End-to-end analysis runs and report serialization.

``run_analysis`` drives the whole pipeline for one source: stream commits,
filter files, fragment, diff, classify against the pools, index, aggregate.
Reports carry the per-project metrics, diagnostics (including the line-vs-
token subsumption audit), and an echo of the configuration so a run can be
reproduced. Output is deterministic: the same source and config produce
byte-identical JSON.
"""

from __future__ import annotations

import csv
import io
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .differ import ChangeSet, FileDelta, diff_fragments
from .errors import ConfigurationError
from .fragmenter import (
    Granularity,
    LexStats,
    fragment_lines,
    is_comment_token,
    lex,
    split_raw_lines,
    strip_comments,
)
from .history import (
    DEFAULT_EXCLUDE_GLOBS,
    DEFAULT_INCLUDE_GLOBS,
    CommitRecord,
    FileFilterRules,
    filter_files,
    load_history_bundle,
    open_repository,
)
from .redundancy import (
    ALL_SCOPES,
    CommitClassification,
    ProjectSummary,
    Scope,
    ScopedPools,
    classify_commit,
    index_commit,
    summarize,
)

ALL_GRANULARITIES: tuple[Granularity, ...] = (Granularity.LINE, Granularity.TOKEN)

PRE = "pre"
POST = "post"

DEFAULT_DIFF_SIZE_CAP = 200_000


@dataclass
class AnalysisConfig:
    """Everything a run needs; echoed verbatim into the report."""

    source: str
    bundle: bool = False
    branch: str = "HEAD"
    since: int | None = None
    until: int | None = None
    granularities: tuple[Granularity, ...] = ALL_GRANULARITIES
    scopes: tuple[Scope, ...] = ALL_SCOPES
    include_globs: tuple[str, ...] = DEFAULT_INCLUDE_GLOBS
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS
    normalize: str = PRE
    output_format: str = "table"
    trace_commits: bool = False
    diff_size_cap: int = DEFAULT_DIFF_SIZE_CAP
    project: str | None = None

    def __post_init__(self) -> None:
        self.granularities = tuple(Granularity(g) for g in self.granularities)
        self.scopes = tuple(Scope(s) for s in self.scopes)
        self.include_globs = tuple(self.include_globs)
        self.exclude_globs = tuple(self.exclude_globs)
        if not self.granularities:
            raise ConfigurationError("at least one granularity must be selected")
        if not self.scopes:
            raise ConfigurationError("at least one scope must be selected")
        if self.normalize not in (PRE, POST):
            raise ConfigurationError(f"normalize must be 'pre' or 'post', got {self.normalize!r}")
        if self.output_format not in ("json", "csv", "table"):
            raise ConfigurationError(f"unknown output format {self.output_format!r}")

    @property
    def project_name(self) -> str:
        return self.project or Path(self.source).name or str(self.source)

    def echo(self) -> dict:
        return {
            "source": str(self.source),
            "bundle": self.bundle,
            "branch": self.branch,
            "since": self.since,
            "until": self.until,
            "granularities": [g.value for g in self.granularities],
            "scopes": [s.value for s in self.scopes],
            "include_globs": list(self.include_globs),
            "exclude_globs": list(self.exclude_globs),
            "normalize": self.normalize,
            "diff_size_cap": self.diff_size_cap,
        }


class _FragmentCache:
    """Bounded memo of text -> fragment tuple.

    Consecutive commits mostly re-see the previous commit's file contents, so
    a small LRU avoids re-lexing nearly everything. Fallback-token counts are
    accumulated per distinct content at compute time.
    """

    def __init__(self, granularity: Granularity, normalize: str, stats: LexStats,
                 max_entries: int = 1024) -> None:
        self._granularity = granularity
        self._normalize = normalize
        self._stats = stats
        self._max = max_entries
        self._entries: OrderedDict[str, tuple[str, ...]] = OrderedDict()

    def _compute(self, text: str) -> tuple[str, ...]:
        if self._granularity is Granularity.LINE:
            if self._normalize == PRE:
                return tuple(fragment_lines(text))
            return tuple(split_raw_lines(text))
        return tuple(lex(text, include_comments=self._normalize == POST, stats=self._stats))

    def fragments(self, text: str | None) -> tuple[str, ...]:
        if text is None:
            return ()
        cached = self._entries.get(text)
        if cached is not None:
            self._entries.move_to_end(text)
            return cached
        value = self._compute(text)
        self._entries[text] = value
        if len(self._entries) > self._max:
            self._entries.popitem(last=False)
        return value


def _post_filter_line(fragment: str) -> bool:
    """Keep raw line fragments that are not whitespace-only or comment-only."""
    return bool(strip_comments(fragment).strip())


def post_filter_delta(delta: FileDelta) -> None:
    """Drop whitespace-only and comment-only fragments from a raw-mode delta."""
    if delta.granularity is Granularity.LINE:
        delta.added = [f for f in delta.added if _post_filter_line(f)]
        delta.removed = [f for f in delta.removed if _post_filter_line(f)]
    else:
        delta.added = [f for f in delta.added if not is_comment_token(f)]
        delta.removed = [f for f in delta.removed if not is_comment_token(f)]


@dataclass
class _PipelineState:
    caches: dict[Granularity, _FragmentCache]
    rules: FileFilterRules
    lex_stats: LexStats
    skipped_oversize: list[dict] = field(default_factory=list)


def _make_state(config: AnalysisConfig) -> _PipelineState:
    stats = LexStats()
    return _PipelineState(
        caches={
            g: _FragmentCache(g, config.normalize, stats) for g in config.granularities
        },
        rules=FileFilterRules(config.include_globs, config.exclude_globs),
        lex_stats=stats,
    )


def _commit_changes(commit: CommitRecord, config: AnalysisConfig,
                    state: _PipelineState) -> ChangeSet:
    changes = ChangeSet(commit=commit)
    retained = filter_files(commit.file_changes, state.rules)
    for granularity in config.granularities:
        cache = state.caches[granularity]
        for fc in retained:
            before = cache.fragments(fc.before)
            after = cache.fragments(fc.after)
            if len(before) + len(after) > config.diff_size_cap:
                state.skipped_oversize.append(
                    {
                        "commit_id": commit.commit_id,
                        "path": fc.path,
                        "granularity": granularity.value,
                        "fragments": len(before) + len(after),
                    }
                )
                continue
            delta = diff_fragments(before, after, path=fc.path, granularity=granularity)
            if config.normalize == POST:
                post_filter_delta(delta)
            changes.deltas.append(delta)
    return changes


def iter_changesets(
    commits: Iterable[CommitRecord], config: AnalysisConfig
) -> Iterator[ChangeSet]:
    """Fragment and diff a commit stream without classifying it.

    Exposed for harnesses that drive the pool layer directly.
    """
    state = _make_state(config)
    for commit in commits:
        yield _commit_changes(commit, config, state)


@dataclass
class Report:
    """Everything a run produces. ``classifications`` is always populated in
    memory; the trace only reaches serialized output when requested."""

    project: str
    summary: ProjectSummary
    classifications: dict[Granularity, list[CommitClassification]]
    diagnostics: dict
    config_echo: dict
    commit_count: int
    trace_commits: bool = False


def _clip_stream(commits: Iterable[CommitRecord], since: int | None,
                 until: int | None) -> Iterator[CommitRecord]:
    """Timestamp-bound a stream, renumbering so order_index stays consecutive.

    Recorded before/after contents are untouched, so a clipped commit is
    still diffed against its true predecessor, exactly as repository
    ingestion does with a range.
    """
    order_index = 0
    for commit in commits:
        if since is not None and commit.timestamp < since:
            continue
        if until is not None and commit.timestamp > until:
            continue
        commit.order_index = order_index
        order_index += 1
        yield commit


def open_source(config: AnalysisConfig, on_warning=None) -> Iterator[CommitRecord]:
    if config.bundle:
        stream = load_history_bundle(config.source, on_warning=on_warning)
        if config.since is not None or config.until is not None:
            stream = _clip_stream(stream, config.since, config.until)
        return stream
    return open_repository(
        config.source,
        branch=config.branch,
        since=config.since,
        until=config.until,
        on_warning=on_warning,
    )


def analyze_commits(commits: Iterable[CommitRecord], config: AnalysisConfig,
                    warnings: list[str] | None = None) -> Report:
    """Run classification over an already-open commit stream."""
    warnings = warnings if warnings is not None else []
    state = _make_state(config)
    pools = {g: ScopedPools.create(g) for g in config.granularities}
    classifications: dict[Granularity, list[CommitClassification]] = {
        g: [] for g in config.granularities
    }
    subsumption_violations: list[dict] = []
    divergent_acceptability: list[dict] = []
    audit_pair = (
        Granularity.LINE in config.granularities
        and Granularity.TOKEN in config.granularities
    )
    commit_count = 0

    for commit in commits:
        commit_count += 1
        changes = _commit_changes(commit, config, state)
        per_commit: dict[Granularity, CommitClassification] = {}
        for granularity in config.granularities:
            per_commit[granularity] = classify_commit(
                pools[granularity], changes, granularity, scopes=config.scopes
            )
        if audit_pair:
            line_cls = per_commit[Granularity.LINE]
            token_cls = per_commit[Granularity.TOKEN]
            for scope in config.scopes:
                if line_cls.redundant.get(scope) and not token_cls.redundant.get(scope):
                    subsumption_violations.append(
                        {
                            "commit_id": commit.commit_id,
                            "order_index": commit.order_index,
                            "scope": scope.value,
                            "deltas": [
                                {
                                    "path": d.path,
                                    "granularity": d.granularity.value,
                                    "added": list(d.added),
                                    "removed": list(d.removed),
                                }
                                for d in changes.deltas
                            ],
                        }
                    )
            if line_cls.acceptable != token_cls.acceptable:
                divergent_acceptability.append(
                    {
                        "commit_id": commit.commit_id,
                        "order_index": commit.order_index,
                        "acceptable_line": line_cls.acceptable,
                        "acceptable_token": token_cls.acceptable,
                    }
                )
        for granularity in config.granularities:
            index_commit(pools[granularity], changes, granularity)
            classifications[granularity].append(per_commit[granularity])

    summary = summarize(
        classifications, pools, project=config.project_name, scopes=config.scopes
    )
    diagnostics = {
        "warnings": warnings,
        "skipped_oversize_files": state.skipped_oversize,
        "fallback_tokens": state.lex_stats.fallback_tokens,
        "subsumption_violations": subsumption_violations,
        "divergent_acceptability": divergent_acceptability,
    }
    return Report(
        project=config.project_name,
        summary=summary,
        classifications=classifications,
        diagnostics=diagnostics,
        config_echo=config.echo(),
        commit_count=commit_count,
        trace_commits=config.trace_commits,
    )


def run_analysis(config: AnalysisConfig) -> Report:
    """Open the configured source and analyze it end to end."""
    warnings: list[str] = []
    commits = open_source(config, on_warning=warnings.append)
    return analyze_commits(commits, config, warnings)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def report_to_dict(report: Report) -> dict:
    """Stable JSON-able form of a report (see report.schema.json)."""
    acceptable = {
        g.value: report.summary.acceptable_commits[g]
        for g in sorted(report.summary.acceptable_commits, key=lambda g: g.value)
    }
    metrics = [
        {
            "granularity": m.granularity.value,
            "scope": m.scope.value,
            "redundant_commits": m.redundant_commits,
            "temporal_redundancy": m.temporal_redundancy,
            "pool_size": m.pool_size,
            "local_pool_size_median": m.local_pool_size_median,
        }
        for m in report.summary.metrics
    ]
    out = {
        "project": report.project,
        "commit_count": report.commit_count,
        "acceptable_commits": acceptable,
        "metrics": metrics,
        "diagnostics": report.diagnostics,
        "config_echo": report.config_echo,
    }
    if report.trace_commits:
        out["commits"] = _trace_rows(report)
    return out


def _trace_rows(report: Report) -> list[dict]:
    rows = []
    for granularity in sorted(report.classifications, key=lambda g: g.value):
        for c in report.classifications[granularity]:
            rows.append(
                {
                    "commit_id": c.commit_id,
                    "order_index": c.order_index,
                    "granularity": c.granularity.value,
                    "acceptable": c.acceptable,
                    "added_count": c.added_count,
                    "redundant": {s.value: v for s, v in sorted(c.redundant.items())},
                    "novel_fragments": {
                        s.value: list(v) for s, v in sorted(c.novel_fragments.items())
                    },
                }
            )
    return rows


def render_json(reports: list[Report]) -> str:
    payload: object = (
        report_to_dict(reports[0]) if len(reports) == 1 else [report_to_dict(r) for r in reports]
    )
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


CSV_COLUMNS = [
    "project",
    "granularity",
    "scope",
    "acceptable_commits",
    "redundant_commits",
    "temporal_redundancy",
    "pool_size",
    "local_pool_size_median",
]


def render_csv(reports: list[Report]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        for m in report.summary.metrics:
            writer.writerow(
                [
                    report.project,
                    m.granularity.value,
                    m.scope.value,
                    m.acceptable_commits,
                    m.redundant_commits,
                    "" if m.temporal_redundancy is None else repr(m.temporal_redundancy),
                    "" if m.pool_size is None else m.pool_size,
                    "" if m.local_pool_size_median is None else repr(m.local_pool_size_median),
                ]
            )
    return buf.getvalue()


def format_percent(ratio: float | None) -> str:
    return "n/a" if ratio is None else f"{round(100 * ratio)}%"


def _format_number(value: float | int | None) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _acceptable_cell(report: Report) -> str:
    values = [report.summary.acceptable_commits[g] for g in report.summary.acceptable_commits]
    if len(set(values)) == 1:
        return str(values[0])
    # Line/token acceptability diverged; show both rather than conflate them.
    return "/".join(
        f"{g.value}:{n}" for g, n in report.summary.acceptable_commits.items()
    )


def render_table(reports: list[Report]) -> str:
    """Human-readable per-project rows: acceptable commits, then per granularity
    the redundancy percent and pool size for each scope. Percentages are
    rounded to whole percents; machine formats keep full precision."""
    if not reports:
        return ""
    granularities = [g for g in ALL_GRANULARITIES if g in reports[0].summary.acceptable_commits]
    scopes = []
    for m in reports[0].summary.metrics:
        if m.scope not in scopes:
            scopes.append(m.scope)

    header = ["project", "acceptable"]
    for g in granularities:
        for s in scopes:
            header.append(f"{g.value} {s.value} redundancy")
            header.append(f"{g.value} {s.value} pool")

    rows = []
    for report in reports:
        by_key = {(m.granularity, m.scope): m for m in report.summary.metrics}
        row = [report.project, _acceptable_cell(report)]
        for g in granularities:
            for s in scopes:
                m = by_key[(g, s)]
                row.append(format_percent(m.temporal_redundancy))
                row.append(
                    _format_number(
                        m.pool_size if s is Scope.GLOBAL else m.local_pool_size_median
                    )
                )
        rows.append(row)

    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def emit_report(reports: list[Report] | Report, output_format: str) -> str:
    """Serialize one or more reports; no cross-project aggregation."""
    if isinstance(reports, Report):
        reports = [reports]
    if output_format == "json":
        return render_json(reports)
    if output_format == "csv":
        return render_csv(reports)
    if output_format == "table":
        return render_table(reports)
    raise ConfigurationError(f"unknown output format {output_format!r}")
