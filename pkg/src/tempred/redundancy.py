"""Fragment pools and commit redundancy classification.

A commit is acceptable at a granularity when it adds at least one fragment
after filtering. An acceptable commit is temporally redundant at a scope when
every one of its added fragments was already added by some earlier commit at
that scope: anywhere in the project (global) or in the same file path (local).
Fragments added earlier in the same commit do not count; the check is strictly
inter-commit.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .differ import ChangeSet
from .errors import PipelineOrderError
from .fragmenter import Granularity

# How many missing fragments a classification keeps for reporting.
NOVEL_FRAGMENT_CAP = 10


class Scope(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


ALL_SCOPES: tuple[Scope, ...] = (Scope.GLOBAL, Scope.LOCAL)


@dataclass
class FragmentPool:
    """Distinct fragments seen so far, each with the commit that first added it."""

    granularity: Granularity
    first_seen: dict[str, int] = field(default_factory=dict)

    def __contains__(self, fragment: str) -> bool:
        return fragment in self.first_seen

    def add(self, fragment: str, order_index: int) -> None:
        """Insert unless present; the first introduction wins."""
        if fragment not in self.first_seen:
            self.first_seen[fragment] = order_index

    @property
    def size(self) -> int:
        return len(self.first_seen)


@dataclass
class ScopedPools:
    """One global pool plus one local pool per file path, single granularity."""

    granularity: Granularity
    global_pool: FragmentPool
    local_pools: dict[str, FragmentPool] = field(default_factory=dict)
    last_indexed: int | None = None

    @classmethod
    def create(cls, granularity: Granularity) -> "ScopedPools":
        return cls(granularity=granularity, global_pool=FragmentPool(granularity))

    def check_invariants(self) -> None:
        """Local pools must be subsets of the global pool (used by tests)."""
        for path, pool in self.local_pools.items():
            for fragment in pool.first_seen:
                if fragment not in self.global_pool:
                    raise AssertionError(
                        f"local pool for {path} holds {fragment!r} missing from global pool"
                    )


@dataclass
class CommitClassification:
    """Per-commit verdicts at one granularity.

    ``redundant`` and ``novel_fragments`` are keyed by the scopes that were
    evaluated. Novel fragments are the distinct added fragments not found in
    the pool, in first-occurrence order, capped for reporting.
    """

    commit_id: str
    order_index: int
    granularity: Granularity
    acceptable: bool
    added_count: int
    redundant: dict[Scope, bool]
    novel_fragments: dict[Scope, list[str]]


def _novel_in(pool: FragmentPool | None, fragments: Iterable[str], seen: set[str],
              out: list[str]) -> bool:
    """Append missing fragments to ``out`` (deduped, capped). Returns True if
    every fragment is present in the pool."""
    all_present = True
    for fragment in fragments:
        if pool is not None and fragment in pool:
            continue
        all_present = False
        if fragment not in seen:
            seen.add(fragment)
            if len(out) < NOVEL_FRAGMENT_CAP:
                out.append(fragment)
    return all_present


def classify_commit(
    pools: ScopedPools,
    changes: ChangeSet,
    granularity: Granularity,
    scopes: tuple[Scope, ...] = ALL_SCOPES,
) -> CommitClassification:
    """Classify one commit against pools that reflect strictly earlier commits.

    The commit's own additions must not be indexed yet; a pool that has
    already advanced to this commit's position raises ``PipelineOrderError``.
    """
    commit = changes.commit
    if pools.last_indexed is not None and pools.last_indexed >= commit.order_index:
        raise PipelineOrderError(
            f"pool already indexed commit {pools.last_indexed}, cannot classify "
            f"commit {commit.order_index} ({commit.commit_id})"
        )

    deltas = changes.deltas_for(granularity)
    added_count = sum(len(d.added) for d in deltas)
    acceptable = added_count >= 1

    redundant: dict[Scope, bool] = {}
    novel: dict[Scope, list[str]] = {}

    if Scope.GLOBAL in scopes:
        out: list[str] = []
        seen: set[str] = set()
        all_present = True
        for delta in deltas:
            if not _novel_in(pools.global_pool, delta.added, seen, out):
                all_present = False
        redundant[Scope.GLOBAL] = acceptable and all_present
        novel[Scope.GLOBAL] = out

    if Scope.LOCAL in scopes:
        out = []
        seen = set()
        all_present = True
        for delta in deltas:
            local = pools.local_pools.get(delta.path)
            if not _novel_in(local, delta.added, seen, out):
                all_present = False
        redundant[Scope.LOCAL] = acceptable and all_present
        novel[Scope.LOCAL] = out

    return CommitClassification(
        commit_id=commit.commit_id,
        order_index=commit.order_index,
        granularity=granularity,
        acceptable=acceptable,
        added_count=added_count,
        redundant=redundant,
        novel_fragments=novel,
    )


def index_commit(pools: ScopedPools, changes: ChangeSet, granularity: Granularity) -> ScopedPools:
    """Index the commit's added fragments; first-seen entries are never overwritten.

    A local pool springs into existence on the first addition to its path and
    survives file deletion (path identity, no rename following).
    """
    order_index = changes.commit.order_index
    for delta in changes.deltas_for(granularity):
        if not delta.added:
            continue
        local = pools.local_pools.get(delta.path)
        if local is None:
            local = pools.local_pools[delta.path] = FragmentPool(granularity)
        for fragment in delta.added:
            pools.global_pool.add(fragment, order_index)
            local.add(fragment, order_index)
    pools.last_indexed = order_index
    return pools


@dataclass
class ScopeMetrics:
    """One (granularity, scope) row of the project summary."""

    granularity: Granularity
    scope: Scope
    acceptable_commits: int
    redundant_commits: int
    temporal_redundancy: float | None  # None when there are no acceptable commits
    pool_size: int | None  # global scope: final global pool size
    local_pool_size_median: float | None  # local scope: median of final local pool sizes


@dataclass
class ProjectSummary:
    project: str
    acceptable_commits: dict[Granularity, int]
    metrics: list[ScopeMetrics]


def summarize(
    classifications: dict[Granularity, list[CommitClassification]],
    pools: dict[Granularity, ScopedPools],
    *,
    project: str = "",
    scopes: tuple[Scope, ...] = ALL_SCOPES,
) -> ProjectSummary:
    """Aggregate per-commit classifications into the per-project metrics table.

    The redundancy ratio divides redundant commits by acceptable commits at
    the same granularity and is undefined (None) when nothing was acceptable.
    The local pool median over an even number of files is the mean of the two
    middle values.
    """
    acceptable = {
        g: sum(1 for c in cls if c.acceptable) for g, cls in classifications.items()
    }
    metrics: list[ScopeMetrics] = []
    for granularity, cls in classifications.items():
        pool = pools[granularity]
        for scope in scopes:
            redundant = sum(1 for c in cls if c.redundant.get(scope))
            ratio = redundant / acceptable[granularity] if acceptable[granularity] else None
            if scope is Scope.GLOBAL:
                pool_size: int | None = pool.global_pool.size
                median = None
            else:
                pool_size = None
                sizes = [p.size for p in pool.local_pools.values()]
                median = float(statistics.median(sizes)) if sizes else None
            metrics.append(
                ScopeMetrics(
                    granularity=granularity,
                    scope=scope,
                    acceptable_commits=acceptable[granularity],
                    redundant_commits=redundant,
                    temporal_redundancy=ratio,
                    pool_size=pool_size,
                    local_pool_size_median=median,
                )
            )
    return ProjectSummary(project=project, acceptable_commits=acceptable, metrics=metrics)
