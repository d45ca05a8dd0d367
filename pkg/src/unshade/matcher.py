"""Subset matching of knowledge-base fingerprints against scanned archives.

An artifact is contained in a dependency when its whole hash set appears
in the dependency's scan set. The qualified relation detects plain
re-bundling (original bytes intact); the unqualified relation additionally
survives re-packaging. Candidate counting over the inverted indexes makes
this linear in the number of scan hashes: each hash hit increments a
per-artifact counter, and an artifact matches exactly when its counter
reaches its stored set size.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .coordinates import Coordinate
from .fingerprint import ScanSets
from .kb import KnowledgeBase

REBUNDLED = "rebundled"
REPACKAGED = "repackaged"


@dataclass(frozen=True)
class MatchResult:
    """One detected hidden inclusion of a knowledge-base artifact."""

    container: Coordinate
    matched: Coordinate
    kind: str  # REBUNDLED | REPACKAGED
    vulnerability_ids: frozenset[str]
    matched_class_count: int
    already_declared: bool = False


@dataclass(frozen=True)
class GroupedMatch:
    """Matches of one artifact's versions that share identical bytecode."""

    container: Coordinate
    group: str
    artifact: str
    versions: tuple[str, ...]
    kind: str
    vulnerability_ids: frozenset[str]
    matched_class_count: int
    declared_versions: tuple[str, ...] = ()


def _subset_ids(index: tuple[list[int], list[int]], counts: list[int],
                scan_hashes: frozenset[int], min_classes: int) -> set[int]:
    """Ids of artifacts whose whole hash set is contained in scan_hashes."""
    hashes, ids = index
    counters = [0] * len(counts)
    matched: set[int] = set()
    if not hashes:
        return matched
    from bisect import bisect_left  # local import keeps the hot loop tight

    for h in scan_hashes:
        lo = bisect_left(hashes, h)
        while lo < len(hashes) and hashes[lo] == h:
            artifact_id = ids[lo]
            counters[artifact_id] += 1
            if counters[artifact_id] == counts[artifact_id] and counts[artifact_id] >= min_classes:
                matched.add(artifact_id)
            lo += 1
    return matched


def match_sets(kb: KnowledgeBase, s: ScanSets, min_classes: int = 1) -> list[MatchResult]:
    """All knowledge-base artifacts wholly contained in the scanned sets.

    A qualified subset match is reported as re-bundled (and takes
    precedence over the unqualified relation, which necessarily holds
    too); an unqualified-only match is re-packaged. Matches of the
    scanned coordinate itself are suppressed.
    """
    if min_classes < 1:
        raise ValueError("min_classes must be >= 1")
    q_counts = [r.q_count for r in kb.records]
    u_counts = [r.u_count for r in kb.records]
    qualified = _subset_ids(kb.qualified_index(), q_counts, s.qualified, min_classes)
    unqualified = _subset_ids(kb.unqualified_index(), u_counts, s.unqualified, min_classes)
    results = []
    for artifact_id in qualified | unqualified:
        record = kb.artifact(artifact_id)
        if record.coordinate == s.coordinate:
            continue
        rebundled = artifact_id in qualified
        results.append(MatchResult(
            container=s.coordinate,
            matched=record.coordinate,
            kind=REBUNDLED if rebundled else REPACKAGED,
            vulnerability_ids=frozenset(record.vulnerability_ids),
            matched_class_count=record.q_count if rebundled else record.u_count,
        ))
    results.sort(key=lambda m: m.matched)
    return results


def flag_declared(matches: list[MatchResult], declared: set[Coordinate]) -> list[MatchResult]:
    """Mark matches whose artifact the SBOM already declares."""
    return [replace(m, already_declared=True) if m.matched in declared else m
            for m in matches]


def group_matches(matches: list[MatchResult], kb: KnowledgeBase) -> list[GroupedMatch]:
    """Collapse versions of one artifact with byte-identical hash sets.

    Matches within one container sharing group and artifact collapse into
    a single entry iff their stored (Q, U) sets are identical; versions
    with differing bytecode stay separate. The result is a partition of
    the input.
    """
    buckets: dict[tuple, list[MatchResult]] = {}
    for m in matches:
        artifact_id = kb.id_of(m.matched)
        if artifact_id is None:
            raise ValueError(f"match references {m.matched}, which is not in the knowledge base")
        key = (m.container, m.matched.group, m.matched.artifact, kb.set_digest(artifact_id))
        buckets.setdefault(key, []).append(m)
    grouped = []
    for (container, group, artifact, _digest), bucket in buckets.items():
        versions = tuple(sorted({m.matched.version for m in bucket}))
        vuln_ids = frozenset().union(*(m.vulnerability_ids for m in bucket))
        declared = tuple(sorted({m.matched.version for m in bucket if m.already_declared}))
        grouped.append(GroupedMatch(
            container=container,
            group=group,
            artifact=artifact,
            versions=versions,
            kind=bucket[0].kind,
            vulnerability_ids=vuln_ids,
            matched_class_count=bucket[0].matched_class_count,
            declared_versions=declared,
        ))
    grouped.sort(key=lambda g: (g.container, g.group, g.artifact, g.versions))
    return grouped
