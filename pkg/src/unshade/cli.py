"""Command-line front end: the import and scan stages plus inspection tools.

Exit codes — import: 0 success, 2 partial (some artifacts unresolved),
1 fatal. scan: 0 no matches, 3 matches found (CI-friendly failure
signal), 2 partial (some dependencies unfetchable), 1 fatal; when both
apply, "matches found" wins over "partial" because it is the actionable
outcome.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import advisory as advisory_mod
from . import kb as kb_mod
from . import matcher, report as report_mod, sbom as sbom_mod
from .coordinates import Coordinate
from .errors import (
    CorruptKb,
    EmptyArtifact,
    MalformedArchive,
    MalformedSbom,
    NotFound,
    TransportError,
    UnshadeError,
    VersionMismatch,
)
from .fingerprint import (
    DEFAULT_NESTED_DEPTH,
    fingerprint_archive,
    iter_archive_class_hashes,
    scan_sets,
)
from .repo import RepoConfig, fetch_artifact

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2
EXIT_MATCHES = 3


def _add_repo_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repo", metavar="URL", default=None,
                   help="repository base URL (default: Maven Central; file:// works)")
    p.add_argument("--cache", metavar="DIR", default=None,
                   help="artifact cache directory (env UNSHADE_CACHE)")
    p.add_argument("--jobs", metavar="N", type=int, default=None,
                   help="parallel workers (default: available cores)")
    p.add_argument("--offline", action="store_true",
                   help="serve from cache only, never download (env UNSHADE_OFFLINE=1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unshade",
        description="Detect re-bundled and re-packaged vulnerable Java artifacts "
                    "and augment SBOMs with the hidden inclusions.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="build the knowledge base from an advisory corpus")
    p.add_argument("--advisory", metavar="DIR", required=True,
                   help="directory tree of OSV JSON documents")
    p.add_argument("--kb", metavar="PATH", required=True, help="knowledge base output path")
    _add_repo_flags(p)
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("scan", help="scan an SBOM's dependencies and emit an augmented SBOM")
    p.add_argument("--sbom", metavar="IN", required=True, help="CycloneDX JSON input")
    p.add_argument("--kb", metavar="PATH", required=True, help="knowledge base path")
    p.add_argument("--out", metavar="OUT", required=True, help="augmented SBOM output path")
    p.add_argument("--report", metavar="PATH", default=None,
                   help="write a report (JSON if the path ends in .json, text otherwise)")
    p.add_argument("--figures", metavar="DIR", default=None,
                   help="render summary figures and a matches.csv into DIR")
    p.add_argument("--min-classes", metavar="K", type=int, default=1,
                   help="minimum matched-set size (default 1)")
    p.add_argument("--nested-depth", metavar="D", type=int, default=DEFAULT_NESTED_DEPTH,
                   help="nested jar recursion depth (default 1)")
    p.add_argument("--reproducible", action="store_true",
                   help="suppress timestamps and durations for byte-identical outputs")
    _add_repo_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fingerprint", help="print per-class hashes of one jar")
    p.add_argument("jar", help="path to a jar file")
    p.add_argument("--nested-depth", metavar="D", type=int, default=DEFAULT_NESTED_DEPTH)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("match", help="match one jar against the knowledge base")
    p.add_argument("jar", help="path to a jar file")
    p.add_argument("--kb", metavar="PATH", required=True)
    p.add_argument("--coordinate", metavar="G:A:V", default=None,
                   help="coordinate of the jar (enables self-match suppression)")
    p.add_argument("--min-classes", metavar="K", type=int, default=1)
    p.add_argument("--nested-depth", metavar="D", type=int, default=DEFAULT_NESTED_DEPTH)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("kb-stats", help="print knowledge base statistics")
    p.add_argument("--kb", metavar="PATH", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_kb_stats)
    return parser


def _repo_config(args: argparse.Namespace) -> RepoConfig:
    return RepoConfig.from_env(base_url=args.repo, cache_dir=args.cache, offline=args.offline)


def _jobs(args: argparse.Namespace) -> int:
    if args.jobs is not None:
        if args.jobs < 1:
            raise SystemExit("--jobs must be >= 1")
        return args.jobs
    return os.cpu_count() or 1


def cmd_import(args: argparse.Namespace) -> int:
    advisory_dir = Path(args.advisory)
    if not advisory_dir.is_dir():
        print(f"error: advisory directory {advisory_dir} is not readable", file=sys.stderr)
        return EXIT_FATAL
    cfg = _repo_config(args)
    records, adv_stats = advisory_mod.load_advisory_dir(advisory_dir)
    if not records:
        logger.warning("no usable advisories under %s", advisory_dir)
    vuln_map = advisory_mod.collect_affected(records)

    coordinates = sorted(vuln_map)
    unresolved = 0
    skipped_empty = 0
    skipped_malformed = 0
    fingerprints = []
    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        fetched = pool.map(lambda c: _try_fetch(cfg, c), coordinates)
        for coordinate, data in zip(coordinates, fetched):
            if data is None:
                unresolved += 1
                continue
            try:
                fingerprints.append(fingerprint_archive(data, coordinate))
            except EmptyArtifact:
                logger.warning("excluding %s: no hashable classes", coordinate)
                skipped_empty += 1
            except MalformedArchive as exc:
                logger.warning("excluding %s: %s", coordinate, exc)
                skipped_malformed += 1

    try:
        stats = kb_mod.build(fingerprints, vuln_map, Path(args.kb))
    except (OSError, UnshadeError) as exc:
        print(f"error: cannot build knowledge base: {exc}", file=sys.stderr)
        return EXIT_FATAL
    stats.skipped_empty = skipped_empty
    stats.skipped_unresolved = unresolved
    stats.skipped_malformed = skipped_malformed + adv_stats.malformed
    _print_stats(stats)
    return EXIT_PARTIAL if unresolved else EXIT_OK


def _try_fetch(cfg: RepoConfig, coordinate: Coordinate) -> bytes | None:
    try:
        return fetch_artifact(cfg, coordinate)
    except NotFound:
        logger.warning("unresolved: %s not found in repository", coordinate)
    except TransportError as exc:
        logger.warning("unresolved: %s (%s)", coordinate, exc)
    return None


def _print_stats(stats: kb_mod.KbStats, fmt: str = "text") -> None:
    if fmt == "json":
        print(json.dumps(stats.as_dict(), indent=2))
        return
    print(f"artifacts:           {stats.artifacts}")
    print(f"vulnerabilities:     {stats.vulnerabilities}")
    print(f"qualified entries:   {stats.qualified_entries}")
    print(f"unqualified entries: {stats.unqualified_entries}")
    print(f"skipped (empty / unresolved / malformed): "
          f"{stats.skipped_empty} / {stats.skipped_unresolved} / {stats.skipped_malformed}")


def cmd_scan(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.sbom).read_text(encoding="utf-8"))
        sbom = sbom_mod.parse_sbom(doc)
    except (OSError, json.JSONDecodeError, MalformedSbom) as exc:
        print(f"error: cannot read SBOM: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        kb = kb_mod.open_kb(Path(args.kb))
    except (OSError, CorruptKb, VersionMismatch) as exc:
        print(f"error: cannot open knowledge base: {exc}", file=sys.stderr)
        return EXIT_FATAL
    if args.min_classes < 1:
        print("error: --min-classes must be >= 1", file=sys.stderr)
        return EXIT_FATAL

    cfg = _repo_config(args)
    declared = {c.coordinate for c in sbom.components if c.coordinate}
    scannable = [c for c in sbom.components if c.scannable]
    rows: dict[int, report_mod.DependencyReport] = {}
    for index, component in enumerate(sbom.components):
        if not component.scannable:
            rows[index] = report_mod.DependencyReport(
                component.purl, None, report_mod.STATUS_UNSCANNABLE, reason="no Maven purl")

    partial = False
    durations: dict[str, float] = {}
    indexed = [(i, c) for i, c in enumerate(sbom.components) if c.scannable]

    t0 = time.monotonic()
    with ThreadPoolExecutor(max_workers=_jobs(args)) as pool:
        payloads = list(pool.map(lambda ic: _try_fetch(cfg, ic[1].coordinate), indexed))
    durations["fetch"] = time.monotonic() - t0

    t0 = time.monotonic()
    sets = []
    for (index, component), data in zip(indexed, payloads):
        if data is None:
            rows[index] = report_mod.DependencyReport(
                component.purl, component.coordinate, report_mod.STATUS_UNSCANNABLE,
                reason="artifact not retrievable")
            partial = True
            continue
        try:
            s = scan_sets(data, component.coordinate, args.nested_depth)
        except MalformedArchive as exc:
            rows[index] = report_mod.DependencyReport(
                component.purl, component.coordinate, report_mod.STATUS_UNSCANNABLE,
                reason=f"malformed archive: {exc}")
            continue
        if not s.qualified:
            rows[index] = report_mod.DependencyReport(
                component.purl, component.coordinate, report_mod.STATUS_UNSCANNABLE,
                reason="no classes")
            continue
        sets.append((index, component, s))
    durations["fingerprint"] = time.monotonic() - t0

    t0 = time.monotonic()
    all_grouped: list[matcher.GroupedMatch] = []
    any_match = False
    for index, component, s in sets:
        matches = matcher.match_sets(kb, s, args.min_classes)
        matches = matcher.flag_declared(matches, declared)
        grouped = matcher.group_matches(matches, kb)
        any_match = any_match or bool(matches)
        all_grouped.extend(grouped)
        rows[index] = report_mod.DependencyReport(
            component.purl, component.coordinate, report_mod.STATUS_SCANNED, matches=grouped)
    durations["match"] = time.monotonic() - t0

    rep = report_mod.ScanReport(dependencies=[rows[i] for i in sorted(rows)])

    t0 = time.monotonic()
    augmented = sbom_mod.augment(sbom, all_grouped)
    out_path = Path(args.out)
    try:
        out_path.write_text(json.dumps(sbom_mod.serialize_sbom(augmented), indent=2) + "\n",
                            encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write augmented SBOM: {exc}", file=sys.stderr)
        return EXIT_FATAL
    durations["augment"] = time.monotonic() - t0

    if args.reproducible:
        rep.durations = {phase: 0.0 for phase in report_mod.PHASES}
    else:
        rep.durations = durations
        rep.stamp()

    if args.report:
        report_path = Path(args.report)
        text = (report_mod.render_json(rep) if report_path.suffix == ".json"
                else report_mod.render_text(rep))
        report_path.write_text(text, encoding="utf-8")
    if args.figures:
        figures_dir = Path(args.figures)
        figures_dir.mkdir(parents=True, exist_ok=True)
        report_mod.write_csv(rep, figures_dir / "matches.csv")
        report_mod.render_figures(rep, figures_dir)
    print(report_mod.render_text(rep), end="")

    if any_match:
        return EXIT_MATCHES
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_fingerprint(args: argparse.Namespace) -> int:
    try:
        data = Path(args.jar).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        rows = list(iter_archive_class_hashes(data, depth=args.nested_depth))
    except MalformedArchive as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    qualified = {q for _, q, _ in rows}
    unqualified = {u for _, _, u in rows}
    if args.format == "json":
        print(json.dumps({
            "classes": [{"path": path, "qualified": str(q), "unqualified": str(u)}
                        for path, q, u in rows],
            "class_count": len(rows),
            "qualified_count": len(qualified),
            "unqualified_count": len(unqualified),
        }, indent=2))
    else:
        for path, q, u in rows:
            print(f"{path}\t{q}\t{u}")
        print(f"classes: {len(rows)}  |Q|: {len(qualified)}  |U|: {len(unqualified)}")
    return EXIT_OK


def cmd_match(args: argparse.Namespace) -> int:
    try:
        data = Path(args.jar).read_bytes()
        kb = kb_mod.open_kb(Path(args.kb))
    except (OSError, CorruptKb, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    coordinate = (Coordinate.parse(args.coordinate) if args.coordinate
                  else Coordinate("unknown", Path(args.jar).stem or "unknown", "0"))
    try:
        s = scan_sets(data, coordinate, args.nested_depth)
    except MalformedArchive as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    matches = matcher.match_sets(kb, s, args.min_classes)
    if args.format == "json":
        print(json.dumps([{
            "matched": str(m.matched),
            "kind": m.kind,
            "matched_classes": m.matched_class_count,
            "vulnerability_ids": sorted(m.vulnerability_ids),
        } for m in matches], indent=2))
    else:
        for m in matches:
            print(f"{m.kind}\t{m.matched}\t{m.matched_class_count} classes\t"
                  f"{','.join(sorted(m.vulnerability_ids))}")
        print(f"matches: {len(matches)}")
    return EXIT_MATCHES if matches else EXIT_OK


def cmd_kb_stats(args: argparse.Namespace) -> int:
    try:
        kb = kb_mod.open_kb(Path(args.kb))
    except (OSError, CorruptKb, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    _print_stats(kb.stats(), args.format)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UnshadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
