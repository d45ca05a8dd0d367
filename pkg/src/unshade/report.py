"""Scan report assembly and rendering: text, JSON, CSV, and figures.

The JSON form is the stable machine-readable schema (versioned via
``report_version``); the text form is for humans. ``write_csv`` emits the
flat matches table and ``render_figures`` draws summary charts next to it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .coordinates import Coordinate
from .matcher import REBUNDLED, REPACKAGED, GroupedMatch

REPORT_VERSION = 1

STATUS_SCANNED = "scanned"
STATUS_UNSCANNABLE = "unscannable"

PHASES = ("fetch", "fingerprint", "match", "augment")


@dataclass
class DependencyReport:
    purl: str | None
    coordinate: Coordinate | None
    status: str
    reason: str = ""
    matches: list[GroupedMatch] = field(default_factory=list)


@dataclass
class ScanReport:
    dependencies: list[DependencyReport] = field(default_factory=list)
    durations: dict[str, float] = field(default_factory=dict)
    generated_at: str | None = None  # RFC 3339; None under --reproducible

    def all_matches(self) -> list[GroupedMatch]:
        return [m for d in self.dependencies for m in d.matches]

    def counters(self) -> dict[str, int]:
        matches = self.all_matches()
        vulns: set[str] = set()
        for m in matches:
            vulns.update(m.vulnerability_ids)
        return {
            "dependencies_scanned": sum(1 for d in self.dependencies if d.status == STATUS_SCANNED),
            "dependencies_unscannable": sum(1 for d in self.dependencies if d.status == STATUS_UNSCANNABLE),
            "matches_rebundled": sum(1 for m in matches if m.kind == REBUNDLED),
            "matches_repackaged": sum(1 for m in matches if m.kind == REPACKAGED),
            "distinct_vulnerability_ids": len(vulns),
        }

    def stamp(self) -> None:
        self.generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")


def _match_dict(m: GroupedMatch) -> dict:
    return {
        "group": m.group,
        "artifact": m.artifact,
        "versions": list(m.versions),
        "kind": m.kind,
        "vulnerability_ids": sorted(m.vulnerability_ids),
        "matched_classes": m.matched_class_count,
        "declared_versions": list(m.declared_versions),
    }


def to_json_dict(report: ScanReport) -> dict:
    out: dict = {"report_version": REPORT_VERSION}
    if report.generated_at is not None:
        out["generated_at"] = report.generated_at
    out["durations_seconds"] = {phase: round(report.durations.get(phase, 0.0), 3)
                                for phase in PHASES}
    out["counters"] = report.counters()
    out["dependencies"] = [
        {
            "purl": d.purl,
            "coordinate": None if d.coordinate is None else str(d.coordinate),
            "status": d.status,
            **({"reason": d.reason} if d.reason else {}),
            "matches": [_match_dict(m) for m in d.matches],
        }
        for d in report.dependencies
    ]
    return out


def render_json(report: ScanReport) -> str:
    return json.dumps(to_json_dict(report), indent=2) + "\n"


def render_text(report: ScanReport) -> str:
    counters = report.counters()
    lines = ["unshade scan report"]
    if report.generated_at:
        lines.append(f"generated at {report.generated_at}")
    lines.append("")
    lines.append(f"dependencies scanned:     {counters['dependencies_scanned']}")
    lines.append(f"dependencies unscannable: {counters['dependencies_unscannable']}")
    lines.append(f"hidden inclusions:        {counters['matches_rebundled']} re-bundled, "
                 f"{counters['matches_repackaged']} re-packaged")
    lines.append(f"distinct vulnerability ids: {counters['distinct_vulnerability_ids']}")
    lines.append("")
    for d in report.dependencies:
        label = str(d.coordinate) if d.coordinate else (d.purl or "<component without purl>")
        if d.status == STATUS_UNSCANNABLE:
            lines.append(f"{label}: unscannable ({d.reason})")
            continue
        if not d.matches:
            continue
        lines.append(f"{label}:")
        for m in d.matches:
            versions = ", ".join(m.versions)
            note = ""
            if m.declared_versions:
                note = f" (declared: {', '.join(m.declared_versions)})"
            lines.append(f"  {m.kind}: {m.group}:{m.artifact} [{versions}] "
                         f"{m.matched_class_count} classes, "
                         f"{len(m.vulnerability_ids)} vulnerability id(s){note}")
            for vuln in sorted(m.vulnerability_ids):
                lines.append(f"    - {vuln}")
    durations = ", ".join(f"{phase} {report.durations.get(phase, 0.0):.2f}s" for phase in PHASES)
    lines.append("")
    lines.append(f"phase durations: {durations}")
    return "\n".join(lines) + "\n"


CSV_COLUMNS = ("container", "group", "artifact", "versions", "kind",
               "matched_classes", "vulnerability_ids", "declared_versions")


def write_csv(report: ScanReport, path: Path) -> None:
    """Flat, delimited matches table (one row per grouped match)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for d in report.dependencies:
            for m in d.matches:
                writer.writerow([
                    str(m.container), m.group, m.artifact, ";".join(m.versions),
                    m.kind, m.matched_class_count,
                    ";".join(sorted(m.vulnerability_ids)),
                    ";".join(m.declared_versions),
                ])


def render_figures(report: ScanReport, out_dir: Path) -> list[Path]:
    """Render summary charts as PNG files; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    counters = report.counters()

    fig, ax = plt.subplots(figsize=(5, 4))
    kinds = [REBUNDLED, REPACKAGED]
    ax.bar(kinds, [counters["matches_rebundled"], counters["matches_repackaged"]],
           color=["#4c72b0", "#dd8452"])
    ax.set_ylabel("grouped matches")
    ax.set_title("Hidden inclusions by kind")
    fig.tight_layout()
    path = out_dir / "matches_by_kind.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    per_artifact: dict[str, int] = {}
    for m in report.all_matches():
        key = f"{m.group}:{m.artifact}"
        per_artifact[key] = per_artifact.get(key, 0) + 1
    top = sorted(per_artifact.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if top:
        names = [name for name, _ in reversed(top)]
        values = [value for _, value in reversed(top)]
        ax.barh(names, values, color="#55a868")
    ax.set_xlabel("grouped matches")
    ax.set_title("Most frequently bundled artifacts")
    fig.tight_layout()
    path = out_dir / "top_bundled_artifacts.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(PHASES, [report.durations.get(phase, 0.0) for phase in PHASES], color="#8172b3")
    ax.set_ylabel("seconds")
    ax.set_title("Scan phase durations")
    fig.tight_layout()
    path = out_dir / "phase_durations.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    return written
