"""OSV advisory ingestion: vulnerability ids to affected Maven coordinates.

Only a small slice of the OSV schema is read: ``id``, ``aliases``, and per
``affected`` block the package ecosystem/name plus the explicit
``versions`` list. Version ranges without enumerated versions are skipped
and counted; resolving ranges would require live repository metadata.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .coordinates import Coordinate
from .errors import MalformedAdvisory

logger = logging.getLogger(__name__)

CVE_RE = re.compile(r"^CVE-\d{4}-\d{4,}$")


@dataclass(frozen=True)
class VulnerabilityRecord:
    advisory_id: str
    cve_ids: frozenset[str]
    affected: frozenset[Coordinate]

    def vulnerability_ids(self) -> frozenset[str]:
        """CVE ids, falling back to the advisory id when none are aliased."""
        return self.cve_ids if self.cve_ids else frozenset({self.advisory_id})


@dataclass
class AdvisoryStats:
    parsed: int = 0
    skipped: int = 0    # no Maven block with explicit versions
    malformed: int = 0
    files: int = 0


def parse_advisory(doc: dict) -> VulnerabilityRecord | None:
    """Extract Maven coordinates from one OSV document.

    Returns None (skip) when the document has no Maven-affected block with
    explicit versions; raises MalformedAdvisory on schema violations.
    """
    if not isinstance(doc, dict):
        raise MalformedAdvisory("advisory document is not an object")
    advisory_id = doc.get("id")
    if not isinstance(advisory_id, str) or not advisory_id:
        raise MalformedAdvisory("advisory has no id")
    aliases = doc.get("aliases", [])
    if not isinstance(aliases, list):
        raise MalformedAdvisory(f"{advisory_id}: aliases is not a list")
    cve_ids = {a for a in aliases if isinstance(a, str) and CVE_RE.match(a)}
    if CVE_RE.match(advisory_id):
        cve_ids.add(advisory_id)

    affected = doc.get("affected", [])
    if not isinstance(affected, list):
        raise MalformedAdvisory(f"{advisory_id}: affected is not a list")
    coordinates: set[Coordinate] = set()
    for block in affected:
        if not isinstance(block, dict):
            raise MalformedAdvisory(f"{advisory_id}: affected entry is not an object")
        package = block.get("package") or {}
        ecosystem = package.get("ecosystem", "")
        # OSV allows a registry suffix, e.g. "Maven:https://...".
        if ecosystem != "Maven" and not str(ecosystem).startswith("Maven:"):
            continue
        name = package.get("name", "")
        group, sep, artifact = str(name).partition(":")
        if not sep or not group or not artifact:
            raise MalformedAdvisory(f"{advisory_id}: Maven package name {name!r} is not group:artifact")
        versions = block.get("versions", [])
        if not isinstance(versions, list):
            raise MalformedAdvisory(f"{advisory_id}: versions is not a list")
        for version in versions:
            if not isinstance(version, str) or not version:
                raise MalformedAdvisory(f"{advisory_id}: invalid version entry {version!r}")
            try:
                coordinates.add(Coordinate(group, artifact, version))
            except ValueError as exc:
                raise MalformedAdvisory(f"{advisory_id}: {exc}") from exc
    if not coordinates:
        return None
    return VulnerabilityRecord(advisory_id, frozenset(cve_ids), frozenset(coordinates))


def collect_affected(records: list[VulnerabilityRecord]) -> dict[Coordinate, set[str]]:
    """Union the per-record coordinate sets into coordinate -> vuln ids."""
    out: dict[Coordinate, set[str]] = {}
    for record in records:
        ids = record.vulnerability_ids()
        for coordinate in record.affected:
            out.setdefault(coordinate, set()).update(ids)
    return out


def load_advisory_dir(path: Path) -> tuple[list[VulnerabilityRecord], AdvisoryStats]:
    """Parse every .json document under a directory tree (sorted walk)."""
    stats = AdvisoryStats()
    records = []
    for file in sorted(Path(path).rglob("*.json")):
        stats.files += 1
        try:
            doc = json.loads(file.read_text(encoding="utf-8"))
            record = parse_advisory(doc)
        except (MalformedAdvisory, json.JSONDecodeError, UnicodeDecodeError) as exc:
            logger.warning("skipping malformed advisory %s: %s", file, exc)
            stats.malformed += 1
            continue
        if record is None:
            logger.debug("advisory %s has no Maven block with explicit versions", file)
            stats.skipped += 1
            continue
        stats.parsed += 1
        records.append(record)
    return records, stats
