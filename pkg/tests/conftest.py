"""Shared fixtures: assembled class corpus, jar/repo/advisory builders."""

from __future__ import annotations

import io
import json
import sys
import zipfile
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import RULE_SETS, build_corpus  # noqa: E402

from unshade.coordinates import Coordinate  # noqa: E402
from unshade.repo import artifact_path  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


def make_jar(entries: dict[str, bytes], *, order: list[str] | None = None) -> bytes:
    """Build an in-memory jar; entry order defaults to insertion order."""
    buf = io.BytesIO()
    names = order if order is not None else list(entries)
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in names:
            zf.writestr(name, entries[name])
    return buf.getvalue()


def class_entries(names: list[str]) -> dict[str, bytes]:
    """Jar entry map for the given corpus class names."""
    corpus = build_corpus()
    return {f"{name}.class": corpus[name] for name in names}


@pytest.fixture(scope="session")
def corpus() -> dict[str, bytes]:
    return build_corpus()


@pytest.fixture(scope="session")
def rule_sets():
    from unshade.relocate import RelocationRule

    return [[RelocationRule(f, t) for f, t in spec] for spec in RULE_SETS]


def write_repo(root: Path, artifacts: dict[Coordinate, bytes]) -> str:
    """Lay out jars in Maven repository structure; returns a file:// URL."""
    for coordinate, data in artifacts.items():
        path = root / artifact_path(coordinate)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    return root.as_uri()


def write_advisory(root: Path, name: str, advisory_id: str, cves: list[str],
                   coordinates: list[Coordinate]) -> Path:
    """Write one OSV document covering the given coordinates."""
    by_package: dict[tuple[str, str], list[str]] = {}
    for c in coordinates:
        by_package.setdefault((c.group, c.artifact), []).append(c.version)
    doc = {
        "id": advisory_id,
        "aliases": cves,
        "affected": [
            {"package": {"ecosystem": "Maven", "name": f"{group}:{artifact}"},
             "versions": versions}
            for (group, artifact), versions in sorted(by_package.items())
        ],
    }
    root.mkdir(parents=True, exist_ok=True)
    path = root / name
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


def make_sbom(purls: list[str], spec_version: str = "1.5") -> dict:
    return {
        "bomFormat": "CycloneDX",
        "specVersion": spec_version,
        "version": 1,
        "components": [
            {"type": "library", "bom-ref": purl, "name": purl.rsplit("/", 1)[-1].split("@")[0],
             "purl": purl}
            for purl in purls
        ],
    }
