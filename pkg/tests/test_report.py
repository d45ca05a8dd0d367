"""Report counters, serializations, CSV, and figure rendering."""

import csv
import json

from unshade.coordinates import Coordinate
from unshade.matcher import GroupedMatch, REBUNDLED, REPACKAGED
from unshade.report import (
    DependencyReport,
    STATUS_SCANNED,
    STATUS_UNSCANNABLE,
    ScanReport,
    render_figures,
    render_json,
    render_text,
    to_json_dict,
    write_csv,
)

CONTAINER = Coordinate("app", "uber", "1.0")


def sample_report() -> ScanReport:
    g1 = GroupedMatch(CONTAINER, "g", "a", ("1.0", "1.1"), REBUNDLED,
                      frozenset({"CVE-2020-1", "CVE-2020-2"}), 4)
    g2 = GroupedMatch(CONTAINER, "g", "b", ("2.0",), REPACKAGED,
                      frozenset({"CVE-2021-3"}), 2, declared_versions=("2.0",))
    return ScanReport(
        dependencies=[
            DependencyReport("pkg:maven/app/uber@1.0", CONTAINER, STATUS_SCANNED,
                             matches=[g1, g2]),
            DependencyReport("pkg:npm/x@1", None, STATUS_UNSCANNABLE, reason="no Maven purl"),
        ],
        durations={"fetch": 0.5, "fingerprint": 1.25, "match": 0.1, "augment": 0.01},
    )


def test_counters_match_enumerated_lists():
    counters = sample_report().counters()
    assert counters == {
        "dependencies_scanned": 1,
        "dependencies_unscannable": 1,
        "matches_rebundled": 1,
        "matches_repackaged": 1,
        "distinct_vulnerability_ids": 3,
    }


def test_json_schema_shape():
    doc = to_json_dict(sample_report())
    assert doc["report_version"] == 1
    assert "generated_at" not in doc  # not stamped
    assert set(doc["durations_seconds"]) == {"fetch", "fingerprint", "match", "augment"}
    dep = doc["dependencies"][0]
    match = dep["matches"][0]
    assert match["versions"] == ["1.0", "1.1"]
    assert match["vulnerability_ids"] == ["CVE-2020-1", "CVE-2020-2"]
    json.loads(render_json(sample_report()))  # serializable


def test_text_render_mentions_everything():
    text = render_text(sample_report())
    assert "re-bundled" in text and "re-packaged" in text
    assert "g:a" in text and "CVE-2020-1" in text
    assert "declared: 2.0" in text
    assert "no Maven purl" in text


def test_stamp_sets_timestamp():
    report = sample_report()
    report.stamp()
    assert report.generated_at is not None
    assert "generated_at" in to_json_dict(report)


def test_csv_rows(tmp_path):
    path = tmp_path / "matches.csv"
    write_csv(sample_report(), path)
    rows = list(csv.reader(path.open()))
    assert rows[0][0] == "container"
    assert len(rows) == 3
    assert rows[1][3] == "1.0;1.1"
    assert rows[2][7] == "2.0"  # declared versions column


def test_figures_render(tmp_path):
    written = render_figures(sample_report(), tmp_path / "figs")
    assert len(written) == 3
    for path in written:
        assert path.exists() and path.stat().st_size > 500
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_figures_render_empty_report(tmp_path):
    written = render_figures(ScanReport(), tmp_path / "figs")
    assert len(written) == 3
    assert all(p.exists() for p in written)
