"""Bytecode-level detection of re-bundled and re-packaged vulnerable Java
artifacts, with SBOM augmentation for downstream metadata-based scanners."""

__version__ = "0.1.0"

from .coordinates import Coordinate
from .fingerprint import Fingerprint, Hash128, ScanSets, fingerprint_archive, scan_sets
from .matcher import GroupedMatch, MatchResult, group_matches, match_sets

__all__ = [
    "Coordinate",
    "Fingerprint",
    "GroupedMatch",
    "Hash128",
    "MatchResult",
    "ScanSets",
    "fingerprint_archive",
    "group_matches",
    "match_sets",
    "scan_sets",
    "__version__",
]
