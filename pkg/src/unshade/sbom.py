"""CycloneDX SBOM parsing, package-URL handling, and augmentation.

Documents are kept as parsed JSON so every field we do not interpret
round-trips verbatim. Augmentation only ever appends components; hidden
inclusions are attached at the top level with properties that record the
detection kind and the containing component.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from urllib.parse import quote, unquote

from .coordinates import Coordinate
from .errors import MalformedPurl, MalformedSbom, NotMavenPurl
from .matcher import GroupedMatch

logger = logging.getLogger(__name__)

SUPPORTED_SPEC_VERSIONS = ("1.4", "1.5", "1.6")

PROP_DETECTION = "unshade:detection"
PROP_BUNDLED_BY = "unshade:bundled-by"
PROP_MATCHED_CLASSES = "unshade:matched-classes"

ORIGIN_DECLARED = "declared"
ORIGIN_ADDED = "unshade-added"


@dataclass(frozen=True)
class SbomComponent:
    purl: str | None
    name: str
    group: str
    version: str
    coordinate: Coordinate | None  # None when not a (parseable) Maven purl
    origin: str
    raw: dict

    @property
    def scannable(self) -> bool:
        return self.coordinate is not None


@dataclass
class SbomDocument:
    spec_version: str
    components: list[SbomComponent]
    raw: dict  # complete document; uninterpreted fields preserved here


def coordinate_of_purl(purl: str) -> Coordinate:
    """Parse "pkg:maven/<group>/<artifact>@<version>"; qualifiers ignored."""
    if not isinstance(purl, str) or not purl.startswith("pkg:"):
        raise MalformedPurl(f"not a package URL: {purl!r}")
    rest = purl[4:].lstrip("/")
    for separator in ("#", "?"):  # subpath, then qualifiers
        rest = rest.split(separator, 1)[0]
    ptype, sep, remainder = rest.partition("/")
    if not sep:
        raise MalformedPurl(f"package URL has no name part: {purl!r}")
    if ptype.lower() != "maven":
        raise NotMavenPurl(f"ecosystem {ptype!r} in {purl!r}")
    path, at, version = remainder.rpartition("@")
    if not at or not version:
        raise MalformedPurl(f"Maven package URL has no version: {purl!r}")
    segments = path.split("/")
    if len(segments) != 2 or not segments[0] or not segments[1]:
        raise MalformedPurl(f"Maven package URL needs group/artifact: {purl!r}")
    try:
        return Coordinate(unquote(segments[0]), unquote(segments[1]), unquote(version))
    except ValueError as exc:
        raise MalformedPurl(f"{purl!r}: {exc}") from exc


def purl_of_coordinate(c: Coordinate) -> str:
    return (f"pkg:maven/{quote(c.group, safe='')}/{quote(c.artifact, safe='')}"
            f"@{quote(c.version, safe='')}")


def _component_from_raw(raw: dict) -> SbomComponent:
    purl = raw.get("purl")
    coordinate = None
    if isinstance(purl, str):
        try:
            coordinate = coordinate_of_purl(purl)
        except NotMavenPurl:
            pass
        except MalformedPurl as exc:
            logger.warning("component purl unusable, treating as non-scannable: %s", exc)
    properties = raw.get("properties") or []
    origin = ORIGIN_DECLARED
    for prop in properties:
        if isinstance(prop, dict) and prop.get("name") == PROP_DETECTION:
            origin = ORIGIN_ADDED
            break
    return SbomComponent(
        purl=purl if isinstance(purl, str) else None,
        name=str(raw.get("name", "")),
        group=str(raw.get("group", "")),
        version=str(raw.get("version", "")),
        coordinate=coordinate,
        origin=origin,
        raw=raw,
    )


def parse_sbom(doc: dict) -> SbomDocument:
    """Parse a CycloneDX JSON document (spec versions 1.4 through 1.6)."""
    if not isinstance(doc, dict):
        raise MalformedSbom("SBOM document is not a JSON object")
    if "spdxVersion" in doc:
        raise MalformedSbom("SPDX documents are not supported; provide CycloneDX")
    if doc.get("bomFormat") != "CycloneDX":
        raise MalformedSbom("not a CycloneDX document (bomFormat missing or wrong)")
    spec_version = doc.get("specVersion")
    if spec_version not in SUPPORTED_SPEC_VERSIONS:
        raise MalformedSbom(
            f"unsupported CycloneDX specVersion {spec_version!r}; "
            f"supported: {', '.join(SUPPORTED_SPEC_VERSIONS)}")
    raw_components = doc.get("components")
    if raw_components is None:
        logger.warning("SBOM has no components array; treating as empty")
        raw_components = []
    if not isinstance(raw_components, list):
        raise MalformedSbom("components is not an array")
    components = []
    for raw in raw_components:
        if not isinstance(raw, dict):
            raise MalformedSbom("component entry is not an object")
        components.append(_component_from_raw(raw))
    return SbomDocument(spec_version, components, doc)


def _added_component(coordinate: Coordinate, inclusions: list[GroupedMatch]) -> dict:
    purl = purl_of_coordinate(coordinate)
    properties = []
    for g in sorted(inclusions, key=lambda g: purl_of_coordinate(g.container)):
        properties.append({"name": PROP_DETECTION, "value": g.kind})
        properties.append({"name": PROP_BUNDLED_BY, "value": purl_of_coordinate(g.container)})
        properties.append({"name": PROP_MATCHED_CLASSES, "value": str(g.matched_class_count)})
    return {
        "type": "library",
        "bom-ref": purl,
        "group": coordinate.group,
        "name": coordinate.artifact,
        "version": coordinate.version,
        "purl": purl,
        "properties": properties,
    }


def augment(sbom: SbomDocument, grouped: list[GroupedMatch]) -> SbomDocument:
    """Append one component per hidden (coordinate, evidence) discovery.

    Components whose purl or coordinate already exists in the document are
    not added again, which both honors declared components and makes the
    operation idempotent. Declared components are never mutated.
    """
    existing_purls = {c.purl for c in sbom.components if c.purl}
    existing_coordinates = {c.coordinate for c in sbom.components if c.coordinate}
    by_coordinate: dict[Coordinate, list[GroupedMatch]] = {}
    for g in grouped:
        for version in g.versions:
            coordinate = Coordinate(g.group, g.artifact, version)
            if coordinate in existing_coordinates or purl_of_coordinate(coordinate) in existing_purls:
                continue
            by_coordinate.setdefault(coordinate, []).append(g)
    additions = [_added_component(coordinate, inclusions)
                 for coordinate, inclusions in by_coordinate.items()]
    additions.sort(key=lambda comp: comp["purl"])

    new_raw = copy.deepcopy(sbom.raw)
    if additions and "components" not in new_raw:
        new_raw["components"] = []
    if additions:
        new_raw["components"].extend(additions)
    return parse_sbom(new_raw)


def serialize_sbom(sbom: SbomDocument) -> dict:
    """The document as a JSON-serializable object, all fields preserved."""
    return sbom.raw
