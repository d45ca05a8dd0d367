"""Per-class 128-bit hashing and per-artifact fingerprint assembly.

Each class contributes two hashes: the qualified hash of its raw bytes
(unchanged by plain re-bundling) and the unqualified hash of its
canonical, package-free encoding (unchanged by re-packaging as well).
An artifact's fingerprint is its coordinate plus the two hash sets.

XXH3-128 with seed 0 is fixed forever; the knowledge-base header records
the algorithm id so a mismatch is detected instead of silently producing
an empty scan.
"""

from __future__ import annotations

import io
import logging
import zipfile
from dataclasses import dataclass

import xxhash

from .classfile import ClassFile, parse_class
from .coordinates import Coordinate
from .errors import (
    EmptyArtifact,
    MalformedArchive,
    MalformedClassFile,
    MalformedDescriptor,
    MalformedSignature,
    UnsupportedConstruct,
)
from .unqualify import canonical_encode

logger = logging.getLogger(__name__)

HASH_SEED = 0

# Near-universal marker classes whose unqualified forms match almost any
# artifact; they carry no discriminating content.
EXCLUDED_CLASS_BASENAMES = frozenset({"module-info.class", "package-info.class"})

NESTED_ARCHIVE_SUFFIXES = (".jar", ".war")

DEFAULT_NESTED_DEPTH = 1


class Hash128(int):
    """128-bit unsigned hash value; renders as 32 lowercase hex digits."""

    __slots__ = ()

    def __str__(self) -> str:
        return format(self, "032x")

    def __repr__(self) -> str:
        return f"Hash128({format(self, '032x')})"

    @classmethod
    def from_hex(cls, text: str) -> "Hash128":
        return cls(int(text, 16))

    def to_bytes_be(self) -> bytes:
        return int.__index__(self).to_bytes(16, "big")

    @classmethod
    def from_bytes_be(cls, data: bytes) -> "Hash128":
        return cls(int.from_bytes(data, "big"))


@dataclass(frozen=True)
class Fingerprint:
    """The stored identity of one artifact: coordinate + hash sets."""

    coordinate: Coordinate
    qualified: frozenset[Hash128]
    unqualified: frozenset[Hash128]
    class_count: int


@dataclass(frozen=True)
class ScanSets:
    """Hash sets of a dependency under scan (may be empty)."""

    coordinate: Coordinate
    qualified: frozenset[Hash128]
    unqualified: frozenset[Hash128]


def qualified_hash(raw: bytes) -> Hash128:
    """XXH3-128 (seed 0) of the exact raw class bytes."""
    return Hash128(xxhash.xxh3_128_intdigest(raw, seed=HASH_SEED))


def unqualified_hash(cf: ClassFile) -> Hash128:
    """XXH3-128 (seed 0) of the canonical package-free encoding."""
    return Hash128(xxhash.xxh3_128_intdigest(canonical_encode(cf), seed=HASH_SEED))


def _iter_class_files(data: bytes, label: str, depth: int):
    """Yield (entry path, class bytes) from a ZIP, recursing into nested
    jars up to ``depth`` levels."""
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except (zipfile.BadZipFile, zipfile.LargeZipFile) as exc:
        raise MalformedArchive(f"{label}: {exc}") from exc
    with archive:
        for info in archive.infolist():
            name = info.filename
            if name.endswith("/"):
                continue
            path = f"{label}!/{name}" if label else name
            if name.endswith(".class"):
                basename = name.rsplit("/", 1)[-1]
                if basename in EXCLUDED_CLASS_BASENAMES:
                    continue
                try:
                    yield path, archive.read(info)
                except Exception as exc:  # corrupt member: skip, keep scanning
                    logger.warning("unreadable archive member %s: %s", path, exc)
            elif depth > 0 and name.lower().endswith(NESTED_ARCHIVE_SUFFIXES):
                try:
                    nested = archive.read(info)
                except Exception as exc:
                    logger.warning("unreadable nested archive %s: %s", path, exc)
                    continue
                try:
                    yield from _iter_class_files(nested, path, depth - 1)
                except MalformedArchive as exc:
                    logger.warning("skipping malformed nested archive: %s", exc)


def iter_archive_class_hashes(data: bytes, label: str = "",
                              depth: int = DEFAULT_NESTED_DEPTH):
    """Yield (entry path, qualified hash, unqualified hash) per class.

    Classes that fail to parse or canonicalize are skipped with a warning.
    """
    for path, raw in _iter_class_files(data, label, depth):
        try:
            cf = parse_class(raw)
            unq = unqualified_hash(cf)
        except (MalformedClassFile, MalformedDescriptor, MalformedSignature,
                UnsupportedConstruct) as exc:
            logger.warning("skipping class %s: %s", path, exc)
            continue
        yield path, qualified_hash(raw), unq


def _hash_archive(data: bytes, label: str, depth: int) -> tuple[set[Hash128], set[Hash128], int]:
    qualified: set[Hash128] = set()
    unqualified: set[Hash128] = set()
    count = 0
    for _, q, u in iter_archive_class_hashes(data, label, depth):
        qualified.add(q)
        unqualified.add(u)
        count += 1
    return qualified, unqualified, count


def fingerprint_archive(archive: bytes, coordinate: Coordinate,
                        nested_depth: int = DEFAULT_NESTED_DEPTH) -> Fingerprint:
    """Hash every class in a JAR (and nested jars) into a Fingerprint.

    Raises MalformedArchive for non-ZIP input and EmptyArtifact when no
    class could be hashed; the caller decides whether to exclude it.
    """
    qualified, unqualified, count = _hash_archive(archive, str(coordinate), nested_depth)
    if count == 0:
        raise EmptyArtifact(f"{coordinate}: no hashable classes")
    return Fingerprint(coordinate, frozenset(qualified), frozenset(unqualified), count)


def scan_sets(archive: bytes, coordinate: Coordinate,
              nested_depth: int = DEFAULT_NESTED_DEPTH) -> ScanSets:
    """Hash sets for a dependency under scan; empty sets are not an error."""
    qualified, unqualified, _ = _hash_archive(archive, str(coordinate), nested_depth)
    return ScanSets(coordinate, frozenset(qualified), frozenset(unqualified))
