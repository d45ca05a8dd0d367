"""Versioned binary knowledge base: artifact table + inverted hash indexes.

Write-once, read-many. The two indexes are flat sorted arrays of
(hash, artifact id) pairs searched by bisection; artifact ids are dense
integers assigned in sorted-coordinate order, which makes the whole file
a deterministic function of its logical content and lets the matcher use
plain counter arrays.

File format (integers little-endian unless noted): magic "UNSHKB01";
u8 hash algorithm id (1 = XXH3-128 seed 0); u64 creation unix-seconds;
u32 artifact count, then per artifact u16-length-prefixed UTF-8 group /
artifact / version, u32 qualified-set size, u32 unqualified-set size,
u16 vulnerability count + u16-length-prefixed ids; u64 qualified entry
count + entries (16-byte big-endian hash, u32 id); u64 unqualified entry
count + entries (same layout).
"""

from __future__ import annotations

import struct
import time
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path

import xxhash

from .coordinates import Coordinate
from .errors import CorruptKb, DuplicateCoordinate, VersionMismatch
from .fingerprint import Fingerprint, Hash128

MAGIC = b"UNSHKB01"
MAGIC_PREFIX = b"UNSHKB"
HASH_ALGORITHM_XXH3_128_SEED0 = 1


@dataclass(frozen=True)
class ArtifactRecord:
    coordinate: Coordinate
    q_count: int
    u_count: int
    vulnerability_ids: tuple[str, ...]


@dataclass
class KbStats:
    artifacts: int = 0
    vulnerabilities: int = 0
    qualified_entries: int = 0
    unqualified_entries: int = 0
    skipped_empty: int = 0
    skipped_unresolved: int = 0
    skipped_malformed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _write_str(out: bytearray, text: str) -> None:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for knowledge base: {text[:40]!r}...")
    out += struct.pack("<H", len(raw))
    out += raw


def build(fingerprints: list[Fingerprint], vuln_map: dict[Coordinate, set[str]],
          out: Path, timestamp: int | None = None) -> KbStats:
    """Write a knowledge base; byte-identical for identical input sets.

    Every fingerprint coordinate must appear in vuln_map. The same
    coordinate presented twice with identical hash sets collapses to one
    record; differing hash sets are a hard DuplicateCoordinate error.
    """
    by_coordinate: dict[Coordinate, Fingerprint] = {}
    for fp in fingerprints:
        existing = by_coordinate.get(fp.coordinate)
        if existing is not None:
            if (existing.qualified, existing.unqualified) != (fp.qualified, fp.unqualified):
                raise DuplicateCoordinate(str(fp.coordinate))
            continue
        if fp.coordinate not in vuln_map:
            raise ValueError(f"fingerprint {fp.coordinate} has no vulnerability mapping")
        if not vuln_map[fp.coordinate]:
            raise ValueError(f"coordinate {fp.coordinate} maps to an empty vulnerability set")
        by_coordinate[fp.coordinate] = fp

    ordered = sorted(by_coordinate)  # dense ids in sorted-coordinate order
    out_buf = bytearray(MAGIC)
    out_buf += struct.pack("<B", HASH_ALGORITHM_XXH3_128_SEED0)
    out_buf += struct.pack("<Q", int(time.time()) if timestamp is None else timestamp)
    out_buf += struct.pack("<I", len(ordered))
    all_vulns: set[str] = set()
    q_entries: list[tuple[int, int]] = []
    u_entries: list[tuple[int, int]] = []
    for artifact_id, coordinate in enumerate(ordered):
        fp = by_coordinate[coordinate]
        vulns = sorted(vuln_map[coordinate])
        all_vulns.update(vulns)
        _write_str(out_buf, coordinate.group)
        _write_str(out_buf, coordinate.artifact)
        _write_str(out_buf, coordinate.version)
        out_buf += struct.pack("<II", len(fp.qualified), len(fp.unqualified))
        out_buf += struct.pack("<H", len(vulns))
        for vuln in vulns:
            _write_str(out_buf, vuln)
        q_entries.extend((h, artifact_id) for h in fp.qualified)
        u_entries.extend((h, artifact_id) for h in fp.unqualified)
    for entries in (q_entries, u_entries):
        entries.sort()
        out_buf += struct.pack("<Q", len(entries))
        for h, artifact_id in entries:
            out_buf += int(h).to_bytes(16, "big")
            out_buf += struct.pack("<I", artifact_id)

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_bytes(out_buf)
    tmp.replace(out)
    return KbStats(
        artifacts=len(ordered),
        vulnerabilities=len(all_vulns),
        qualified_entries=len(q_entries),
        unqualified_entries=len(u_entries),
    )


class KnowledgeBase:
    """Read-only, fully validated in-memory view of a KB file.

    Immutable after open; safe for any number of concurrent readers.
    """

    def __init__(self, records: list[ArtifactRecord], creation_time: int,
                 q_index: tuple[list[int], list[int]], u_index: tuple[list[int], list[int]]):
        self.records = records
        self.creation_time = creation_time
        self._q_hashes, self._q_ids = q_index
        self._u_hashes, self._u_ids = u_index
        self._id_by_coordinate = {r.coordinate: i for i, r in enumerate(records)}
        self._digests: list[bytes] | None = None

    def __len__(self) -> int:
        return len(self.records)

    def artifact(self, artifact_id: int) -> ArtifactRecord:
        return self.records[artifact_id]

    def id_of(self, coordinate: Coordinate) -> int | None:
        return self._id_by_coordinate.get(coordinate)

    @staticmethod
    def _lookup(hashes: list[int], ids: list[int], h: int) -> list[int]:
        lo = bisect_left(hashes, h)
        out = []
        while lo < len(hashes) and hashes[lo] == h:
            out.append(ids[lo])
            lo += 1
        return out

    def lookup_qualified(self, h: Hash128) -> list[int]:
        return self._lookup(self._q_hashes, self._q_ids, h)

    def lookup_unqualified(self, h: Hash128) -> list[int]:
        return self._lookup(self._u_hashes, self._u_ids, h)

    def qualified_index(self) -> tuple[list[int], list[int]]:
        return self._q_hashes, self._q_ids

    def unqualified_index(self) -> tuple[list[int], list[int]]:
        return self._u_hashes, self._u_ids

    def hash_sets(self, artifact_id: int) -> tuple[frozenset[Hash128], frozenset[Hash128]]:
        """Reconstruct (Q, U) for one artifact by scanning the indexes."""
        q = frozenset(Hash128(h) for h, i in zip(self._q_hashes, self._q_ids) if i == artifact_id)
        u = frozenset(Hash128(h) for h, i in zip(self._u_hashes, self._u_ids) if i == artifact_id)
        return q, u

    def set_digest(self, artifact_id: int) -> bytes:
        """Digest of an artifact's exact (Q, U) sets, for bytecode grouping."""
        if self._digests is None:
            per_id: list[xxhash.xxh3_128] = [xxhash.xxh3_128() for _ in self.records]
            for hashes, ids, marker in ((self._q_hashes, self._q_ids, b"Q"),
                                        (self._u_hashes, self._u_ids, b"U")):
                for h, i in zip(hashes, ids):  # index order is sorted, so per-id feed order is stable
                    per_id[i].update(marker)
                    per_id[i].update(h.to_bytes(16, "big"))
            self._digests = [d.digest() for d in per_id]
        return self._digests[artifact_id]

    def stats(self) -> KbStats:
        vulns: set[str] = set()
        for record in self.records:
            vulns.update(record.vulnerability_ids)
        return KbStats(
            artifacts=len(self.records),
            vulnerabilities=len(vulns),
            qualified_entries=len(self._q_hashes),
            unqualified_entries=len(self._u_hashes),
        )


class _KbReader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise CorruptKb("truncated knowledge base")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (length,) = self.unpack("<H")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptKb(f"invalid UTF-8 in knowledge base: {exc}") from exc


def _read_index(r: _KbReader, max_id: int) -> tuple[list[int], list[int]]:
    (count,) = r.unpack("<Q")
    hashes: list[int] = []
    ids: list[int] = []
    previous = (-1, -1)
    for _ in range(count):
        h = int.from_bytes(r.take(16), "big")
        (artifact_id,) = r.unpack("<I")
        if artifact_id >= max_id:
            raise CorruptKb(f"index references unknown artifact id {artifact_id}")
        pair = (h, artifact_id)
        if pair <= previous:
            raise CorruptKb("index entries not strictly ascending")
        previous = pair
        hashes.append(h)
        ids.append(artifact_id)
    return hashes, ids


def open_kb(path: Path) -> KnowledgeBase:
    """Load and validate a knowledge base for read-only use."""
    data = Path(path).read_bytes()
    r = _KbReader(data)
    magic = r.take(8)
    if magic != MAGIC:
        if magic.startswith(MAGIC_PREFIX):
            raise VersionMismatch(f"knowledge-base format {magic[6:8]!r}, expected {MAGIC[6:8]!r}")
        raise CorruptKb("bad magic, not a knowledge base")
    (algorithm,) = r.unpack("<B")
    if algorithm != HASH_ALGORITHM_XXH3_128_SEED0:
        raise VersionMismatch(f"unknown hash algorithm id {algorithm}")
    (creation_time,) = r.unpack("<Q")
    (artifact_count,) = r.unpack("<I")
    records = []
    for _ in range(artifact_count):
        group = r.string()
        artifact = r.string()
        version = r.string()
        q_count, u_count = r.unpack("<II")
        (vuln_count,) = r.unpack("<H")
        vulns = tuple(r.string() for _ in range(vuln_count))
        try:
            coordinate = Coordinate(group, artifact, version)
        except ValueError as exc:
            raise CorruptKb(str(exc)) from exc
        records.append(ArtifactRecord(coordinate, q_count, u_count, vulns))
    q_index = _read_index(r, artifact_count)
    u_index = _read_index(r, artifact_count)
    if r.pos != len(data):
        raise CorruptKb(f"{len(data) - r.pos} trailing bytes")
    # Per-artifact entry counts must match the stored set sizes.
    for ids, attr in ((q_index[1], "q_count"), (u_index[1], "u_count")):
        seen = [0] * artifact_count
        for artifact_id in ids:
            seen[artifact_id] += 1
        for artifact_id, record in enumerate(records):
            if seen[artifact_id] != getattr(record, attr):
                raise CorruptKb(
                    f"artifact {record.coordinate}: {attr} is {getattr(record, attr)} "
                    f"but index holds {seen[artifact_id]} entries")
    if len({r_.coordinate for r_ in records}) != len(records):
        raise CorruptKb("duplicate coordinates in artifact table")
    return KnowledgeBase(records, creation_time, q_index, u_index)
