"""Hashing conformance and archive fingerprinting."""

import random

import pytest

from conftest import class_entries, make_jar
from xxh3_reference import xxh3_128 as reference_xxh3_128

from unshade.classfile import parse_class
from unshade.coordinates import Coordinate
from unshade.errors import EmptyArtifact, MalformedArchive
from unshade.fingerprint import (
    Hash128,
    fingerprint_archive,
    qualified_hash,
    scan_sets,
    unqualified_hash,
)
from unshade.relocate import RelocationRule, relocate

COORD = Coordinate("com.example", "fixture", "1.0")

# XXH3-128 seed-0 digests of the canonical PRNG-filled sanity buffer
# (byte generator seeded with 2654435761, multiplied by
# 11400714785074694797 per byte, top byte taken). Frozen from two
# independent implementations that agree bit-for-bit.
SANITY_PRNG_INIT = 2654435761
SANITY_PRNG_MULT = 11400714785074694797
SANITY_VECTORS = [
    (0, "99aa06d3014798d86001c324468d497f"),
    (1, "a6cd5e9392000f6ac44bdff4074eecdb"),
    (6, "082afe0b8162d12a3e7039bdda43cfc6"),
    (12, "6e3efd8fc7802b18061a192713f69ad9"),
    (24, "0ce966e4678d37611e7044d28b1b901d"),
    (48, "a002ac4e5478227ef942219aed80f67b"),
    (81, "4952f58181ab00425e8bafb9f95fb803"),
    (222, "337e09641b948717f1aebd597cec6b3a"),
    (403, "1b6de21e332dd73dcdeb804d65c6dea4"),
    (512, "18d2d110dcc9bca1617e49599013cb6b"),
    (2048, "f736557fd47073a5dd59e2c3a5f038e0"),
    (2240, "ccb134fbfa7ce49d6e73a90539cf2948"),
    (2367, "e89c0f6ff369b427cb37aeb9e5d361ed"),
]


def sanity_buffer(length: int) -> bytes:
    out = bytearray()
    state = SANITY_PRNG_INIT
    for _ in range(length):
        out.append((state >> 56) & 0xFF)
        state = (state * SANITY_PRNG_MULT) % (1 << 64)
    return bytes(out)


def test_qualified_hash_matches_frozen_vectors():
    buf = sanity_buffer(max(n for n, _ in SANITY_VECTORS))
    for length, expected in SANITY_VECTORS:
        assert str(qualified_hash(buf[:length])) == expected


def test_qualified_hash_matches_independent_reference():
    rng = random.Random(7)
    for length in [0, 1, 3, 5, 9, 17, 64, 130, 241, 600, 3000]:
        data = bytes(rng.randrange(256) for _ in range(length))
        assert int(qualified_hash(data)) == reference_xxh3_128(data, 0)


def test_hash_determinism(corpus):
    data = corpus["com/example/utils/Foo"]
    assert qualified_hash(data) == qualified_hash(data)


def test_hash128_rendering():
    h = Hash128(0x1)
    assert str(h) == "0" * 31 + "1"
    assert Hash128.from_hex(str(h)) == h
    assert Hash128.from_bytes_be(h.to_bytes_be()) == h


def test_unqualified_hash_survives_relocation(corpus):
    cf = parse_class(corpus["com/example/utils/TryCatch"])
    moved = relocate(cf, [RelocationRule("com/example", "org/modified")])
    assert unqualified_hash(moved) == unqualified_hash(cf)


def test_unqualified_hash_discriminates(corpus):
    a = parse_class(corpus["com/example/utils/Foo"])
    b = parse_class(corpus["com/example/utils/Bar"])
    assert unqualified_hash(a) != unqualified_hash(b)


def test_default_package_class_hashes(corpus):
    cf = parse_class(corpus["RootHelper"])
    assert unqualified_hash(cf) == unqualified_hash(parse_class(cf.raw_bytes))


# -- archives ----------------------------------------------------------------

def test_fingerprint_counts_distinct_classes(corpus):
    jar = make_jar(class_entries(["com/example/utils/Foo", "com/example/utils/Bar",
                                  "com/example/utils/Empty"]))
    fp = fingerprint_archive(jar, COORD)
    assert len(fp.qualified) == 3
    assert fp.class_count == 3


def test_duplicate_entries_collapse(corpus):
    foo = corpus["com/example/utils/Foo"]
    jar = make_jar({"a/Foo.class": foo, "b/Foo.class": foo})
    fp = fingerprint_archive(jar, COORD)
    assert len(fp.qualified) == 1
    assert fp.class_count == 2


def test_module_info_only_archive_is_empty(corpus):
    jar = make_jar({"module-info.class": corpus["com/example/utils/Empty"],
                    "com/example/package-info.class": corpus["com/example/utils/Empty"]})
    with pytest.raises(EmptyArtifact):
        fingerprint_archive(jar, COORD)


def test_not_a_zip_raises():
    with pytest.raises(MalformedArchive):
        fingerprint_archive(b"definitely not a zip", COORD)


def test_malformed_class_skipped_with_warning(corpus, caplog):
    jar = make_jar({"Good.class": corpus["com/example/utils/Foo"],
                    "Bad.class": b"\x00\x01\x02"})
    with caplog.at_level("WARNING"):
        fp = fingerprint_archive(jar, COORD)
    assert len(fp.qualified) == 1
    assert any("skipping class" in r.message for r in caplog.records)


def test_entry_order_does_not_matter(corpus):
    entries = class_entries(["com/example/utils/Foo", "com/example/utils/Bar",
                             "com/example/utils/Arith"])
    jar1 = make_jar(entries, order=list(entries))
    jar2 = make_jar(entries, order=list(reversed(list(entries))))
    fp1 = fingerprint_archive(jar1, COORD)
    fp2 = fingerprint_archive(jar2, COORD)
    assert fp1 == fp2


def test_nested_jar_recursion_depth(corpus):
    inner = make_jar(class_entries(["com/example/utils/Bar"]))
    middle = make_jar({"lib/inner.jar": inner,
                       **class_entries(["com/example/utils/Foo"])})
    outer = make_jar({"BOOT-INF/middle.jar": middle})

    depth1 = fingerprint_archive(middle, COORD, nested_depth=1)
    assert len(depth1.qualified) == 2  # Foo + Bar from inner.jar

    depth0 = fingerprint_archive(middle, COORD, nested_depth=0)
    assert len(depth0.qualified) == 1  # nested jar ignored

    with pytest.raises(EmptyArtifact):
        fingerprint_archive(outer, COORD, nested_depth=0)  # everything is nested
    depth1_outer = fingerprint_archive(outer, COORD, nested_depth=1)
    assert len(depth1_outer.qualified) == 1  # Foo visible, inner.jar not recursed
    depth2 = fingerprint_archive(outer, COORD, nested_depth=2)
    assert len(depth2.qualified) == 2


def test_meta_inf_versions_classes_included(corpus):
    jar = make_jar({
        "com/example/utils/Foo.class": corpus["com/example/utils/Foo"],
        "META-INF/versions/11/com/example/utils/Bar.class": corpus["com/example/utils/Bar"],
    })
    fp = fingerprint_archive(jar, COORD)
    assert len(fp.qualified) == 2


def test_scan_sets_tolerates_empty(corpus):
    sets = scan_sets(make_jar({"README.txt": b"hello"}), COORD)
    assert not sets.qualified and not sets.unqualified


def test_scan_sets_union_of_bundled(corpus):
    jar_a = make_jar(class_entries(["com/example/utils/Foo"]))
    jar_b = make_jar(class_entries(["com/example/utils/Bar"]))
    uber = make_jar(class_entries(["com/example/utils/Foo", "com/example/utils/Bar"]))
    fp_a = fingerprint_archive(jar_a, Coordinate("g", "a", "1"))
    fp_b = fingerprint_archive(jar_b, Coordinate("g", "b", "1"))
    sets = scan_sets(uber, COORD)
    assert sets.qualified == fp_a.qualified | fp_b.qualified


def test_archive_level_relocation_invariance(corpus, rule_sets):
    names = ["com/example/utils/Foo", "com/example/utils/Bar",
             "com/example/utils/TryCatch", "com/example/utils/LambdaUser"]
    original = fingerprint_archive(make_jar(class_entries(names)), COORD)
    rules = rule_sets[0]  # com/example -> org/shaded
    moved_entries = {}
    for name in names:
        moved = relocate(parse_class(corpus[name]), rules)
        moved_entries[f"{moved.this_name()}.class"] = moved.raw_bytes
    relocated = fingerprint_archive(make_jar(moved_entries), COORD)
    assert relocated.unqualified == original.unqualified
    # every class references its own package, so raw hashes all moved
    assert relocated.qualified.isdisjoint(original.qualified)
