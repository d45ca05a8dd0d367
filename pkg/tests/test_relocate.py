"""Package relocation behavior and its interaction with canonical encoding."""

import pytest

from unshade.classfile import parse_class, serialize_class
from unshade.errors import RelocationConflict
from unshade.fingerprint import qualified_hash, unqualified_hash
from unshade.relocate import RelocationRule, relocate
from unshade.unqualify import canonical_encode


def test_this_class_renamed(corpus):
    cf = parse_class(corpus["com/example/utils/Foo"])
    moved = relocate(cf, [RelocationRule("com/example", "org/modified")])
    assert moved.this_name() == "org/modified/utils/Foo"


def test_descriptor_and_refs_renamed(corpus):
    cf = parse_class(corpus["com/example/utils/Foo"])
    moved = relocate(cf, [RelocationRule("com/example/utils", "org/shaded")])
    descriptors = {moved.pool.utf8(f.descriptor_index) for f in moved.fields}
    assert descriptors == {"Lorg/shaded/Bar;"}
    assert serialize_class(moved) == moved.raw_bytes


def test_empty_rules_rebuild_pool_same_canonical(corpus):
    cf = parse_class(corpus["com/example/utils/Annotated"])
    moved = relocate(cf, [])
    assert canonical_encode(moved) == canonical_encode(cf)
    assert moved.this_name() == cf.this_name()


def test_relocated_raw_bytes_differ_and_qualified_hash_changes(corpus):
    cf = parse_class(corpus["com/example/utils/Foo"])
    moved = relocate(cf, [RelocationRule("com/example", "org/modified")])
    assert moved.raw_bytes != cf.raw_bytes
    assert qualified_hash(moved.raw_bytes) != qualified_hash(cf.raw_bytes)
    assert unqualified_hash(moved) == unqualified_hash(cf)


def test_invariance_across_corpus_and_rules(corpus, rule_sets):
    for rules in rule_sets:
        for name, data in corpus.items():
            cf = parse_class(data)
            moved = relocate(cf, rules)
            assert canonical_encode(moved) == canonical_encode(cf), (name, rules)


def test_longest_prefix_wins(corpus):
    cf = parse_class(corpus["com/example/utils/Foo"])
    rules = [RelocationRule("com/example", "org/other"),
             RelocationRule("com/example/utils", "org/modified/utils")]
    moved = relocate(cf, rules)
    assert moved.this_name() == "org/modified/utils/Foo"


def test_duplicate_prefix_conflict(corpus):
    cf = parse_class(corpus["com/example/utils/Foo"])
    with pytest.raises(RelocationConflict):
        relocate(cf, [RelocationRule("com/example", "a"),
                      RelocationRule("com/example", "b")])


def test_string_literals_untouched(corpus):
    cf = parse_class(corpus["com/example/utils/Strings"])
    moved = relocate(cf, [RelocationRule("com/example", "org/shaded")])
    texts = {e.text for e in moved.pool.entries if e is not None and e.tag == 1}
    assert "com.example.utils.Foo" in texts
    assert "com/example/utils/Foo" in texts  # the slash-form literal too


def test_prefix_insertion_rule(corpus):
    cf = parse_class(corpus["org/sample/lib/LibMain"])
    moved = relocate(cf, [RelocationRule("org/sample", "shaded/org/sample")])
    assert moved.this_name() == "shaded/org/sample/lib/LibMain"
    assert canonical_encode(moved) == canonical_encode(cf)


def test_bootstrap_arguments_renamed(corpus):
    cf = parse_class(corpus["com/example/utils/LambdaUser"])
    moved = relocate(cf, [RelocationRule("com/example/utils", "org/x")])
    method_types = {moved.pool.utf8(e.ref1)
                    for e in moved.pool.entries if e is not None and e.tag == 16}
    assert "(Lorg/x/Foo;)Lorg/x/Foo;" in method_types
    assert canonical_encode(moved) == canonical_encode(cf)


def test_invalid_rule_rejected():
    with pytest.raises(ValueError):
        RelocationRule("", "x")
    with pytest.raises(ValueError):
        RelocationRule("com.example", "x")
    with pytest.raises(ValueError):
        RelocationRule("com/example/", "x")


def test_relocate_is_reparseable_and_lossless(corpus, rule_sets):
    cf = parse_class(corpus["com/example/utils/Condy"])
    for rules in rule_sets:
        moved = relocate(cf, rules)
        again = parse_class(moved.raw_bytes)
        assert serialize_class(again) == moved.raw_bytes
