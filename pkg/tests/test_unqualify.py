"""Unqualification ops and the canonical encoding's independence claims."""

import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unshade.classfile import (
    CONSTANT_Utf8,
    ConstantPool,
    ConstantPoolEntry,
    parse_class,
    serialize_class,
)
from unshade.unqualify import (
    canonical_encode,
    simple_name,
    unqualify_descriptor,
    unqualify_descriptor_text,
    unqualify_signature,
    unqualify_signature_text,
)
from unshade.descriptors import parse_descriptor, parse_signature

from classbuilder import ACC_PUBLIC, Asm, ClassBuilder, code_attr


def test_simple_name_examples():
    assert simple_name("com/example/utils/Foo") == "Foo"
    assert simple_name("Foo") == "Foo"
    assert simple_name("com/example/Foo$Bar") == "Foo$Bar"


@given(st.lists(st.text(alphabet="abcXYZ$_12", min_size=1, max_size=6), min_size=1, max_size=5))
@settings(max_examples=200, deadline=None)
def test_simple_name_idempotent(segments):
    name = "/".join(segments)
    assert simple_name(simple_name(name)) == simple_name(name)


def test_unqualify_descriptor_examples():
    assert unqualify_descriptor_text("(Lcom/example/utils/Foo;I)Ljava/lang/String;") == "(LFoo;I)LString;"
    assert unqualify_descriptor_text("(II)V") == "(II)V"
    assert unqualify_descriptor_text("[Lcom/example/utils/Foo;") == "[LFoo;"


def test_unqualify_signature_examples():
    assert unqualify_signature_text("Ljava/util/List<Lcom/example/utils/Foo;>;") == "LList<LFoo;>;"
    assert unqualify_signature_text("TT;") == "TT;"
    assert unqualify_signature_text("<T:Lcom/example/Base;>()V") == "<T:LBase;>()V"


@pytest.mark.parametrize("text", [
    "(Lcom/example/utils/Foo;I)Ljava/lang/String;",
    "[[Lcom/a/B;", "I", "()V",
])
def test_unqualify_descriptor_idempotent(text):
    once = unqualify_descriptor(parse_descriptor(text))
    assert unqualify_descriptor(once) == once


@pytest.mark.parametrize("text", [
    "Ljava/util/List<Lcom/example/utils/Foo;>;",
    "<T:Lcom/example/Base;:Lcom/example/Iface;>(TT;)Lcom/x/Out;^Lcom/err/E;",
    "Lcom/example/Outer<+Lcom/a/B;>.Inner<*>;",
])
def test_unqualify_signature_idempotent(text):
    once = unqualify_signature(parse_signature(text))
    assert unqualify_signature(once) == once


def test_canonical_deterministic(corpus):
    for data in corpus.values():
        cf = parse_class(data)
        assert canonical_encode(cf) == canonical_encode(cf)


def test_canonical_ignores_unused_pool_entry(corpus):
    original = parse_class(corpus["com/example/utils/Foo"])
    padded = ConstantPool(list(original.pool.entries)
                          + [ConstantPoolEntry(CONSTANT_Utf8, raw=b"unused", text="unused")])
    import dataclasses

    modified = dataclasses.replace(original, pool=padded)
    reparsed = parse_class(serialize_class(modified))
    assert reparsed.raw_bytes != original.raw_bytes
    assert canonical_encode(reparsed) == canonical_encode(original)


def _two_variants(instruction_byte: int) -> bytes:
    b = ClassBuilder("com/example/utils/Variant")
    b.default_constructor()
    asm = Asm(b.pool)
    asm.iconst(1).op(instruction_byte).ireturn()
    b.method(ACC_PUBLIC, "calc", "(I)I", [code_attr(b.pool, asm, 2, 2)])
    return b.build()


def test_canonical_discriminates_instruction_change():
    add = parse_class(_two_variants(0x60))  # iadd
    sub = parse_class(_two_variants(0x64))  # isub
    assert canonical_encode(add) != canonical_encode(sub)


def test_canonical_discriminates_flags_members_handlers(corpus):
    seen = {}
    for name, data in corpus.items():
        encoding = canonical_encode(parse_class(data))
        assert encoding not in seen.values(), f"{name} collides"
        seen[name] = encoding


def test_canonical_excludes_version(corpus):
    data = bytearray(corpus["com/example/utils/Foo"])
    struct.pack_into(">HH", data, 4, 3, 61)  # bump minor/major
    assert canonical_encode(parse_class(bytes(data))) == canonical_encode(
        parse_class(corpus["com/example/utils/Foo"]))


def test_canonical_excludes_debug_attributes(corpus):
    # Debuggy carries SourceFile/LineNumberTable/LocalVariable*/StackMapTable;
    # a stripped twin must encode identically.
    b = ClassBuilder("com/example/utils/Debuggy")
    b.default_constructor()
    bare = canonical_encode(parse_class(b.build()))
    full = canonical_encode(parse_class(corpus["com/example/utils/Debuggy"]))
    assert bare == full


def test_canonical_keeps_string_literals_qualified(corpus):
    encoding = canonical_encode(parse_class(corpus["com/example/utils/Strings"]))
    assert b"com.example.utils.Foo" in encoding
    assert b"com/example/utils/Foo" in encoding


def test_canonical_strips_package_names(corpus):
    encoding = canonical_encode(parse_class(corpus["com/example/utils/Foo"]))
    assert b"com/example" not in encoding
    assert b"java/lang" not in encoding
