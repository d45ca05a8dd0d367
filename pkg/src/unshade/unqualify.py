"""Package-information removal and the canonical byte encoding.

A re-packaged class differs from its original only in package names and in
constant-pool layout. ``canonical_encode`` erases both: every name is
reduced to its simple (package-free) form and every constant-pool operand
is resolved inline, so permuting, deduplicating or extending the pool of
the source class cannot change the output. Hashing this stream yields the
package-independent half of a class fingerprint.

Canonical stream layout (bit-exact, little-endian; strings are u32
length-prefixed UTF-8): u16 access_flags; this name; super name ('' when
absent); u16 interface count + names; u16 field count + field records;
u16 method count + method records; u16 attribute count + attribute
records sorted by name. Each attribute record is name + u32 payload
length + payload; member records are u16 flags + name + descriptor +
their own sorted attribute records.
"""

from __future__ import annotations

import struct
from functools import lru_cache

from . import attrs, opcodes
from .classfile import (
    CONSTANT_Class,
    CONSTANT_Double,
    CONSTANT_Dynamic,
    CONSTANT_Fieldref,
    CONSTANT_Float,
    CONSTANT_Integer,
    CONSTANT_InterfaceMethodref,
    CONSTANT_InvokeDynamic,
    CONSTANT_Long,
    CONSTANT_MethodHandle,
    CONSTANT_MethodType,
    CONSTANT_Methodref,
    CONSTANT_Module,
    CONSTANT_NameAndType,
    CONSTANT_Package,
    CONSTANT_String,
    CONSTANT_Utf8,
    ClassFile,
    ConstantPool,
    MemberInfo,
)
from .descriptors import (
    Descriptor,
    SignatureTree,
    map_descriptor_names,
    map_signature_names,
    parse_descriptor,
    parse_signature,
)
from .errors import MalformedClassFile, UnsupportedConstruct

# Attributes whose content survives into the canonical stream. Everything
# else (debug tables, compiler-variant metadata, frame tables) is dropped:
# rewriting tools regenerate or strip those, so they cannot contribute to a
# package-independent identity.
CANONICAL_ATTRIBUTES = frozenset({
    "Code", "Exceptions", "ConstantValue", "Signature", "InnerClasses",
    "RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations",
    "RuntimeVisibleParameterAnnotations", "RuntimeInvisibleParameterAnnotations",
    "AnnotationDefault", "NestHost", "NestMembers", "PermittedSubclasses",
})


def simple_name(internal_name: str) -> str:
    """Strip the package from an internal name; '$' separators survive."""
    return internal_name.rsplit("/", 1)[-1]


def unqualify_descriptor(d: Descriptor) -> Descriptor:
    """Replace every object-type name in a descriptor by its simple name."""
    return map_descriptor_names(d, simple_name)


def unqualify_signature(s: SignatureTree) -> SignatureTree:
    """Strip package prefixes from every class type in a signature."""
    return map_signature_names(s, simple_name)


@lru_cache(maxsize=16384)
def unqualify_descriptor_text(text: str) -> str:
    return unqualify_descriptor(parse_descriptor(text)).unparse()


@lru_cache(maxsize=4096)
def unqualify_signature_text(text: str) -> str:
    return unqualify_signature(parse_signature(text)).unparse()


def unqualify_class_entry_name(name: str) -> str:
    """Class entries may hold array descriptors instead of plain names."""
    if name.startswith("["):
        return unqualify_descriptor_text(name)
    return simple_name(name)


class _Writer:
    """Little-endian canonical-stream writer."""

    __slots__ = ("buf",)

    def __init__(self) -> None:
        self.buf = bytearray()

    def u8(self, v: int) -> None:
        self.buf.append(v)

    def u16(self, v: int) -> None:
        self.buf += struct.pack("<H", v)

    def u32(self, v: int) -> None:
        self.buf += struct.pack("<I", v)

    def raw(self, b: bytes) -> None:
        self.buf += b

    def string(self, s: str) -> None:
        encoded = s.encode("utf-8", errors="surrogatepass")
        self.buf += struct.pack("<I", len(encoded))
        self.buf += encoded


class _Resolver:
    """Resolves constant-pool references into tagged, unqualified tuples."""

    def __init__(self, cf: ClassFile):
        self.pool = cf.pool
        self._bootstrap: tuple[attrs.BootstrapMethod, ...] | None = None
        self._bootstrap_loaded = False
        self._cf = cf

    def bootstrap_methods(self) -> tuple[attrs.BootstrapMethod, ...]:
        if not self._bootstrap_loaded:
            attr = self._cf.attribute("BootstrapMethods")
            self._bootstrap = None if attr is None else attrs.parse_bootstrap_methods(attr.payload)
            self._bootstrap_loaded = True
        if self._bootstrap is None:
            raise UnsupportedConstruct("dynamic constant without a BootstrapMethods attribute")
        return self._bootstrap

    def resolve(self, w: _Writer, index: int, _depth: int = 0) -> None:
        if _depth > 16:
            raise UnsupportedConstruct("constant-pool resolution too deep (cycle?)")
        pool = self.pool
        e = pool.entry(index)
        tag = e.tag
        w.u8(tag)
        if tag == CONSTANT_Utf8:
            w.string(e.text)
        elif tag in (CONSTANT_Integer, CONSTANT_Float, CONSTANT_Long, CONSTANT_Double):
            w.raw(e.raw)
        elif tag == CONSTANT_Class:
            w.string(unqualify_class_entry_name(pool.utf8(e.ref1)))
        elif tag == CONSTANT_String:
            # String literals are deliberately left qualified: rewriting
            # arbitrary text risks false canonical collisions.
            w.string(pool.utf8(e.ref1))
        elif tag in (CONSTANT_Fieldref, CONSTANT_Methodref, CONSTANT_InterfaceMethodref):
            w.string(unqualify_class_entry_name(pool.class_name(e.ref1)))
            self._name_and_type(w, e.ref2)
        elif tag == CONSTANT_NameAndType:
            self._name_and_type(w, index)
        elif tag == CONSTANT_MethodHandle:
            w.u8(e.kind)
            self.resolve(w, e.ref1, _depth + 1)
        elif tag == CONSTANT_MethodType:
            w.string(unqualify_descriptor_text(pool.utf8(e.ref1)))
        elif tag in (CONSTANT_Dynamic, CONSTANT_InvokeDynamic):
            self._name_and_type(w, e.ref2)
            methods = self.bootstrap_methods()
            if e.ref1 >= len(methods):
                raise UnsupportedConstruct(f"bootstrap method index {e.ref1} out of range")
            bsm = methods[e.ref1]
            self.resolve(w, bsm.handle_index, _depth + 1)
            w.u16(len(bsm.args))
            for arg in bsm.args:
                self.resolve(w, arg, _depth + 1)
        elif tag in (CONSTANT_Module, CONSTANT_Package):
            w.string(pool.utf8(e.ref1))
        else:  # pragma: no cover - parse rejects unknown tags
            raise UnsupportedConstruct(f"constant tag {tag} in a live reference")

    def _name_and_type(self, w: _Writer, index: int) -> None:
        nat = self.pool.entry(index, CONSTANT_NameAndType)
        w.string(self.pool.utf8(nat.ref1))
        w.string(unqualify_descriptor_text(self.pool.utf8(nat.ref2)))


def _canonical_instructions(code: bytes, resolver: _Resolver) -> bytes:
    w = _Writer()
    for start, op, end in opcodes.iter_instructions(code):
        if op in opcodes.CP_OPS:
            width, trailing = opcodes.CP_OPS[op]
            # ldc and ldc_w differ only in index width; one canonical form.
            w.u8(opcodes.LDC if op == opcodes.LDC_W else op)
            if width == 1:
                index = code[start + 1]
            else:
                index = struct.unpack_from(">H", code, start + 1)[0]
            resolver.resolve(w, index)
            if trailing:
                w.raw(code[end - trailing:end])
        elif op in (opcodes.TABLESWITCH, opcodes.LOOKUPSWITCH):
            w.u8(op)
            base = (start + 4) & ~3  # skip alignment padding
            w.raw(code[base:end])
        else:
            w.raw(code[start:end])
    return bytes(w.buf)


def _canonical_code(payload: bytes, resolver: _Resolver) -> bytes:
    code_attr = attrs.parse_code(payload)
    w = _Writer()
    w.u16(code_attr.max_stack)
    w.u16(code_attr.max_locals)
    stream = _canonical_instructions(code_attr.code, resolver)
    w.u32(len(stream))
    w.raw(stream)
    w.u16(len(code_attr.handlers))
    pool = resolver.pool
    for h in code_attr.handlers:
        w.u16(h.start_pc)
        w.u16(h.end_pc)
        w.u16(h.handler_pc)
        catch = "" if h.catch_type == 0 else unqualify_class_entry_name(pool.class_name(h.catch_type))
        w.string(catch)
    # Nested attributes (LineNumberTable, StackMapTable, ...) are all
    # debug or frame metadata and are dropped.
    return bytes(w.buf)


def _canonical_element_value(w: _Writer, v: attrs.ElementValue, resolver: _Resolver) -> None:
    pool = resolver.pool
    w.u8(ord(v.tag))
    if v.tag in "BCDFIJSZs":
        resolver.resolve(w, v.const_index)
    elif v.tag == "e":
        w.string(unqualify_descriptor_text(pool.utf8(v.type_name_index)))
        w.string(pool.utf8(v.const_name_index))
    elif v.tag == "c":
        text = pool.utf8(v.class_index)
        w.string(text if text == "V" else unqualify_descriptor_text(text))
    elif v.tag == "@":
        assert v.annotation is not None
        _canonical_annotation(w, v.annotation, resolver)
    elif v.tag == "[":
        w.u16(len(v.values))
        for nested in v.values:
            _canonical_element_value(w, nested, resolver)


def _canonical_annotation(w: _Writer, a: attrs.Annotation, resolver: _Resolver) -> None:
    w.string(unqualify_descriptor_text(resolver.pool.utf8(a.type_index)))
    w.u16(len(a.pairs))
    for name_index, value in a.pairs:
        w.string(resolver.pool.utf8(name_index))
        _canonical_element_value(w, value, resolver)


def _canonical_attribute_payload(name: str, payload: bytes, resolver: _Resolver) -> bytes:
    pool = resolver.pool
    w = _Writer()
    if name == "Code":
        return _canonical_code(payload, resolver)
    if name == "Exceptions":
        indexes = attrs.parse_class_index_list(payload)
        w.u16(len(indexes))
        for index in indexes:
            w.string(unqualify_class_entry_name(pool.class_name(index)))
    elif name == "ConstantValue":
        if len(payload) != 2:
            raise MalformedClassFile("ConstantValue payload must be 2 bytes")
        resolver.resolve(w, struct.unpack(">H", payload)[0])
    elif name == "Signature":
        if len(payload) != 2:
            raise MalformedClassFile("Signature payload must be 2 bytes")
        w.string(unqualify_signature_text(pool.utf8(struct.unpack(">H", payload)[0])))
    elif name == "InnerClasses":
        entries = attrs.parse_inner_classes(payload)
        w.u16(len(entries))
        for e in entries:
            w.string(unqualify_class_entry_name(pool.class_name(e.inner_index)))
            w.string("" if e.outer_index == 0 else unqualify_class_entry_name(pool.class_name(e.outer_index)))
            w.string("" if e.name_index == 0 else pool.utf8(e.name_index))
            w.u16(e.access_flags)
    elif name in ("RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations"):
        annotations = attrs.parse_annotations(payload)
        w.u16(len(annotations))
        for a in annotations:
            _canonical_annotation(w, a, resolver)
    elif name in ("RuntimeVisibleParameterAnnotations", "RuntimeInvisibleParameterAnnotations"):
        params = attrs.parse_parameter_annotations(payload)
        w.u8(len(params))
        for annotations in params:
            w.u16(len(annotations))
            for a in annotations:
                _canonical_annotation(w, a, resolver)
    elif name == "AnnotationDefault":
        _canonical_element_value(w, attrs.parse_annotation_default(payload), resolver)
    elif name == "NestHost":
        if len(payload) != 2:
            raise MalformedClassFile("NestHost payload must be 2 bytes")
        w.string(unqualify_class_entry_name(pool.class_name(struct.unpack(">H", payload)[0])))
    elif name in ("NestMembers", "PermittedSubclasses"):
        indexes = attrs.parse_class_index_list(payload)
        w.u16(len(indexes))
        for index in indexes:
            w.string(unqualify_class_entry_name(pool.class_name(index)))
    else:  # pragma: no cover - callers filter on CANONICAL_ATTRIBUTES
        raise UnsupportedConstruct(f"no canonical form for attribute {name}")
    return bytes(w.buf)


def _canonical_attributes(w: _Writer, attributes, pool: ConstantPool, resolver: _Resolver) -> None:
    records = []
    for attr in attributes:
        name = pool.utf8(attr.name_index)
        if name in CANONICAL_ATTRIBUTES:
            records.append((name, _canonical_attribute_payload(name, attr.payload, resolver)))
    records.sort()
    w.u16(len(records))
    for name, payload in records:
        w.string(name)
        w.u32(len(payload))
        w.raw(payload)


def _canonical_member(w: _Writer, m: MemberInfo, pool: ConstantPool, resolver: _Resolver) -> None:
    w.u16(m.access_flags)
    w.string(pool.utf8(m.name_index))
    w.string(unqualify_descriptor_text(pool.utf8(m.descriptor_index)))
    _canonical_attributes(w, m.attributes, pool, resolver)


def canonical_encode(cf: ClassFile) -> bytes:
    """Deterministic, pool-free, package-free encoding of a class.

    Relocating packages or perturbing the constant pool of the input
    leaves the output byte-identical; any retained semantic difference
    (flags, members, instructions, handlers) changes it. The class-file
    version is deliberately excluded: rewriting tools may bump it.
    """
    pool = cf.pool
    resolver = _Resolver(cf)
    w = _Writer()
    w.u16(cf.access_flags)
    w.string(simple_name(cf.this_name()))
    super_name = cf.super_name()
    w.string("" if super_name is None else simple_name(super_name))
    w.u16(len(cf.interfaces))
    for index in cf.interfaces:
        w.string(unqualify_class_entry_name(pool.class_name(index)))
    w.u16(len(cf.fields))
    for f in cf.fields:
        _canonical_member(w, f, pool, resolver)
    w.u16(len(cf.methods))
    for m in cf.methods:
        _canonical_member(w, m, pool, resolver)
    _canonical_attributes(w, cf.attributes, pool, resolver)
    return bytes(w.buf)
