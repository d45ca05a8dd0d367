"""Package relocation: rewrite package prefixes the way shading tools do.

Used to manufacture re-packaged fixtures. The constant pool of the output
is rebuilt from scratch in first-use order with deduplication, which
deliberately produces a layout different from the input — real relocation
tools do the same, and package-independent hashing must shrug it off.

Instruction encodings are preserved (an ldc stays an ldc), so code arrays
keep their length and branch offsets stay valid. Debug and frame tables
that rewriting tools strip or regenerate (StackMapTable, type annotations,
SourceDebugExtension) are dropped, as are attributes this module does not
know how to remap.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

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
    AttributeInfo,
    ClassFile,
    ConstantPool,
    ConstantPoolEntry,
    MemberInfo,
    Reader,
    encode_mutf8,
    parse_class,
    serialize_class,
)
from .descriptors import map_descriptor_names, map_signature_names, parse_descriptor, parse_signature
from .errors import MalformedClassFile, RelocationConflict, UnsupportedConstruct

# Attributes stripped during relocation. Frame tables would need
# recomputation after a pool rebuild; the rest is debug metadata with
# code-offset targets that rewriting tools regenerate anyway.
_DROPPED_ATTRIBUTES = frozenset({
    "StackMapTable", "SourceDebugExtension",
    "RuntimeVisibleTypeAnnotations", "RuntimeInvisibleTypeAnnotations",
})


@dataclass(frozen=True)
class RelocationRule:
    """Rewrite internal names under ``from_prefix`` to live under ``to_prefix``."""

    from_prefix: str
    to_prefix: str

    def __post_init__(self) -> None:
        for label, prefix in (("from_prefix", self.from_prefix), ("to_prefix", self.to_prefix)):
            if prefix.startswith("/") or prefix.endswith("/") or "//" in prefix:
                raise ValueError(f"{label} {prefix!r} is not a valid package path")
            if any(ch in prefix for ch in ".;["):
                raise ValueError(f"{label} {prefix!r} contains characters invalid in package paths")
        if not self.from_prefix:
            raise ValueError("from_prefix must be non-empty")


def _rename_fn(rules: list[RelocationRule]):
    targets: dict[str, str] = {}
    for rule in rules:
        existing = targets.get(rule.from_prefix)
        if existing is not None and existing != rule.to_prefix:
            raise RelocationConflict(
                f"prefix {rule.from_prefix!r} relocated to both {existing!r} and {rule.to_prefix!r}")
        targets[rule.from_prefix] = rule.to_prefix
    # Longest prefix wins so nested rules resolve deterministically.
    ordered = sorted(targets.items(), key=lambda kv: len(kv[0]), reverse=True)

    def rename(name: str) -> str:
        for from_prefix, to_prefix in ordered:
            if name == from_prefix or name.startswith(from_prefix + "/"):
                suffix = name[len(from_prefix):]
                if not to_prefix:
                    return suffix.lstrip("/")
                return to_prefix + suffix
        return name

    return rename


class _PoolBuilder:
    """Fresh constant pool, interned in first-use order with dedup."""

    def __init__(self) -> None:
        self.entries: list[ConstantPoolEntry | None] = [None]
        self._memo: dict[tuple, int] = {}

    def _add(self, key: tuple, make, wide: bool = False) -> int:
        index = self._memo.get(key)
        if index is None:
            entry = make()
            index = len(self.entries)
            if index + (2 if wide else 1) > 0xFFFF:
                raise UnsupportedConstruct("relocated constant pool exceeds 65535 slots")
            self.entries.append(entry)
            if wide:
                self.entries.append(None)
            self._memo[key] = index
        return index

    def utf8(self, text: str) -> int:
        return self._add((CONSTANT_Utf8, text),
                         lambda: ConstantPoolEntry(CONSTANT_Utf8, raw=encode_mutf8(text), text=text))

    def class_(self, name: str) -> int:
        name_index = self.utf8(name)
        return self._add((CONSTANT_Class, name),
                         lambda: ConstantPoolEntry(CONSTANT_Class, ref1=name_index))

    def string(self, text: str) -> int:
        utf8_index = self.utf8(text)
        return self._add((CONSTANT_String, text),
                         lambda: ConstantPoolEntry(CONSTANT_String, ref1=utf8_index))

    def numeric(self, tag: int, raw: bytes) -> int:
        wide = tag in (CONSTANT_Long, CONSTANT_Double)
        return self._add((tag, raw), lambda: ConstantPoolEntry(tag, raw=raw), wide=wide)

    def name_and_type(self, name: str, descriptor: str) -> int:
        name_index = self.utf8(name)
        desc_index = self.utf8(descriptor)
        return self._add((CONSTANT_NameAndType, name, descriptor),
                         lambda: ConstantPoolEntry(CONSTANT_NameAndType, ref1=name_index, ref2=desc_index))

    def member_ref(self, tag: int, owner: str, name: str, descriptor: str) -> int:
        owner_index = self.class_(owner)
        nat_index = self.name_and_type(name, descriptor)
        return self._add((tag, owner, name, descriptor),
                         lambda: ConstantPoolEntry(tag, ref1=owner_index, ref2=nat_index))

    def method_type(self, descriptor: str) -> int:
        desc_index = self.utf8(descriptor)
        return self._add((CONSTANT_MethodType, descriptor),
                         lambda: ConstantPoolEntry(CONSTANT_MethodType, ref1=desc_index))

    def method_handle(self, kind: int, ref_index: int) -> int:
        return self._add((CONSTANT_MethodHandle, kind, ref_index),
                         lambda: ConstantPoolEntry(CONSTANT_MethodHandle, kind=kind, ref1=ref_index))

    def dynamic(self, tag: int, bootstrap_index: int, name: str, descriptor: str) -> int:
        nat_index = self.name_and_type(name, descriptor)
        return self._add((tag, bootstrap_index, name, descriptor),
                         lambda: ConstantPoolEntry(tag, ref1=bootstrap_index, ref2=nat_index))

    def package_like(self, tag: int, name: str) -> int:
        name_index = self.utf8(name)
        return self._add((tag, name), lambda: ConstantPoolEntry(tag, ref1=name_index))


class _Relocator:
    def __init__(self, cf: ClassFile, rules: list[RelocationRule]):
        self.cf = cf
        self.old = cf.pool
        self.rename = _rename_fn(rules)
        self.out = _PoolBuilder()
        self._desc_cache: dict[str, str] = {}
        self._sig_cache: dict[str, str] = {}
        bsm_attr = cf.attribute("BootstrapMethods")
        self.old_bootstrap = (attrs.parse_bootstrap_methods(bsm_attr.payload)
                              if bsm_attr is not None else ())
        self.new_bootstrap: list[attrs.BootstrapMethod] = []
        self._bootstrap_memo: dict[tuple, int] = {}
        self._bootstrap_in_progress: set[int] = set()

    # -- name rewriting ----------------------------------------------------

    def rename_class_entry(self, name: str) -> str:
        if name.startswith("["):
            return self.rewrite_descriptor(name)
        return self.rename(name)

    def rewrite_descriptor(self, text: str) -> str:
        cached = self._desc_cache.get(text)
        if cached is None:
            cached = map_descriptor_names(parse_descriptor(text), self.rename).unparse()
            self._desc_cache[text] = cached
        return cached

    def rewrite_signature(self, text: str) -> str:
        cached = self._sig_cache.get(text)
        if cached is None:
            cached = map_signature_names(parse_signature(text), self.rename).unparse()
            self._sig_cache[text] = cached
        return cached

    # -- constant remapping ------------------------------------------------

    def remap(self, old_index: int) -> int:
        e = self.old.entry(old_index)
        tag = e.tag
        out = self.out
        if tag == CONSTANT_Utf8:
            return out.utf8(e.text)
        if tag in (CONSTANT_Integer, CONSTANT_Float, CONSTANT_Long, CONSTANT_Double):
            return out.numeric(tag, e.raw)
        if tag == CONSTANT_Class:
            return out.class_(self.rename_class_entry(self.old.utf8(e.ref1)))
        if tag == CONSTANT_String:
            # String literals are not rewritten; see the canonical encoder.
            return out.string(self.old.utf8(e.ref1))
        if tag in (CONSTANT_Fieldref, CONSTANT_Methodref, CONSTANT_InterfaceMethodref):
            owner = self.rename_class_entry(self.old.class_name(e.ref1))
            name, descriptor = self._name_and_type(e.ref2)
            return out.member_ref(tag, owner, name, descriptor)
        if tag == CONSTANT_NameAndType:
            name, descriptor = self._name_and_type(old_index)
            return out.name_and_type(name, descriptor)
        if tag == CONSTANT_MethodType:
            return out.method_type(self.rewrite_descriptor(self.old.utf8(e.ref1)))
        if tag == CONSTANT_MethodHandle:
            return out.method_handle(e.kind, self.remap(e.ref1))
        if tag in (CONSTANT_Dynamic, CONSTANT_InvokeDynamic):
            name, descriptor = self._name_and_type(e.ref2)
            return out.dynamic(tag, self._intern_bootstrap(e.ref1), name, descriptor)
        if tag in (CONSTANT_Module, CONSTANT_Package):
            return out.package_like(tag, self.old.utf8(e.ref1))
        raise UnsupportedConstruct(f"cannot relocate constant tag {tag}")  # pragma: no cover

    def _name_and_type(self, index: int) -> tuple[str, str]:
        nat = self.old.entry(index, CONSTANT_NameAndType)
        return self.old.utf8(nat.ref1), self.rewrite_descriptor(self.old.utf8(nat.ref2))

    def _intern_bootstrap(self, old_index: int) -> int:
        if old_index >= len(self.old_bootstrap):
            raise MalformedClassFile(f"bootstrap method index {old_index} out of range")
        if old_index in self._bootstrap_in_progress:
            raise UnsupportedConstruct("cyclic bootstrap method reference")
        self._bootstrap_in_progress.add(old_index)
        try:
            bsm = self.old_bootstrap[old_index]
            handle = self.remap(bsm.handle_index)
            args = tuple(self.remap(a) for a in bsm.args)
        finally:
            self._bootstrap_in_progress.discard(old_index)
        key = (handle, args)
        index = self._bootstrap_memo.get(key)
        if index is None:
            index = len(self.new_bootstrap)
            self.new_bootstrap.append(attrs.BootstrapMethod(handle, args))
            self._bootstrap_memo[key] = index
        return index

    # -- code --------------------------------------------------------------

    def pre_intern_ldc(self, member: MemberInfo) -> None:
        """Intern one-byte-indexed constants first so they stay addressable."""
        for attr in member.attributes:
            if self.old.utf8(attr.name_index) != "Code":
                continue
            code = attrs.parse_code(attr.payload).code
            for start, op, _ in opcodes.iter_instructions(code):
                if op == opcodes.LDC:
                    self.remap(code[start + 1])

    def relocate_code(self, payload: bytes) -> bytes:
        old_code = attrs.parse_code(payload)
        code = bytearray(old_code.code)
        for start, op, _ in opcodes.iter_instructions(old_code.code):
            if op not in opcodes.CP_OPS:
                continue
            width, _ = opcodes.CP_OPS[op]
            if width == 1:
                new_index = self.remap(old_code.code[start + 1])
                if new_index > 0xFF:
                    raise UnsupportedConstruct(
                        "ldc operand no longer one-byte addressable after pool rebuild")
                code[start + 1] = new_index
            else:
                old_index = struct.unpack_from(">H", old_code.code, start + 1)[0]
                struct.pack_into(">H", code, start + 1, self.remap(old_index))
        handlers = tuple(
            attrs.ExceptionHandler(
                h.start_pc, h.end_pc, h.handler_pc,
                0 if h.catch_type == 0 else self.out.class_(
                    self.rename_class_entry(self.old.class_name(h.catch_type))))
            for h in old_code.handlers)
        nested = self.relocate_attributes(old_code.attributes)
        return attrs.write_code(attrs.CodeAttr(
            old_code.max_stack, old_code.max_locals, bytes(code), handlers, nested))

    # -- attributes ----------------------------------------------------------

    def relocate_attributes(self, attributes: tuple[AttributeInfo, ...],
                            skip: frozenset[str] = frozenset()) -> tuple[AttributeInfo, ...]:
        out = []
        for attr in attributes:
            name = self.old.utf8(attr.name_index)
            if name in skip:
                continue
            payload = self._relocate_attribute(name, attr.payload)
            if payload is None:
                continue
            out.append(AttributeInfo(self.out.utf8(name), payload))
        return tuple(out)

    def _relocate_attribute(self, name: str, payload: bytes) -> bytes | None:
        if name in _DROPPED_ATTRIBUTES or name.startswith("Module"):
            return None
        if name == "Code":
            return self.relocate_code(payload)
        if name == "Exceptions" or name in ("NestMembers", "PermittedSubclasses"):
            indexes = attrs.parse_class_index_list(payload)
            return attrs.write_class_index_list(tuple(
                self.out.class_(self.rename_class_entry(self.old.class_name(i)))
                for i in indexes))
        if name == "ConstantValue":
            return struct.pack(">H", self.remap(struct.unpack(">H", payload)[0]))
        if name == "Signature":
            old_index = struct.unpack(">H", payload)[0]
            return struct.pack(">H", self.out.utf8(self.rewrite_signature(self.old.utf8(old_index))))
        if name == "NestHost":
            old_index = struct.unpack(">H", payload)[0]
            return struct.pack(">H", self.out.class_(
                self.rename_class_entry(self.old.class_name(old_index))))
        if name == "InnerClasses":
            entries = attrs.parse_inner_classes(payload)
            return attrs.write_inner_classes(tuple(
                attrs.InnerClassEntry(
                    self.out.class_(self.rename_class_entry(self.old.class_name(e.inner_index))),
                    0 if e.outer_index == 0 else self.out.class_(
                        self.rename_class_entry(self.old.class_name(e.outer_index))),
                    0 if e.name_index == 0 else self.out.utf8(self.old.utf8(e.name_index)),
                    e.access_flags)
                for e in entries))
        if name == "EnclosingMethod":
            class_index, method_index = struct.unpack(">HH", payload)
            new_class = self.out.class_(self.rename_class_entry(self.old.class_name(class_index)))
            new_method = 0
            if method_index != 0:
                method_name, descriptor = self._name_and_type(method_index)
                new_method = self.out.name_and_type(method_name, descriptor)
            return struct.pack(">HH", new_class, new_method)
        if name == "BootstrapMethods":
            # Rebuilt from live Dynamic/InvokeDynamic references; emitted
            # in finish() after all code has been walked.
            return None
        if name in ("RuntimeVisibleAnnotations", "RuntimeInvisibleAnnotations"):
            return attrs.write_annotations(tuple(
                self._relocate_annotation(a) for a in attrs.parse_annotations(payload)))
        if name in ("RuntimeVisibleParameterAnnotations", "RuntimeInvisibleParameterAnnotations"):
            return attrs.write_parameter_annotations(tuple(
                tuple(self._relocate_annotation(a) for a in annotations)
                for annotations in attrs.parse_parameter_annotations(payload)))
        if name == "AnnotationDefault":
            return attrs.write_annotation_default(
                self._relocate_element_value(attrs.parse_annotation_default(payload)))
        if name == "SourceFile":
            old_index = struct.unpack(">H", payload)[0]
            return struct.pack(">H", self.out.utf8(self.old.utf8(old_index)))
        if name in ("Deprecated", "Synthetic"):
            return payload  # zero-length
        if name == "LineNumberTable":
            return payload  # no pool references
        if name in ("LocalVariableTable", "LocalVariableTypeTable"):
            return self._relocate_local_variables(payload, name == "LocalVariableTypeTable")
        if name == "MethodParameters":
            r = Reader(payload)
            count = r.u1()
            out = bytearray(struct.pack(">B", count))
            for _ in range(count):
                name_index = r.u2()
                flags = r.u2()
                new_name = 0 if name_index == 0 else self.out.utf8(self.old.utf8(name_index))
                out += struct.pack(">HH", new_name, flags)
            return bytes(out)
        # Unknown attribute: its payload may hold pool indexes that would
        # dangle after the rebuild, so it is dropped (shading tools do the
        # same for attributes they have no handler for).
        return None

    def _relocate_local_variables(self, payload: bytes, is_type_table: bool) -> bytes:
        r = Reader(payload)
        count = r.u2()
        out = bytearray(struct.pack(">H", count))
        for _ in range(count):
            start_pc, length, name_index, desc_index, slot = (r.u2() for _ in range(5))
            text = self.old.utf8(desc_index)
            rewritten = self.rewrite_signature(text) if is_type_table else self.rewrite_descriptor(text)
            out += struct.pack(">HHHHH", start_pc, length,
                               self.out.utf8(self.old.utf8(name_index)),
                               self.out.utf8(rewritten), slot)
        return bytes(out)

    def _relocate_annotation(self, a: attrs.Annotation) -> attrs.Annotation:
        type_index = self.out.utf8(self.rewrite_descriptor(self.old.utf8(a.type_index)))
        pairs = tuple((self.out.utf8(self.old.utf8(name_index)), self._relocate_element_value(v))
                      for name_index, v in a.pairs)
        return attrs.Annotation(type_index, pairs)

    def _relocate_element_value(self, v: attrs.ElementValue) -> attrs.ElementValue:
        if v.tag in "BCDFIJSZ":
            return attrs.ElementValue(v.tag, const_index=self.remap(v.const_index))
        if v.tag == "s":
            return attrs.ElementValue(v.tag, const_index=self.out.utf8(self.old.utf8(v.const_index)))
        if v.tag == "e":
            return attrs.ElementValue(
                v.tag,
                type_name_index=self.out.utf8(self.rewrite_descriptor(self.old.utf8(v.type_name_index))),
                const_name_index=self.out.utf8(self.old.utf8(v.const_name_index)))
        if v.tag == "c":
            text = self.old.utf8(v.class_index)
            rewritten = text if text == "V" else self.rewrite_descriptor(text)
            return attrs.ElementValue(v.tag, class_index=self.out.utf8(rewritten))
        if v.tag == "@":
            assert v.annotation is not None
            return attrs.ElementValue(v.tag, annotation=self._relocate_annotation(v.annotation))
        return attrs.ElementValue(v.tag, values=tuple(
            self._relocate_element_value(nested) for nested in v.values))

    # -- members and assembly ------------------------------------------------

    def relocate_member(self, m: MemberInfo) -> MemberInfo:
        name_index = self.out.utf8(self.old.utf8(m.name_index))
        desc_index = self.out.utf8(self.rewrite_descriptor(self.old.utf8(m.descriptor_index)))
        return MemberInfo(m.access_flags, name_index, desc_index,
                          self.relocate_attributes(m.attributes))

    def finish(self) -> ClassFile:
        cf = self.cf
        # One-byte ldc operands claim the low pool slots first.
        for member in cf.methods:
            self.pre_intern_ldc(member)
        this_index = self.out.class_(self.rename(cf.this_name()))
        super_name = cf.super_name()
        super_index = 0 if super_name is None else self.out.class_(self.rename(super_name))
        interfaces = tuple(self.out.class_(self.rename_class_entry(self.old.class_name(i)))
                           for i in cf.interfaces)
        fields = tuple(self.relocate_member(f) for f in cf.fields)
        methods = tuple(self.relocate_member(m) for m in cf.methods)
        class_attrs = list(self.relocate_attributes(cf.attributes))
        if self.new_bootstrap:
            class_attrs.append(AttributeInfo(
                self.out.utf8("BootstrapMethods"),
                attrs.write_bootstrap_methods(tuple(self.new_bootstrap))))
        rebuilt = ClassFile(
            cf.minor_version, cf.major_version,
            ConstantPool(self.out.entries), cf.access_flags,
            this_index, super_index, interfaces, fields, methods,
            tuple(class_attrs))
        # Round through the serializer so raw_bytes and validation are
        # consistent with a fresh parse.
        return parse_class(serialize_class(rebuilt))


def relocate(cf: ClassFile, rules: list[RelocationRule]) -> ClassFile:
    """Rewrite every internal name matching a rule's package prefix.

    Returns a freshly assembled class whose canonical encoding equals the
    input's; raw bytes differ whenever a name actually moved (and usually
    even when none did, because the pool is rebuilt).
    """
    return _Relocator(cf, list(rules)).finish()
