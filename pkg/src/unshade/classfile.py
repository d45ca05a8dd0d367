"""Lossless parser for the Java class-file binary format.

The parse keeps every byte of information: constant-pool entries retain
their raw payloads, attributes stay opaque byte blobs keyed by name, and
``serialize_class(parse_class(data)) == data`` holds for every well-formed
input. Structured views of individual attributes live in
:mod:`unshade.attrs`; this module only knows the container format.

Format reference: the JVM class-file format (magic 0xCAFEBABE, big-endian
integers, 1-indexed constant pool with two-slot long/double entries).
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

from .errors import MalformedClassFile

logger = logging.getLogger(__name__)

MAGIC = 0xCAFEBABE

# Newest major version published at the time of writing (Java 25).
# Higher majors are accepted with a warning; scanning must not fail on
# future bytecode.
NEWEST_KNOWN_MAJOR = 69

# Constant-pool tags.
CONSTANT_Utf8 = 1
CONSTANT_Integer = 3
CONSTANT_Float = 4
CONSTANT_Long = 5
CONSTANT_Double = 6
CONSTANT_Class = 7
CONSTANT_String = 8
CONSTANT_Fieldref = 9
CONSTANT_Methodref = 10
CONSTANT_InterfaceMethodref = 11
CONSTANT_NameAndType = 12
CONSTANT_MethodHandle = 15
CONSTANT_MethodType = 16
CONSTANT_Dynamic = 17
CONSTANT_InvokeDynamic = 18
CONSTANT_Module = 19
CONSTANT_Package = 20

TAG_NAMES = {
    1: "Utf8", 3: "Integer", 4: "Float", 5: "Long", 6: "Double",
    7: "Class", 8: "String", 9: "Fieldref", 10: "Methodref",
    11: "InterfaceMethodref", 12: "NameAndType", 15: "MethodHandle",
    16: "MethodType", 17: "Dynamic", 18: "InvokeDynamic",
    19: "Module", 20: "Package",
}

# Tags whose single index operand must resolve to a Utf8 entry.
_UTF8_REF_TAGS = (CONSTANT_Class, CONSTANT_String, CONSTANT_MethodType,
                  CONSTANT_Module, CONSTANT_Package)


def decode_mutf8(data: bytes) -> str:
    """Decode JVM modified UTF-8 (CESU-8 with two-byte NUL) to str.

    Surrogate pairs combine into astral code points; lone surrogates are
    kept as-is so that encode(decode(b)) == b for all valid inputs.
    """
    out: list[str] = []
    i, n = 0, len(data)
    units: list[int] = []
    while i < n:
        b0 = data[i]
        if b0 == 0 or 0xF0 <= b0:
            raise MalformedClassFile(f"invalid modified-UTF-8 byte 0x{b0:02x}")
        if b0 < 0x80:
            units.append(b0)
            i += 1
        elif b0 < 0xC0:
            raise MalformedClassFile("modified-UTF-8 continuation at start of sequence")
        elif b0 < 0xE0:
            if i + 1 >= n or data[i + 1] & 0xC0 != 0x80:
                raise MalformedClassFile("truncated 2-byte modified-UTF-8 sequence")
            cp = ((b0 & 0x1F) << 6) | (data[i + 1] & 0x3F)
            # 0xC0 0x80 (NUL) is the only legal overlong form.
            if cp < 0x80 and cp != 0:
                raise MalformedClassFile("overlong modified-UTF-8 sequence")
            units.append(cp)
            i += 2
        else:
            if i + 2 >= n or data[i + 1] & 0xC0 != 0x80 or data[i + 2] & 0xC0 != 0x80:
                raise MalformedClassFile("truncated 3-byte modified-UTF-8 sequence")
            cp = ((b0 & 0x0F) << 12) | ((data[i + 1] & 0x3F) << 6) | (data[i + 2] & 0x3F)
            if cp < 0x800:
                raise MalformedClassFile("overlong modified-UTF-8 sequence")
            units.append(cp)
            i += 3
    # Pair up surrogates.
    j = 0
    while j < len(units):
        u = units[j]
        if 0xD800 <= u <= 0xDBFF and j + 1 < len(units) and 0xDC00 <= units[j + 1] <= 0xDFFF:
            out.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[j + 1] - 0xDC00)))
            j += 2
        else:
            out.append(chr(u))
            j += 1
    return "".join(out)


def encode_mutf8(text: str) -> bytes:
    """Encode str to JVM modified UTF-8 (inverse of :func:`decode_mutf8`)."""
    out = bytearray()
    for ch in text:
        cp = ord(ch)
        if cp == 0:
            out += b"\xc0\x80"
        elif cp < 0x80:
            out.append(cp)
        elif cp < 0x800:
            out.append(0xC0 | (cp >> 6))
            out.append(0x80 | (cp & 0x3F))
        elif cp < 0x10000:
            out.append(0xE0 | (cp >> 12))
            out.append(0x80 | ((cp >> 6) & 0x3F))
            out.append(0x80 | (cp & 0x3F))
        else:
            cp -= 0x10000
            for unit in (0xD800 + (cp >> 10), 0xDC00 + (cp & 0x3FF)):
                out.append(0xE0 | (unit >> 12))
                out.append(0x80 | ((unit >> 6) & 0x3F))
                out.append(0x80 | (unit & 0x3F))
    return bytes(out)


class Reader:
    """Bounds-checked big-endian cursor over immutable bytes."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise MalformedClassFile(
                f"truncated: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u1(self) -> int:
        return self.take(1)[0]

    def u2(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u4(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def remaining(self) -> int:
        return len(self.data) - self.pos


@dataclass(frozen=True)
class ConstantPoolEntry:
    """One cp_info union value; raw payloads retained for losslessness.

    Field use per tag: Utf8 -> raw/text; Integer/Float (4 bytes) and
    Long/Double (8 bytes) -> raw holds the big-endian payload;
    Class/String/MethodType/Module/Package -> ref1 is the Utf8 index;
    Fieldref/Methodref/InterfaceMethodref -> ref1 class, ref2 name-and-type;
    NameAndType -> ref1 name, ref2 descriptor; MethodHandle -> kind + ref1;
    Dynamic/InvokeDynamic -> ref1 bootstrap-method index, ref2 name-and-type.
    """

    tag: int
    raw: bytes = b""
    text: str = ""
    ref1: int = 0
    ref2: int = 0
    kind: int = 0


@dataclass(frozen=True)
class AttributeInfo:
    """Named attribute with its payload kept as an opaque blob."""

    name_index: int
    payload: bytes


@dataclass(frozen=True)
class MemberInfo:
    """field_info / method_info (identical raw layout)."""

    access_flags: int
    name_index: int
    descriptor_index: int
    attributes: tuple[AttributeInfo, ...]


class ConstantPool:
    """1-indexed constant pool; slot after a long/double entry is None."""

    __slots__ = ("entries",)

    def __init__(self, entries: list[ConstantPoolEntry | None]):
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, index: int, tag: int | None = None) -> ConstantPoolEntry:
        if not 1 <= index < len(self.entries):
            raise MalformedClassFile(f"constant-pool index {index} out of range")
        e = self.entries[index]
        if e is None:
            raise MalformedClassFile(f"constant-pool index {index} hits a long/double tail slot")
        if tag is not None and e.tag != tag:
            raise MalformedClassFile(
                f"constant-pool index {index}: expected {TAG_NAMES.get(tag, tag)}, "
                f"found {TAG_NAMES.get(e.tag, e.tag)}")
        return e

    def utf8(self, index: int) -> str:
        return self.entry(index, CONSTANT_Utf8).text

    def class_name(self, index: int) -> str:
        """Internal name referenced by a Class entry ('/' separators)."""
        return self.utf8(self.entry(index, CONSTANT_Class).ref1)


@dataclass(frozen=True)
class ClassFile:
    """Structured, lossless view of one class file.

    Immutable after construction; instances are safe to share across
    threads. ``raw_bytes`` is the exact input the structure was parsed
    from and equals ``serialize_class(self)``.
    """

    minor_version: int
    major_version: int
    pool: ConstantPool
    access_flags: int
    this_class: int
    super_class: int
    interfaces: tuple[int, ...]
    fields: tuple[MemberInfo, ...]
    methods: tuple[MemberInfo, ...]
    attributes: tuple[AttributeInfo, ...]
    raw_bytes: bytes = field(repr=False, default=b"")

    def this_name(self) -> str:
        return self.pool.class_name(self.this_class)

    def super_name(self) -> str | None:
        if self.super_class == 0:
            return None
        return self.pool.class_name(self.super_class)

    def attribute(self, name: str) -> AttributeInfo | None:
        for attr in self.attributes:
            if self.pool.utf8(attr.name_index) == name:
                return attr
        return None


def _parse_pool(r: Reader) -> ConstantPool:
    count = r.u2()
    if count < 1:
        raise MalformedClassFile("constant-pool count must be at least 1")
    entries: list[ConstantPoolEntry | None] = [None]
    while len(entries) < count:
        tag = r.u1()
        if tag == CONSTANT_Utf8:
            raw = r.take(r.u2())
            entries.append(ConstantPoolEntry(tag, raw=raw, text=decode_mutf8(raw)))
        elif tag in (CONSTANT_Integer, CONSTANT_Float):
            entries.append(ConstantPoolEntry(tag, raw=r.take(4)))
        elif tag in (CONSTANT_Long, CONSTANT_Double):
            entries.append(ConstantPoolEntry(tag, raw=r.take(8)))
            entries.append(None)  # tail slot
        elif tag in _UTF8_REF_TAGS:
            entries.append(ConstantPoolEntry(tag, ref1=r.u2()))
        elif tag in (CONSTANT_Fieldref, CONSTANT_Methodref,
                     CONSTANT_InterfaceMethodref, CONSTANT_NameAndType,
                     CONSTANT_Dynamic, CONSTANT_InvokeDynamic):
            entries.append(ConstantPoolEntry(tag, ref1=r.u2(), ref2=r.u2()))
        elif tag == CONSTANT_MethodHandle:
            entries.append(ConstantPoolEntry(tag, kind=r.u1(), ref1=r.u2()))
        else:
            raise MalformedClassFile(f"unknown constant-pool tag {tag}")
    if len(entries) != count:
        # A long/double in the final slot pushed us past the declared count.
        raise MalformedClassFile("constant-pool overruns its declared count")
    return ConstantPool(entries)


def _validate_pool(pool: ConstantPool) -> None:
    for index in range(1, len(pool.entries)):
        e = pool.entries[index]
        if e is None:
            continue
        if e.tag in _UTF8_REF_TAGS:
            pool.entry(e.ref1, CONSTANT_Utf8)
        elif e.tag in (CONSTANT_Fieldref, CONSTANT_Methodref, CONSTANT_InterfaceMethodref):
            pool.entry(e.ref1, CONSTANT_Class)
            pool.entry(e.ref2, CONSTANT_NameAndType)
        elif e.tag == CONSTANT_NameAndType:
            pool.entry(e.ref1, CONSTANT_Utf8)
            pool.entry(e.ref2, CONSTANT_Utf8)
        elif e.tag == CONSTANT_MethodHandle:
            if not 1 <= e.kind <= 9:
                raise MalformedClassFile(f"method-handle kind {e.kind} out of range")
            ref = pool.entry(e.ref1)
            if e.kind <= 4:
                allowed = (CONSTANT_Fieldref,)
            else:
                allowed = (CONSTANT_Methodref, CONSTANT_InterfaceMethodref)
            if ref.tag not in allowed:
                raise MalformedClassFile(
                    f"method-handle kind {e.kind} references {TAG_NAMES.get(ref.tag, ref.tag)}")
        elif e.tag in (CONSTANT_Dynamic, CONSTANT_InvokeDynamic):
            # ref1 indexes the BootstrapMethods attribute, which stays opaque here.
            pool.entry(e.ref2, CONSTANT_NameAndType)


def _parse_attributes(r: Reader, pool: ConstantPool) -> tuple[AttributeInfo, ...]:
    count = r.u2()
    attrs = []
    for _ in range(count):
        name_index = r.u2()
        pool.entry(name_index, CONSTANT_Utf8)
        attrs.append(AttributeInfo(name_index, r.take(r.u4())))
    return tuple(attrs)


def _parse_members(r: Reader, pool: ConstantPool) -> tuple[MemberInfo, ...]:
    count = r.u2()
    members = []
    for _ in range(count):
        access_flags = r.u2()
        name_index = r.u2()
        descriptor_index = r.u2()
        pool.entry(name_index, CONSTANT_Utf8)
        pool.entry(descriptor_index, CONSTANT_Utf8)
        members.append(MemberInfo(access_flags, name_index, descriptor_index,
                                  _parse_attributes(r, pool)))
    return tuple(members)


def parse_class(data: bytes) -> ClassFile:
    """Parse raw class-file bytes into a lossless :class:`ClassFile`.

    Raises :class:`MalformedClassFile` on any format violation; callers
    scanning archives treat that as skip-with-warning, never as abort.
    """
    r = Reader(data)
    if r.u4() != MAGIC:
        raise MalformedClassFile("bad magic, not a class file")
    minor = r.u2()
    major = r.u2()
    if major > NEWEST_KNOWN_MAJOR:
        logger.warning("class-file major version %d is newer than this parser; continuing", major)
    pool = _parse_pool(r)
    _validate_pool(pool)
    access_flags = r.u2()
    this_class = r.u2()
    super_class = r.u2()
    pool.entry(this_class, CONSTANT_Class)
    if super_class != 0:
        pool.entry(super_class, CONSTANT_Class)
    interfaces = tuple(r.u2() for _ in range(r.u2()))
    for iface in interfaces:
        pool.entry(iface, CONSTANT_Class)
    fields = _parse_members(r, pool)
    methods = _parse_members(r, pool)
    attributes = _parse_attributes(r, pool)
    if r.remaining():
        raise MalformedClassFile(f"{r.remaining()} trailing bytes after class structure")
    return ClassFile(minor, major, pool, access_flags, this_class, super_class,
                     interfaces, fields, methods, attributes, raw_bytes=data)


def serialize_pool_entry(e: ConstantPoolEntry) -> bytes:
    if e.tag == CONSTANT_Utf8:
        return struct.pack(">BH", e.tag, len(e.raw)) + e.raw
    if e.tag in (CONSTANT_Integer, CONSTANT_Float, CONSTANT_Long, CONSTANT_Double):
        return bytes([e.tag]) + e.raw
    if e.tag in _UTF8_REF_TAGS:
        return struct.pack(">BH", e.tag, e.ref1)
    if e.tag == CONSTANT_MethodHandle:
        return struct.pack(">BBH", e.tag, e.kind, e.ref1)
    return struct.pack(">BHH", e.tag, e.ref1, e.ref2)


def _serialize_attributes(attrs: tuple[AttributeInfo, ...]) -> bytes:
    out = bytearray(struct.pack(">H", len(attrs)))
    for a in attrs:
        out += struct.pack(">HI", a.name_index, len(a.payload))
        out += a.payload
    return bytes(out)


def serialize_class(cf: ClassFile) -> bytes:
    """Re-serialize the parsed structure; equals the original input for an
    unmodified parse."""
    out = bytearray(struct.pack(">IHH", MAGIC, cf.minor_version, cf.major_version))
    out += struct.pack(">H", len(cf.pool.entries))
    for e in cf.pool.entries[1:]:
        if e is not None:
            out += serialize_pool_entry(e)
    out += struct.pack(">HHH", cf.access_flags, cf.this_class, cf.super_class)
    out += struct.pack(">H", len(cf.interfaces))
    for iface in cf.interfaces:
        out += struct.pack(">H", iface)
    for members in (cf.fields, cf.methods):
        out += struct.pack(">H", len(members))
        for m in members:
            out += struct.pack(">HHH", m.access_flags, m.name_index, m.descriptor_index)
            out += _serialize_attributes(m.attributes)
    out += _serialize_attributes(cf.attributes)
    return bytes(out)
