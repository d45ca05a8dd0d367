"""Structured views of the attribute payloads the toolchain interprets.

:mod:`unshade.classfile` keeps attributes opaque for losslessness; this
module decodes the handful whose contents feed canonical encoding or
package relocation (Code, Exceptions, ConstantValue, Signature,
InnerClasses, EnclosingMethod, the annotation family, BootstrapMethods,
NestHost/NestMembers/PermittedSubclasses). Each structure serializes back
to the exact payload it was parsed from.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .classfile import AttributeInfo, Reader
from .errors import MalformedClassFile


@dataclass(frozen=True)
class ExceptionHandler:
    start_pc: int
    end_pc: int
    handler_pc: int
    catch_type: int  # Class index, 0 = any


@dataclass(frozen=True)
class CodeAttr:
    max_stack: int
    max_locals: int
    code: bytes
    handlers: tuple[ExceptionHandler, ...]
    attributes: tuple[AttributeInfo, ...]


def parse_code(payload: bytes) -> CodeAttr:
    r = Reader(payload)
    max_stack = r.u2()
    max_locals = r.u2()
    code = r.take(r.u4())
    handlers = tuple(ExceptionHandler(r.u2(), r.u2(), r.u2(), r.u2())
                     for _ in range(r.u2()))
    attrs = []
    for _ in range(r.u2()):
        name_index = r.u2()
        attrs.append(AttributeInfo(name_index, r.take(r.u4())))
    if r.remaining():
        raise MalformedClassFile("trailing bytes in Code attribute")
    return CodeAttr(max_stack, max_locals, code, handlers, tuple(attrs))


def write_code(c: CodeAttr) -> bytes:
    out = bytearray(struct.pack(">HHI", c.max_stack, c.max_locals, len(c.code)))
    out += c.code
    out += struct.pack(">H", len(c.handlers))
    for h in c.handlers:
        out += struct.pack(">HHHH", h.start_pc, h.end_pc, h.handler_pc, h.catch_type)
    out += struct.pack(">H", len(c.attributes))
    for a in c.attributes:
        out += struct.pack(">HI", a.name_index, len(a.payload))
        out += a.payload
    return bytes(out)


@dataclass(frozen=True)
class BootstrapMethod:
    handle_index: int  # MethodHandle entry
    args: tuple[int, ...]  # loadable constant indexes


def parse_bootstrap_methods(payload: bytes) -> tuple[BootstrapMethod, ...]:
    r = Reader(payload)
    methods = []
    for _ in range(r.u2()):
        handle = r.u2()
        methods.append(BootstrapMethod(handle, tuple(r.u2() for _ in range(r.u2()))))
    if r.remaining():
        raise MalformedClassFile("trailing bytes in BootstrapMethods attribute")
    return tuple(methods)


def write_bootstrap_methods(methods: tuple[BootstrapMethod, ...]) -> bytes:
    out = bytearray(struct.pack(">H", len(methods)))
    for m in methods:
        out += struct.pack(">HH", m.handle_index, len(m.args))
        out += struct.pack(f">{len(m.args)}H", *m.args)
    return bytes(out)


@dataclass(frozen=True)
class InnerClassEntry:
    inner_index: int   # Class
    outer_index: int   # Class, 0 when absent
    name_index: int    # Utf8 simple name, 0 for anonymous
    access_flags: int


def parse_inner_classes(payload: bytes) -> tuple[InnerClassEntry, ...]:
    r = Reader(payload)
    entries = tuple(InnerClassEntry(r.u2(), r.u2(), r.u2(), r.u2())
                    for _ in range(r.u2()))
    if r.remaining():
        raise MalformedClassFile("trailing bytes in InnerClasses attribute")
    return entries


def write_inner_classes(entries: tuple[InnerClassEntry, ...]) -> bytes:
    out = bytearray(struct.pack(">H", len(entries)))
    for e in entries:
        out += struct.pack(">HHHH", e.inner_index, e.outer_index, e.name_index, e.access_flags)
    return bytes(out)


def parse_class_index_list(payload: bytes) -> tuple[int, ...]:
    """Exceptions / NestMembers / PermittedSubclasses: u2 count + Class indexes."""
    r = Reader(payload)
    indexes = tuple(r.u2() for _ in range(r.u2()))
    if r.remaining():
        raise MalformedClassFile("trailing bytes in class-index-list attribute")
    return indexes


def write_class_index_list(indexes: tuple[int, ...]) -> bytes:
    return struct.pack(f">H{len(indexes)}H", len(indexes), *indexes)


# ---------------------------------------------------------------------------
# Annotation structures (Runtime[In]Visible[Parameter]Annotations,
# AnnotationDefault)

@dataclass(frozen=True)
class ElementValue:
    tag: str  # one of B C D F I J S Z s e c @ [
    const_index: int = 0            # B C D F I J S Z s
    type_name_index: int = 0        # e (enum: Utf8 field descriptor)
    const_name_index: int = 0       # e (enum: Utf8 constant name)
    class_index: int = 0            # c (Utf8 return descriptor)
    annotation: "Annotation | None" = None  # @
    values: tuple["ElementValue", ...] = ()  # [


@dataclass(frozen=True)
class Annotation:
    type_index: int  # Utf8 field descriptor
    pairs: tuple[tuple[int, ElementValue], ...]  # (name Utf8 index, value)


_CONST_TAGS = frozenset("BCDFIJSZs")


def _parse_element_value(r: Reader) -> ElementValue:
    tag = chr(r.u1())
    if tag in _CONST_TAGS:
        return ElementValue(tag, const_index=r.u2())
    if tag == "e":
        return ElementValue(tag, type_name_index=r.u2(), const_name_index=r.u2())
    if tag == "c":
        return ElementValue(tag, class_index=r.u2())
    if tag == "@":
        return ElementValue(tag, annotation=_parse_annotation(r))
    if tag == "[":
        return ElementValue(tag, values=tuple(_parse_element_value(r) for _ in range(r.u2())))
    raise MalformedClassFile(f"unknown element-value tag {tag!r}")


def _parse_annotation(r: Reader) -> Annotation:
    type_index = r.u2()
    pairs = tuple((r.u2(), _parse_element_value(r)) for _ in range(r.u2()))
    return Annotation(type_index, pairs)


def parse_annotations(payload: bytes) -> tuple[Annotation, ...]:
    r = Reader(payload)
    annotations = tuple(_parse_annotation(r) for _ in range(r.u2()))
    if r.remaining():
        raise MalformedClassFile("trailing bytes in annotations attribute")
    return annotations


def parse_parameter_annotations(payload: bytes) -> tuple[tuple[Annotation, ...], ...]:
    r = Reader(payload)
    params = tuple(tuple(_parse_annotation(r) for _ in range(r.u2()))
                   for _ in range(r.u1()))
    if r.remaining():
        raise MalformedClassFile("trailing bytes in parameter-annotations attribute")
    return params


def parse_annotation_default(payload: bytes) -> ElementValue:
    r = Reader(payload)
    value = _parse_element_value(r)
    if r.remaining():
        raise MalformedClassFile("trailing bytes in AnnotationDefault attribute")
    return value


def _write_element_value(v: ElementValue, out: bytearray) -> None:
    out.append(ord(v.tag))
    if v.tag in _CONST_TAGS:
        out += struct.pack(">H", v.const_index)
    elif v.tag == "e":
        out += struct.pack(">HH", v.type_name_index, v.const_name_index)
    elif v.tag == "c":
        out += struct.pack(">H", v.class_index)
    elif v.tag == "@":
        assert v.annotation is not None
        _write_annotation(v.annotation, out)
    elif v.tag == "[":
        out += struct.pack(">H", len(v.values))
        for nested in v.values:
            _write_element_value(nested, out)
    else:  # pragma: no cover - constructors only build known tags
        raise MalformedClassFile(f"unknown element-value tag {v.tag!r}")


def _write_annotation(a: Annotation, out: bytearray) -> None:
    out += struct.pack(">HH", a.type_index, len(a.pairs))
    for name_index, value in a.pairs:
        out += struct.pack(">H", name_index)
        _write_element_value(value, out)


def write_annotations(annotations: tuple[Annotation, ...]) -> bytes:
    out = bytearray(struct.pack(">H", len(annotations)))
    for a in annotations:
        _write_annotation(a, out)
    return bytes(out)


def write_parameter_annotations(params: tuple[tuple[Annotation, ...], ...]) -> bytes:
    out = bytearray(struct.pack(">B", len(params)))
    for annotations in params:
        out += struct.pack(">H", len(annotations))
        for a in annotations:
            _write_annotation(a, out)
    return bytes(out)


def write_annotation_default(value: ElementValue) -> bytes:
    out = bytearray()
    _write_element_value(value, out)
    return bytes(out)
