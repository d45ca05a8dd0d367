"""Field/method descriptor and generic signature grammars.

Both grammars parse to immutable trees that serialize back to the exact
input text. Class names inside the trees keep the internal '/'-separated
form. ``map_*_names`` rebuilds a tree with every class name passed through
a callback; unqualification and relocation are both expressed that way.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Union

from .errors import MalformedDescriptor, MalformedSignature

BASE_TYPES = frozenset("BCDFIJSZ")

NameFn = Callable[[str], str]


# ---------------------------------------------------------------------------
# Descriptors

@dataclass(frozen=True)
class BaseType:
    char: str

    def unparse(self) -> str:
        return self.char


@dataclass(frozen=True)
class ObjectType:
    name: str  # internal class name, '/'-separated

    def unparse(self) -> str:
        return f"L{self.name};"


@dataclass(frozen=True)
class ArrayType:
    dims: int
    element: Union[BaseType, ObjectType]

    def unparse(self) -> str:
        return "[" * self.dims + self.element.unparse()


FieldType = Union[BaseType, ObjectType, ArrayType]


@dataclass(frozen=True)
class FieldDescriptor:
    kind = "field"
    type: FieldType

    def unparse(self) -> str:
        return self.type.unparse()


@dataclass(frozen=True)
class MethodDescriptor:
    kind = "method"
    params: tuple[FieldType, ...]
    ret: FieldType | None  # None encodes void

    def unparse(self) -> str:
        ret = "V" if self.ret is None else self.ret.unparse()
        return "(" + "".join(p.unparse() for p in self.params) + ")" + ret


Descriptor = Union[FieldDescriptor, MethodDescriptor]


class _Cursor:
    __slots__ = ("text", "pos", "error")

    def __init__(self, text: str, error: type[Exception]):
        self.text = text
        self.pos = 0
        self.error = error

    def peek(self) -> str:
        if self.pos >= len(self.text):
            raise self.error(f"unexpected end of input in {self.text!r}")
        return self.text[self.pos]

    def next(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def expect(self, ch: str) -> None:
        if self.next() != ch:
            raise self.error(f"expected {ch!r} at offset {self.pos - 1} in {self.text!r}")

    def done(self) -> bool:
        return self.pos >= len(self.text)


def _parse_internal_name(c: _Cursor) -> str:
    start = c.pos
    while c.peek() != ";":
        c.pos += 1
    name = c.text[start:c.pos]
    c.pos += 1  # consume ';'
    if not name:
        raise c.error(f"empty class name in {c.text!r}")
    return name


def _parse_field_type(c: _Cursor) -> FieldType:
    ch = c.next()
    if ch in BASE_TYPES:
        return BaseType(ch)
    if ch == "L":
        return ObjectType(_parse_internal_name(c))
    if ch == "[":
        dims = 1
        while c.peek() == "[":
            dims += 1
            c.pos += 1
        # JVM caps array dimensions at 255
        if dims > 255:
            raise c.error("more than 255 array dimensions")
        element = _parse_field_type(c)
        assert not isinstance(element, ArrayType)
        return ArrayType(dims, element)
    raise c.error(f"unexpected character {ch!r} in {c.text!r}")


def parse_descriptor(text: str) -> Descriptor:
    """Parse a field or method descriptor; round-trips via ``unparse``."""
    c = _Cursor(text, MalformedDescriptor)
    if not text:
        raise MalformedDescriptor("empty descriptor")
    if text[0] == "(":
        c.pos = 1
        params = []
        while c.peek() != ")":
            params.append(_parse_field_type(c))
        c.pos += 1  # consume ')'
        ret = None if c.peek() == "V" else _parse_field_type(c)
        if ret is None:
            c.pos += 1
        d: Descriptor = MethodDescriptor(tuple(params), ret)
    else:
        d = FieldDescriptor(_parse_field_type(c))
    if not c.done():
        raise MalformedDescriptor(f"trailing text in descriptor {text!r}")
    return d


def map_descriptor_names(d: Descriptor, fn: NameFn) -> Descriptor:
    """Rebuild a descriptor with every object-type name mapped through fn."""

    def conv(t: FieldType) -> FieldType:
        if isinstance(t, ObjectType):
            return ObjectType(fn(t.name))
        if isinstance(t, ArrayType) and isinstance(t.element, ObjectType):
            return ArrayType(t.dims, ObjectType(fn(t.element.name)))
        return t

    if isinstance(d, FieldDescriptor):
        return FieldDescriptor(conv(d.type))
    ret = None if d.ret is None else conv(d.ret)
    return MethodDescriptor(tuple(conv(p) for p in d.params), ret)


# ---------------------------------------------------------------------------
# Signatures (generic type information, JVMS "Signature" attribute grammar)

@dataclass(frozen=True)
class TypeVariable:
    name: str

    def unparse(self) -> str:
        return f"T{self.name};"


@dataclass(frozen=True)
class Wildcard:
    def unparse(self) -> str:
        return "*"


@dataclass(frozen=True)
class BoundedTypeArg:
    indicator: str  # '', '+', or '-'
    type: "ReferenceTypeSig"

    def unparse(self) -> str:
        return self.indicator + self.type.unparse()


TypeArg = Union[Wildcard, BoundedTypeArg]


@dataclass(frozen=True)
class SimpleClassSig:
    name: str
    type_args: tuple[TypeArg, ...]

    def unparse(self) -> str:
        if not self.type_args:
            return self.name
        return self.name + "<" + "".join(a.unparse() for a in self.type_args) + ">"


@dataclass(frozen=True)
class ClassTypeSig:
    """L<package/>Simple<Args>.Inner<Args>... ; — package node kept distinct."""

    package: str  # '' for the default package
    simple: SimpleClassSig
    suffixes: tuple[SimpleClassSig, ...]

    def unparse(self) -> str:
        prefix = self.package + "/" if self.package else ""
        text = "L" + prefix + self.simple.unparse()
        for suffix in self.suffixes:
            text += "." + suffix.unparse()
        return text + ";"

    def outer_name(self) -> str:
        """Internal name of the outermost class (package + first simple name)."""
        return f"{self.package}/{self.simple.name}" if self.package else self.simple.name


@dataclass(frozen=True)
class ArraySig:
    dims: int
    element: "JavaTypeSig"

    def unparse(self) -> str:
        return "[" * self.dims + self.element.unparse()


ReferenceTypeSig = Union[ClassTypeSig, TypeVariable, ArraySig]
JavaTypeSig = Union[BaseType, ReferenceTypeSig]


@dataclass(frozen=True)
class TypeParam:
    name: str
    class_bound: ReferenceTypeSig | None
    interface_bounds: tuple[ReferenceTypeSig, ...]

    def unparse(self) -> str:
        text = self.name + ":"
        if self.class_bound is not None:
            text += self.class_bound.unparse()
        for bound in self.interface_bounds:
            text += ":" + bound.unparse()
        return text


@dataclass(frozen=True)
class ClassSignature:
    type_params: tuple[TypeParam, ...]
    superclass: ClassTypeSig
    interfaces: tuple[ClassTypeSig, ...]

    def unparse(self) -> str:
        return (_unparse_type_params(self.type_params)
                + self.superclass.unparse()
                + "".join(i.unparse() for i in self.interfaces))


@dataclass(frozen=True)
class MethodSignature:
    type_params: tuple[TypeParam, ...]
    params: tuple[JavaTypeSig, ...]
    ret: JavaTypeSig | None  # None encodes void
    throws: tuple[Union[ClassTypeSig, TypeVariable], ...]

    def unparse(self) -> str:
        ret = "V" if self.ret is None else self.ret.unparse()
        return (_unparse_type_params(self.type_params)
                + "(" + "".join(p.unparse() for p in self.params) + ")"
                + ret
                + "".join("^" + t.unparse() for t in self.throws))


@dataclass(frozen=True)
class FieldSignature:
    type: ReferenceTypeSig

    def unparse(self) -> str:
        return self.type.unparse()


SignatureTree = Union[ClassSignature, MethodSignature, FieldSignature]


def _unparse_type_params(params: tuple[TypeParam, ...]) -> str:
    if not params:
        return ""
    return "<" + "".join(p.unparse() for p in params) + ">"


_IDENT_STOP = frozenset(".;[/<>:")


def _parse_identifier(c: _Cursor) -> str:
    start = c.pos
    while not c.done() and c.text[c.pos] not in _IDENT_STOP:
        c.pos += 1
    if c.pos == start:
        raise c.error(f"empty identifier at offset {start} in {c.text!r}")
    return c.text[start:c.pos]


def _parse_simple_class_sig(c: _Cursor) -> SimpleClassSig:
    name = _parse_identifier(c)
    args: list[TypeArg] = []
    if not c.done() and c.peek() == "<":
        c.pos += 1
        while c.peek() != ">":
            if c.peek() == "*":
                c.pos += 1
                args.append(Wildcard())
            else:
                indicator = ""
                if c.peek() in "+-":
                    indicator = c.next()
                args.append(BoundedTypeArg(indicator, _parse_reference_type(c)))
        if not args:
            raise c.error("type argument list cannot be empty")
        c.pos += 1  # consume '>'
    return SimpleClassSig(name, tuple(args))


def _parse_class_type_sig(c: _Cursor) -> ClassTypeSig:
    c.expect("L")
    segments = [_parse_simple_class_sig(c)]
    while c.peek() == "/":
        if segments[-1].type_args:
            raise c.error("package segment cannot carry type arguments")
        c.pos += 1
        segments.append(_parse_simple_class_sig(c))
    package = "/".join(s.name for s in segments[:-1])
    simple = segments[-1]
    suffixes = []
    while c.peek() == ".":
        c.pos += 1
        suffixes.append(_parse_simple_class_sig(c))
    c.expect(";")
    return ClassTypeSig(package, simple, tuple(suffixes))


def _parse_reference_type(c: _Cursor) -> ReferenceTypeSig:
    ch = c.peek()
    if ch == "L":
        return _parse_class_type_sig(c)
    if ch == "T":
        c.pos += 1
        name = _parse_identifier(c)
        c.expect(";")
        return TypeVariable(name)
    if ch == "[":
        dims = 0
        while c.peek() == "[":
            dims += 1
            c.pos += 1
        return ArraySig(dims, _parse_java_type(c))
    raise c.error(f"unexpected character {ch!r} in signature {c.text!r}")


def _parse_java_type(c: _Cursor) -> JavaTypeSig:
    ch = c.peek()
    if ch in BASE_TYPES:
        c.pos += 1
        return BaseType(ch)
    return _parse_reference_type(c)


def _parse_type_params(c: _Cursor) -> tuple[TypeParam, ...]:
    if c.done() or c.peek() != "<":
        return ()
    c.pos += 1
    params = []
    while c.peek() != ">":
        name = _parse_identifier(c)
        c.expect(":")
        class_bound = None
        if c.peek() != ":" and c.peek() != ">":
            class_bound = _parse_reference_type(c)
        interface_bounds = []
        while c.peek() == ":":
            c.pos += 1
            interface_bounds.append(_parse_reference_type(c))
        params.append(TypeParam(name, class_bound, tuple(interface_bounds)))
    if not params:
        raise c.error("type parameter list cannot be empty")
    c.pos += 1  # consume '>'
    return tuple(params)


def parse_signature(text: str) -> SignatureTree:
    """Parse a class, method, or field signature (auto-detected)."""
    c = _Cursor(text, MalformedSignature)
    if not text:
        raise MalformedSignature("empty signature")
    type_params = _parse_type_params(c)
    if not c.done() and c.peek() == "(":
        c.pos += 1
        params = []
        while c.peek() != ")":
            params.append(_parse_java_type(c))
        c.pos += 1
        ret = None if c.peek() == "V" else _parse_java_type(c)
        if ret is None:
            c.pos += 1
        throws: list[ClassTypeSig | TypeVariable] = []
        while not c.done() and c.peek() == "^":
            c.pos += 1
            thrown = _parse_reference_type(c)
            if isinstance(thrown, ArraySig):
                raise MalformedSignature("array type in throws clause")
            throws.append(thrown)
        tree: SignatureTree = MethodSignature(type_params, tuple(params), ret, tuple(throws))
    elif type_params:
        superclass = _parse_class_type_sig(c)
        interfaces = []
        while not c.done():
            interfaces.append(_parse_class_type_sig(c))
        tree = ClassSignature(type_params, superclass, tuple(interfaces))
    else:
        first = _parse_reference_type(c)
        if c.done():
            tree = FieldSignature(first)
        else:
            if not isinstance(first, ClassTypeSig):
                raise MalformedSignature(f"trailing text in signature {text!r}")
            interfaces = []
            while not c.done():
                interfaces.append(_parse_class_type_sig(c))
            tree = ClassSignature((), first, tuple(interfaces))
    if not c.done():
        raise MalformedSignature(f"trailing text in signature {text!r}")
    return tree


def map_signature_names(tree: SignatureTree, fn: NameFn) -> SignatureTree:
    """Rebuild a signature with each class-type outer name mapped through fn.

    fn receives the internal name formed from the package and the first
    simple name; the result is split back into package and simple name at
    its last '/'. Type variables and inner-class suffixes stay untouched.
    """

    def conv_class(ct: ClassTypeSig) -> ClassTypeSig:
        new_name = fn(ct.outer_name())
        package, _, simple_name = new_name.rpartition("/")
        return ClassTypeSig(package,
                            replace(conv_simple(ct.simple), name=simple_name),
                            tuple(conv_simple(s) for s in ct.suffixes))

    def conv_simple(s: SimpleClassSig) -> SimpleClassSig:
        return SimpleClassSig(s.name, tuple(conv_arg(a) for a in s.type_args))

    def conv_arg(a: TypeArg) -> TypeArg:
        if isinstance(a, Wildcard):
            return a
        return BoundedTypeArg(a.indicator, conv_ref(a.type))

    def conv_ref(r: ReferenceTypeSig) -> ReferenceTypeSig:
        if isinstance(r, ClassTypeSig):
            return conv_class(r)
        if isinstance(r, ArraySig):
            return ArraySig(r.dims, conv_java(r.element))
        return r

    def conv_java(t: JavaTypeSig) -> JavaTypeSig:
        if isinstance(t, BaseType):
            return t
        return conv_ref(t)

    def conv_param(p: TypeParam) -> TypeParam:
        class_bound = None if p.class_bound is None else conv_ref(p.class_bound)
        return TypeParam(p.name, class_bound, tuple(conv_ref(b) for b in p.interface_bounds))

    if isinstance(tree, FieldSignature):
        return FieldSignature(conv_ref(tree.type))
    if isinstance(tree, MethodSignature):
        ret = None if tree.ret is None else conv_java(tree.ret)
        throws = tuple(conv_class(t) if isinstance(t, ClassTypeSig) else t for t in tree.throws)
        return MethodSignature(tuple(conv_param(p) for p in tree.type_params),
                               tuple(conv_java(p) for p in tree.params), ret, throws)
    return ClassSignature(tuple(conv_param(p) for p in tree.type_params),
                          conv_class(tree.superclass),
                          tuple(conv_class(i) for i in tree.interfaces))
