"""JVM instruction-stream scanning: operand widths and pool operands.

Only the shape of each instruction matters here (how many operand bytes,
which of them form a constant-pool index); semantics stay out of scope.
"""

from __future__ import annotations

import struct
from typing import Iterator

from .errors import MalformedClassFile

WIDE = 0xC4
TABLESWITCH = 0xAA
LOOKUPSWITCH = 0xAB
LDC = 0x12
LDC_W = 0x13
LDC2_W = 0x14
IINC = 0x84

# opcode -> (pool-index width in bytes, trailing operand bytes after the index)
CP_OPS: dict[int, tuple[int, int]] = {
    LDC: (1, 0),
    LDC_W: (2, 0),
    LDC2_W: (2, 0),
    0xB2: (2, 0),  # getstatic
    0xB3: (2, 0),  # putstatic
    0xB4: (2, 0),  # getfield
    0xB5: (2, 0),  # putfield
    0xB6: (2, 0),  # invokevirtual
    0xB7: (2, 0),  # invokespecial
    0xB8: (2, 0),  # invokestatic
    0xB9: (2, 2),  # invokeinterface: count byte + reserved zero
    0xBA: (2, 2),  # invokedynamic: two reserved zeros
    0xBB: (2, 0),  # new
    0xBD: (2, 0),  # anewarray
    0xC0: (2, 0),  # checkcast
    0xC1: (2, 0),  # instanceof
    0xC5: (2, 1),  # multianewarray: dimensions byte
}


def _fixed_lengths() -> dict[int, int]:
    lengths: dict[int, int] = {}
    for op in range(0x00, 0x10):          # nop, const push family
        lengths[op] = 0
    lengths[0x10] = 1                     # bipush
    lengths[0x11] = 2                     # sipush
    lengths[LDC] = 1
    lengths[LDC_W] = 2
    lengths[LDC2_W] = 2
    for op in range(0x15, 0x1A):          # iload..aload (u1 index)
        lengths[op] = 1
    for op in range(0x1A, 0x2E):          # iload_0..aload_3
        lengths[op] = 0
    for op in range(0x2E, 0x36):          # iaload..saload
        lengths[op] = 0
    for op in range(0x36, 0x3B):          # istore..astore (u1 index)
        lengths[op] = 1
    for op in range(0x3B, 0x4F):          # istore_0..astore_3
        lengths[op] = 0
    for op in range(0x4F, 0x57):          # iastore..sastore
        lengths[op] = 0
    for op in range(0x57, 0x84):          # stack ops, arithmetic, logic
        lengths[op] = 0
    lengths[IINC] = 2
    for op in range(0x85, 0x94):          # conversions
        lengths[op] = 0
    for op in range(0x94, 0x99):          # lcmp..dcmpg
        lengths[op] = 0
    for op in range(0x99, 0xA7):          # ifeq..if_acmpne (s2 branch)
        lengths[op] = 2
    lengths[0xA7] = 2                     # goto
    lengths[0xA8] = 2                     # jsr
    lengths[0xA9] = 1                     # ret
    for op in range(0xAC, 0xB2):          # ireturn..return
        lengths[op] = 0
    for op, (width, trailing) in CP_OPS.items():
        lengths[op] = width + trailing
    lengths[0xBC] = 1                     # newarray
    lengths[0xBE] = 0                     # arraylength
    lengths[0xBF] = 0                     # athrow
    lengths[0xC2] = 0                     # monitorenter
    lengths[0xC3] = 0                     # monitorexit
    lengths[0xC6] = 2                     # ifnull
    lengths[0xC7] = 2                     # ifnonnull
    lengths[0xC8] = 4                     # goto_w
    lengths[0xC9] = 4                     # jsr_w
    return lengths


FIXED_LENGTHS = _fixed_lengths()


def instruction_end(code: bytes, pos: int) -> int:
    """Offset one past the instruction starting at ``pos``."""
    op = code[pos]
    if op == WIDE:
        if pos + 1 >= len(code):
            raise MalformedClassFile("truncated wide instruction")
        return pos + (6 if code[pos + 1] == IINC else 4)
    if op == TABLESWITCH:
        base = (pos + 4) & ~3
        if base + 12 > len(code):
            raise MalformedClassFile("truncated tableswitch")
        low, high = struct.unpack_from(">ii", code, base + 4)
        if high < low:
            raise MalformedClassFile("tableswitch high below low")
        return base + 12 + 4 * (high - low + 1)
    if op == LOOKUPSWITCH:
        base = (pos + 4) & ~3
        if base + 8 > len(code):
            raise MalformedClassFile("truncated lookupswitch")
        npairs = struct.unpack_from(">i", code, base + 4)[0]
        if npairs < 0:
            raise MalformedClassFile("negative lookupswitch pair count")
        return base + 8 + 8 * npairs
    try:
        return pos + 1 + FIXED_LENGTHS[op]
    except KeyError:
        raise MalformedClassFile(f"unknown opcode 0x{op:02x}") from None


def iter_instructions(code: bytes) -> Iterator[tuple[int, int, int]]:
    """Yield (start, opcode, end) for each instruction in a code array."""
    pos = 0
    while pos < len(code):
        end = instruction_end(code, pos)
        if end > len(code):
            raise MalformedClassFile("instruction overruns code array")
        yield pos, code[pos], end
        pos = end
