"""Integer ISA of the PE array: opcodes, tagged words, and ALU semantics.

Words are 32 bits, wrapping arithmetic.  Every datum carries a validity flag
("dummy" marks a placeholder produced while speculating past a miss); any
ALU result is dummy iff any operand it actually consumed was dummy.
"""

from typing import NamedTuple

MASK32 = 0xFFFFFFFF

# Computational opcodes
ADD = "ADD"
SUB = "SUB"
MUL = "MUL"
AND = "AND"
OR = "OR"
XOR = "XOR"
SHL = "SHL"
LSHR = "LSHR"
ASHR = "ASHR"
CMP_LT = "CMP_LT"
SELECT = "SELECT"
CONST = "CONST"
ROUTE = "ROUTE"
# Memory / structural opcodes
LOAD = "LOAD"
STORE = "STORE"
NOP = "NOP"

ALU_OPS = frozenset(
    {ADD, SUB, MUL, AND, OR, XOR, SHL, LSHR, ASHR, CMP_LT, SELECT, CONST, ROUTE}
)
ALL_OPS = ALU_OPS | {LOAD, STORE, NOP}

# Operands consumed per opcode: subset of ("a", "b", "c")
OPERANDS = {
    ADD: ("a", "b"),
    SUB: ("a", "b"),
    MUL: ("a", "b"),
    AND: ("a", "b"),
    OR: ("a", "b"),
    XOR: ("a", "b"),
    SHL: ("a", "b"),
    LSHR: ("a", "b"),
    ASHR: ("a", "b"),
    CMP_LT: ("a", "b"),
    SELECT: ("a", "b", "c"),
    CONST: (),
    ROUTE: ("a",),
    LOAD: ("a",),
    STORE: ("a", "b"),
    NOP: (),
}


class TaggedWord(NamedTuple):
    value: int
    dummy: bool = False


ZERO = TaggedWord(0, False)


def to_signed(v):
    return v - (1 << 32) if v & 0x80000000 else v


def alu_exec(op, a, b, c, immediate=0):
    """Evaluate one computational opcode on tagged words.

    Shift amounts are masked to 5 bits.  CMP_LT compares signed values.
    SELECT returns b when the condition a is nonzero, else c; its dummy flag
    covers all three operands (a dummy condition taints the selection).
    """
    if op == ADD:
        val = (a.value + b.value) & MASK32
    elif op == SUB:
        val = (a.value - b.value) & MASK32
    elif op == MUL:
        val = (a.value * b.value) & MASK32
    elif op == AND:
        val = a.value & b.value
    elif op == OR:
        val = a.value | b.value
    elif op == XOR:
        val = a.value ^ b.value
    elif op == SHL:
        val = (a.value << (b.value & 31)) & MASK32
    elif op == LSHR:
        val = a.value >> (b.value & 31)
    elif op == ASHR:
        val = (to_signed(a.value) >> (b.value & 31)) & MASK32
    elif op == CMP_LT:
        val = 1 if to_signed(a.value) < to_signed(b.value) else 0
    elif op == SELECT:
        val = b.value if a.value != 0 else c.value
    elif op == CONST:
        return TaggedWord(immediate & MASK32, False)
    elif op == ROUTE:
        return TaggedWord(a.value, a.dummy)
    else:
        raise ValueError(f"not a computational opcode: {op}")

    used = OPERANDS[op]
    dummy = (("a" in used and a.dummy)
             or ("b" in used and b.dummy)
             or ("c" in used and c.dummy))
    return TaggedWord(val, dummy)
