"""Mapped-kernel representation: per-PE/context configs plus the data image.

A kernel file is line-oriented text (see README for the grammar):

    grid R C
    ii N
    trip N
    region NAME BASE LEN [spm] [rowR]
    data NAME IDX VALUE
    pe R C CTX OPCODE SRC_A SRC_B SRC_C DEST IMM

Sources are ``n|e|s|w`` (neighbour output latch), ``rK`` (local register),
``#imm`` (inline immediate) or ``-`` (unused).  Dest is ``rK``, ``out`` or
``-``.  The optional ``rowR`` token on a region names the edge-PE row that
owns the region; the memory hierarchy maps owner rows onto virtual-SPM
partitions at setup.  Lines starting with ``#`` or ``//`` are comments.
"""

import hashlib
from dataclasses import dataclass, field

from .isa import ALL_OPS, MASK32, OPERANDS, CONST, LOAD, NOP, SELECT, STORE

REG_COUNT = 16
WORD = 4
MEM_COLUMN = 0  # only this column is wired to the memory subsystem


class KernelError(Exception):
    """Kernel file syntax or validation error."""

    def __init__(self, msg, line=None):
        self.line = line
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


@dataclass(frozen=True)
class PEConfig:
    opcode: str
    src_a: tuple | None = None
    src_b: tuple | None = None
    src_c: tuple | None = None
    dest: tuple | None = None
    immediate: int = 0


@dataclass
class Region:
    name: str
    base: int
    words: list[int]
    owner_row: int = 0

    @property
    def size(self):
        return len(self.words) * WORD

    @property
    def end(self):
        return self.base + self.size


@dataclass
class KernelProgram:
    grid_rows: int
    grid_cols: int
    initiation_interval: int
    trip_count: int
    pe_configs: dict[tuple, PEConfig] = field(default_factory=dict)
    data_image: list[Region] = field(default_factory=list)
    spm_resident: list[str] = field(default_factory=list)

    def region(self, name):
        for r in self.data_image:
            if r.name == name:
                return r
        raise KeyError(name)

    def digest(self):
        return hashlib.sha256(emit_kernel(self).encode()).hexdigest()


def validate(program):
    p = program
    if p.grid_rows < 1 or p.grid_cols < 1:
        raise KernelError("grid must be at least 1x1")
    if p.initiation_interval < 1:
        raise KernelError("ii must be positive")
    if p.trip_count < 0:
        raise KernelError("trip count must be non-negative")

    for (r, c, ctx), cfg in p.pe_configs.items():
        where = f"pe {r} {c} ctx {ctx}"
        if not (0 <= r < p.grid_rows and 0 <= c < p.grid_cols):
            raise KernelError(f"{where}: outside {p.grid_rows}x{p.grid_cols} grid")
        if not 0 <= ctx < p.initiation_interval:
            raise KernelError(f"{where}: context >= ii ({p.initiation_interval})")
        if cfg.opcode not in ALL_OPS:
            raise KernelError(f"{where}: unknown opcode {cfg.opcode}")
        if cfg.opcode in (LOAD, STORE) and c != MEM_COLUMN:
            raise KernelError(
                f"{where}: {cfg.opcode} only allowed on edge column {MEM_COLUMN}")
        for slot in OPERANDS[cfg.opcode]:
            if getattr(cfg, f"src_{slot}") is None:
                raise KernelError(f"{where}: {cfg.opcode} needs src_{slot}")
        needs_dest = cfg.opcode not in (STORE, NOP)
        if needs_dest and cfg.dest is None:
            raise KernelError(f"{where}: {cfg.opcode} needs a destination")
        if cfg.opcode == LOAD and cfg.dest[0] != "reg":
            raise KernelError(f"{where}: LOAD destination must be a register")
        for sel in (cfg.src_a, cfg.src_b, cfg.src_c):
            if sel is not None and sel[0] == "reg" and not 0 <= sel[1] < REG_COUNT:
                raise KernelError(f"{where}: register index out of range")
        if cfg.dest is not None and cfg.dest[0] == "reg" \
                and not 0 <= cfg.dest[1] < REG_COUNT:
            raise KernelError(f"{where}: dest register out of range")
        if not 0 <= cfg.immediate <= MASK32:
            raise KernelError(f"{where}: immediate must be masked to 32 bits")
        for sel in (cfg.src_a, cfg.src_b, cfg.src_c):
            if sel is not None and sel[0] == "imm" and not 0 <= sel[1] <= MASK32:
                raise KernelError(f"{where}: inline immediate must be masked")

    spans = sorted((reg.base, reg.end, reg.name) for reg in p.data_image)
    for (b1, e1, n1), (b2, e2, n2) in zip(spans, spans[1:]):
        if b2 < e1:
            raise KernelError(f"regions {n1} and {n2} overlap")
    for reg in p.data_image:
        # 128B = the largest cache line; alignment keeps partitions from ever
        # sharing a line, which is what makes coherence-by-partitioning sound.
        if reg.base % 128 or not reg.words:
            raise KernelError(
                f"region {reg.name}: base must be 128-byte aligned, len > 0")
        if not 0 <= reg.owner_row < p.grid_rows:
            raise KernelError(f"region {reg.name}: owner row outside grid")
        if reg.end > 1 << 32:
            raise KernelError(f"region {reg.name}: exceeds 32-bit address space")
    names = [reg.name for reg in p.data_image]
    if len(set(names)) != len(names):
        raise KernelError("duplicate region name")
    for name in p.spm_resident:
        if name not in names:
            raise KernelError(f"spm region {name} not declared")
    for reg in p.data_image:
        for val in reg.words:
            if not 0 <= val <= MASK32:
                raise KernelError(f"region {reg.name}: word values must be masked")
    # Canonical order so that parse(emit(p)) == p.
    p.spm_resident = [n for n in names if n in p.spm_resident]
    return p


def _parse_src(tok, line):
    if tok == "-":
        return None
    if tok in ("n", "e", "s", "w"):
        return ("dir", tok)
    if tok.startswith("r") and tok[1:].isdigit():
        return ("reg", int(tok[1:]))
    if tok.startswith("#"):
        try:
            return ("imm", int(tok[1:], 0) & MASK32)
        except ValueError:
            raise KernelError(f"bad immediate {tok}", line) from None
    raise KernelError(f"bad source operand {tok}", line)


def _parse_dest(tok, line):
    if tok == "-":
        return None
    if tok == "out":
        return ("out",)
    if tok.startswith("r") and tok[1:].isdigit():
        return ("reg", int(tok[1:]))
    raise KernelError(f"bad destination {tok}", line)


def _int(tok, line, what):
    try:
        return int(tok, 0)
    except ValueError:
        raise KernelError(f"bad {what} {tok!r}", line) from None


def parse_kernel(text):
    rows = cols = None
    ii = 1
    trip = 0
    configs = {}
    regions = []
    spm = []
    region_index = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("//"):
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "grid":
            if len(tok) != 3:
                raise KernelError("grid takes 2 arguments", lineno)
            rows = _int(tok[1], lineno, "row count")
            cols = _int(tok[2], lineno, "column count")
        elif kind == "ii":
            ii = _int(tok[1], lineno, "ii")
        elif kind == "trip":
            trip = _int(tok[1], lineno, "trip count")
        elif kind == "region":
            if len(tok) < 4:
                raise KernelError("region takes NAME BASE LEN [spm] [rowR]", lineno)
            name = tok[1]
            base = _int(tok[2], lineno, "base address")
            length = _int(tok[3], lineno, "region length")
            if length <= 0 or length % WORD:
                raise KernelError("region length must be a positive word multiple",
                                  lineno)
            owner = 0
            for extra in tok[4:]:
                if extra == "spm":
                    spm.append(name)
                elif extra.startswith("row") and extra[3:].isdigit():
                    owner = int(extra[3:])
                else:
                    raise KernelError(f"bad region tag {extra}", lineno)
            if name in region_index:
                raise KernelError(f"duplicate region {name}", lineno)
            region_index[name] = len(regions)
            regions.append(Region(name, base, [0] * (length // WORD), owner))
        elif kind == "data":
            if len(tok) != 4:
                raise KernelError("data takes NAME IDX VALUE", lineno)
            name = tok[1]
            if name not in region_index:
                raise KernelError(f"data before region {name}", lineno)
            reg = regions[region_index[name]]
            idx = _int(tok[2], lineno, "word index")
            if not 0 <= idx < len(reg.words):
                raise KernelError(f"data index {idx} outside region {name}", lineno)
            reg.words[idx] = _int(tok[3], lineno, "word value") & MASK32
        elif kind == "pe":
            if len(tok) != 10:
                raise KernelError(
                    "pe takes R C CTX OPCODE SRC_A SRC_B SRC_C DEST IMM", lineno)
            r = _int(tok[1], lineno, "pe row")
            c = _int(tok[2], lineno, "pe column")
            ctx = _int(tok[3], lineno, "context")
            op = tok[4]
            if op not in ALL_OPS:
                raise KernelError(f"unknown opcode {op}", lineno)
            cfg = PEConfig(
                opcode=op,
                src_a=_parse_src(tok[5], lineno),
                src_b=_parse_src(tok[6], lineno),
                src_c=_parse_src(tok[7], lineno),
                dest=_parse_dest(tok[8], lineno),
                immediate=_int(tok[9], lineno, "immediate") & MASK32,
            )
            if (r, c, ctx) in configs:
                raise KernelError(f"duplicate pe {r} {c} ctx {ctx}", lineno)
            configs[(r, c, ctx)] = cfg
        else:
            raise KernelError(f"unknown directive {kind}", lineno)

    if rows is None:
        raise KernelError("missing grid directive")
    program = KernelProgram(
        grid_rows=rows,
        grid_cols=cols,
        initiation_interval=ii,
        trip_count=trip,
        pe_configs=configs,
        data_image=regions,
        spm_resident=spm,
    )
    return validate(program)


def _src_str(sel):
    if sel is None:
        return "-"
    if sel[0] == "dir":
        return sel[1]
    if sel[0] == "reg":
        return f"r{sel[1]}"
    return f"#{sel[1]}"


def _dest_str(sel):
    if sel is None:
        return "-"
    if sel[0] == "out":
        return "out"
    return f"r{sel[1]}"


def emit_kernel(program):
    """Inverse of parse_kernel: parse_kernel(emit_kernel(p)) == p."""
    p = program
    lines = [
        f"grid {p.grid_rows} {p.grid_cols}",
        f"ii {p.initiation_interval}",
        f"trip {p.trip_count}",
    ]
    for reg in p.data_image:
        tags = ""
        if reg.name in p.spm_resident:
            tags += " spm"
        if reg.owner_row:
            tags += f" row{reg.owner_row}"
        lines.append(f"region {reg.name} {reg.base:#x} {reg.size}{tags}")
    for reg in p.data_image:
        for idx, val in enumerate(reg.words):
            if val:
                lines.append(f"data {reg.name} {idx} {val}")
    for (r, c, ctx) in sorted(p.pe_configs):
        cfg = p.pe_configs[(r, c, ctx)]
        lines.append(
            f"pe {r} {c} {ctx} {cfg.opcode} {_src_str(cfg.src_a)}"
            f" {_src_str(cfg.src_b)} {_src_str(cfg.src_c)}"
            f" {_dest_str(cfg.dest)} {cfg.immediate}")
    return "\n".join(lines) + "\n"
