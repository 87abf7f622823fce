"""Cycle-level execution of a mapped kernel on the PE grid.

All PEs run in lockstep: each cycle every PE executes its configuration for
the current context, neighbour values travel through single-cycle output
latches, and edge-column PEs emit memory requests arbitrated in row order.
The array as a whole stalls while a normal-mode load miss is outstanding.
Entering runahead snapshots registers, latches and counters into backup
(shadow) state; restoring brings them back bit-exactly.
"""

from dataclasses import dataclass

from .errors import SimulationError
from .isa import (ALU_OPS, LOAD, NOP, STORE, TaggedWord, ZERO, alu_exec)
from .kernel import MEM_COLUMN

NORMAL = "normal"
RUNAHEAD = "runahead"


@dataclass
class MemoryRequest:
    kind: str  # "load" | "store"
    addr: TaggedWord
    data: TaggedWord | None
    pe: int
    row: int
    req_id: int
    issue_cycle: int


class PEArray:
    def __init__(self, program):
        self.program = program
        self.rows = program.grid_rows
        self.cols = program.grid_cols
        self.ii = program.initiation_interval
        n = self.rows * self.cols
        self.regs = [[ZERO] * 16 for _ in range(n)]
        self.out = [ZERO] * n
        self.context = 0
        self.iteration = 0
        self.mode = NORMAL
        self.shadow = None
        # req_id -> (pe, dest, issue_mode); only normal-mode misses linger here
        self.pending = {}
        self.next_req_id = 0
        # Per-context schedule of active configs, memory PEs in row order last
        # so that requests come out already arbitrated.
        self.schedule = [[] for _ in range(self.ii)]
        for (r, c, ctx), cfg in sorted(program.pe_configs.items()):
            if cfg.opcode != NOP:
                self.schedule[ctx].append((r * self.cols + c, r, c, cfg))

    # -- operand plumbing -------------------------------------------------

    def _read(self, sel, pe, r, c):
        if sel[0] == "reg":
            return self.regs[pe][sel[1]]
        if sel[0] == "imm":
            return TaggedWord(sel[1], False)
        d = sel[1]
        if d == "n":
            return self.out[pe - self.cols] if r > 0 else ZERO
        if d == "s":
            return self.out[pe + self.cols] if r < self.rows - 1 else ZERO
        if d == "w":
            return self.out[pe - 1] if c > 0 else ZERO
        return self.out[pe + 1] if c < self.cols - 1 else ZERO

    def write_dest(self, pe, dest, word):
        if self.mode == NORMAL and word.dummy:
            raise SimulationError("dummy value written in normal mode")
        if dest[0] == "reg":
            self.regs[pe][dest[1]] = word
        else:
            self.out[pe] = word

    # -- stepping ----------------------------------------------------------

    def stalled(self):
        return self.mode == NORMAL and bool(self.pending)

    def step(self, cycle):
        """Execute the current context on every PE.

        Returns the memory requests emitted this cycle, in PE-row order.
        The caller must not step a stalled array.
        """
        if self.stalled():
            raise SimulationError("stepping a stalled array")
        writes = []
        out_writes = []
        requests = []
        for pe, r, c, cfg in self.schedule[self.context]:
            op = cfg.opcode
            if op in ALU_OPS:
                a = self._read(cfg.src_a, pe, r, c) if cfg.src_a else ZERO
                b = self._read(cfg.src_b, pe, r, c) if cfg.src_b else ZERO
                cc = self._read(cfg.src_c, pe, r, c) if cfg.src_c else ZERO
                word = alu_exec(op, a, b, cc, cfg.immediate)
                if cfg.dest[0] == "reg":
                    writes.append((pe, cfg.dest[1], word))
                else:
                    out_writes.append((pe, word))
            elif op == LOAD:
                addr = self._read(cfg.src_a, pe, r, c)
                rid = self.next_req_id
                self.next_req_id += 1
                self.pending[rid] = (pe, cfg.dest, self.mode)
                requests.append(MemoryRequest("load", addr, None, pe, r, rid, cycle))
            elif op == STORE:
                addr = self._read(cfg.src_a, pe, r, c)
                data = self._read(cfg.src_b, pe, r, c)
                rid = self.next_req_id
                self.next_req_id += 1
                requests.append(MemoryRequest("store", addr, data, pe, r, rid, cycle))
        # Synchronous update: every operand above read pre-cycle state.
        for pe, idx, word in writes:
            if self.mode == NORMAL and word.dummy:
                raise SimulationError("dummy value written in normal mode")
            self.regs[pe][idx] = word
        for pe, word in out_writes:
            self.out[pe] = word
        self.context += 1
        if self.context == self.ii:
            self.context = 0
            self.iteration += 1
        return requests

    def deliver(self, req_id, word):
        """Complete an outstanding load with its data.

        During runahead, data for normal-mode trigger loads lands in the
        shadow snapshot so the restore sees it.
        """
        try:
            pe, dest, issue_mode = self.pending.pop(req_id)
        except KeyError:
            raise SimulationError(f"response for unknown request {req_id}") from None
        if self.mode == RUNAHEAD and issue_mode == NORMAL:
            if word.dummy:
                raise SimulationError("dummy fill for a normal-mode load")
            self.shadow["regs"][pe][dest[1]] = word
        else:
            self.write_dest(pe, dest, word)

    # -- runahead state management ------------------------------------------

    def save_state(self):
        if self.mode != NORMAL:
            raise SimulationError("save_state only valid in normal mode")
        self.shadow = {
            "regs": [list(bank) for bank in self.regs],
            "out": list(self.out),
            "context": self.context,
            "iteration": self.iteration,
        }

    def restore_state(self):
        if self.mode != RUNAHEAD:
            raise SimulationError("restore_state only valid in runahead mode")
        if self.shadow is None:
            raise SimulationError("no shadow state to restore")
        self.regs = [list(bank) for bank in self.shadow["regs"]]
        self.out = list(self.shadow["out"])
        self.context = self.shadow["context"]
        self.iteration = self.shadow["iteration"]
        self.shadow = None
        self.mode = NORMAL
        for bank in self.regs:
            for word in bank:
                if word.dummy:
                    raise SimulationError("dummy flag survived a restore")

    def mark_dummy(self, req_id):
        """Turn an outstanding load's destination into a dummy placeholder
        (runahead entry for the triggering misses)."""
        pe, dest, _ = self.pending[req_id]
        self.regs[pe][dest[1]] = TaggedWord(self.regs[pe][dest[1]].value, True)
