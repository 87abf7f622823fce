"""Virtual-SPM-partitioned memory subsystem.

Requests from an edge PE row are served by that row's partition: a crossbar
routes each address either to the partition's SPM slice (1 cycle, only for
regions marked resident) or to its share of the pooled non-blocking L1.
All L1 fetches meet a shared non-inclusive L2; L2 misses pay a flat
80-cycle backing-store latency (no bandwidth contention is modelled, but
each L1 dispatches at most one fetch to the L2 per cycle).

The spm-only system variant routes every non-resident access over a single
serialised backing channel instead, stalling the array for the full latency
of each transfer.
"""

import heapq
from bisect import bisect_right

from .cache import CacheUnit, PHYS_LINE
from .config import HierarchyConfig
from .errors import MemoryFault, SimulationError
from .isa import TaggedWord


class BackingMemory:
    """Flat word-addressed store behind the L2 (and behind the SPM image)."""

    def __init__(self):
        self.words = {}

    def read_words(self, base, n):
        get = self.words.get
        return [get(base // 4 + i, 0) for i in range(n)]

    def write_words(self, base, words):
        w = self.words
        idx = base // 4
        for i, v in enumerate(words):
            w[idx + i] = v


class L2Cache:
    """Shared set-associative write-back LRU cache, plain physical lines."""

    def __init__(self, size, line, ways, hit_latency, miss_latency, backing):
        self.line = line
        self.words_per_line = line // 4
        self.ways = ways
        self.n_sets = size // (line * ways)
        self.hit_latency = hit_latency
        self.miss_latency = miss_latency
        self.backing = backing
        self.tags = [[None] * ways for _ in range(self.n_sets)]
        self.data = [[None] * ways for _ in range(self.n_sets)]
        self.dirty = [[False] * ways for _ in range(self.n_sets)]
        self.lru = [[0] * ways for _ in range(self.n_sets)]
        self.touch = 0
        self.accesses = 0
        self.misses = 0
        self.wb_accesses = 0
        self.dram_fetches = 0
        self.dram_writebacks = 0

    def _set_of(self, line_base):
        return (line_base // self.line) % self.n_sets

    def _lookup(self, line_base):
        s = self._set_of(line_base)
        for w in range(self.ways):
            if self.tags[s][w] == line_base:
                return s, w
        return s, None

    def _install(self, line_base, words, dirty):
        s = self._set_of(line_base)
        victim = None
        for w in range(self.ways):
            if self.tags[s][w] is None:
                victim = w
                break
        if victim is None:
            victim = min(range(self.ways), key=lambda w: self.lru[s][w])
            if self.dirty[s][victim]:
                self.backing.write_words(self.tags[s][victim], self.data[s][victim])
                self.dram_writebacks += 1
        self.tags[s][victim] = line_base
        self.data[s][victim] = words
        self.dirty[s][victim] = dirty
        self.touch += 1
        self.lru[s][victim] = self.touch
        return s, victim

    def read_block(self, base, nbytes):
        """Fetch nbytes (one L1 virtual line, contained in one L2 line).

        Returns (latency, words).
        """
        line_base = base - base % self.line
        if base - line_base + nbytes > self.line:
            raise SimulationError("fetch spans two L2 lines")
        self.accesses += 1
        s, w = self._lookup(line_base)
        if w is None:
            self.misses += 1
            self.dram_fetches += 1
            words = self.backing.read_words(line_base, self.words_per_line)
            s, w = self._install(line_base, words, dirty=False)
            latency = self.miss_latency
        else:
            self.touch += 1
            self.lru[s][w] = self.touch
            latency = self.hit_latency
        off = (base - line_base) // 4
        return latency, self.data[s][w][off:off + nbytes // 4]

    def write_block(self, base, words):
        """Absorb an L1 writeback (write-allocate, no stall modelled)."""
        line_base = base - base % self.line
        self.wb_accesses += 1
        s, w = self._lookup(line_base)
        if w is None:
            line_words = self.backing.read_words(line_base, self.words_per_line)
            s, w = self._install(line_base, line_words, dirty=True)
        off = (base - line_base) // 4
        self.data[s][w][off:off + len(words)] = words
        self.dirty[s][w] = True
        self.touch += 1
        self.lru[s][w] = self.touch

    def flush(self):
        for s in range(self.n_sets):
            for w in range(self.ways):
                if self.tags[s][w] is not None and self.dirty[s][w]:
                    self.backing.write_words(self.tags[s][w], self.data[s][w])
                self.tags[s][w] = None
                self.data[s][w] = None
                self.dirty[s][w] = False


class MemoryHierarchy:
    def __init__(self, program, config: HierarchyConfig, variant, tracker=None):
        config.validate()
        self.program = program
        self.config = config
        self.variant = variant
        self.partitions = config.partitions
        rows = program.grid_rows
        if rows % self.partitions:
            raise ValueError("partitions must evenly divide the kernel's rows")
        self.rows = rows

        # Region table for routing: sorted by base address.
        self.backing = BackingMemory()
        regs = sorted(program.data_image, key=lambda r: r.base)
        self.region_bases = [r.base for r in regs]
        self.region_table = []
        spm_load = [0] * self.partitions
        for r in regs:
            part = r.owner_row * self.partitions // rows
            resident = r.name in program.spm_resident
            if resident:
                spm_load[part] += r.size
            self.region_table.append((r.base, r.end, part, resident))
            self.backing.write_words(r.base, r.words)
        for p, used in enumerate(spm_load):
            if used > config.spm_bytes:
                raise ValueError(
                    f"partition {p}: resident regions ({used}B) exceed the "
                    f"{config.spm_bytes}B SPM")

        if variant == "spm-only":
            self.cache = None
            self.l2 = None
        else:
            self.cache = CacheUnit(
                n_sets=config.n_sets,
                total_ways=config.l1_ways,
                partitions=self.partitions,
                line_exps=[config.line_exp] * self.partitions,
                mshr_entries=config.l1_mshr,
                sb_slots=config.sb_slots,
                tracker=tracker,
            )
            self.l2 = L2Cache(config.l2_size, config.l2_line, config.l2_ways,
                              config.l2_hit_latency, config.l2_miss_latency,
                              self.backing)

        self.events = []  # (cycle, seq, kind, payload)
        self._seq = 0
        self.channel_free = 0  # spm-only backing channel
        self.spm_acc = 0
        self.direct_acc = 0  # spm-only backing accesses
        self.sampler = None  # reconfiguration access sampler, may be None

    # -- routing --------------------------------------------------------------

    def partition_of_row(self, row):
        return row * self.partitions // self.rows

    def lookup(self, addr):
        """(partition, resident) of the region containing addr, or None."""
        if addr % 4:
            return None
        i = bisect_right(self.region_bases, addr) - 1
        if i < 0:
            return None
        base, end, part, resident = self.region_table[i]
        if addr >= end:
            return None
        return part, resident

    def route(self, addr, row):
        """Resolve an address for a request issued by an edge PE row.

        Returns ("spm" | "cache", partition).  Faults on unmapped or
        misaligned addresses and on another partition's range.
        """
        part = self.partition_of_row(row)
        hit = self.lookup(addr)
        if hit is None:
            raise MemoryFault(f"address {addr:#x} outside all regions")
        owner, resident = hit
        if owner != part:
            raise MemoryFault(
                f"PE row {row} (partition {part}) touched partition "
                f"{owner}'s range at {addr:#x}")
        return ("spm" if resident else "cache"), part

    # -- event plumbing --------------------------------------------------------

    def _schedule(self, cycle, kind, payload):
        self._seq += 1
        heapq.heappush(self.events, (cycle, self._seq, kind, payload))

    def next_event_cycle(self):
        return self.events[0][0] if self.events else None

    # -- the demand path --------------------------------------------------------

    def handle_request(self, req, cycle):
        """Process one normal-mode request.

        Returns ("done", [(req_id, TaggedWord)]) with any same-cycle
        completions, or ("rejected",) when the request must be retried
        (MSHR or store buffer full).  Load misses complete later via tick().
        """
        addr = req.addr.value
        path, part = self.route(addr, req.row)
        if self.sampler is not None and path == "cache":
            self.sampler(cycle, part, req.kind, addr)

        if path == "spm":
            self.spm_acc += 1
            if req.kind == "load":
                word = self.backing.read_words(addr, 1)[0]
                return ("done", [(req.req_id, TaggedWord(word, False))])
            self.backing.write_words(addr, [req.data.value])
            return ("done", [])

        if self.variant == "spm-only":
            self.direct_acc += 1
            start = max(self.channel_free, cycle)
            done = start + self.config.l2_miss_latency
            self.channel_free = done
            if req.kind == "load":
                word = self.backing.read_words(addr, 1)[0]
                self._schedule(done, "direct", (req.req_id, word))
            else:
                self.backing.write_words(addr, [req.data.value])
                self._schedule(done, "direct", None)
            return ("done", [])

        if req.kind == "load":
            outcome = self.cache.load(part, addr, req.req_id, demand=True)
            if outcome[0] == "hit":
                return ("done", [(req.req_id, TaggedWord(outcome[1], False))])
            if outcome[0] == "mshr_full":
                return ("rejected",)
            return ("done", [])  # outstanding; fill delivers
        outcome = self.cache.store(part, addr, req.data.value, demand=True)
        if outcome[0] in ("mshr_full", "sb_full"):
            return ("rejected",)
        return ("done", [])

    # -- runahead probes ---------------------------------------------------------

    def runahead_load(self, addr, row):
        """Speculative load: real data on SPM/L1 hits, otherwise a prefetch.

        Returns (word | None, prefetched_block | None).  None data means the
        value is unknown (miss, in flight, dropped, or unrouteable) and the
        consumer must proceed with a dummy.
        """
        part = self.partition_of_row(row)
        hit = self.lookup(addr)
        if hit is None or hit[0] != part:
            return None, None  # speculative overrun, silently discarded
        if hit[1]:
            self.spm_acc += 1
            return self.backing.read_words(addr, 1)[0], None
        outcome = self.cache.load(part, addr, req_id=None, demand=False,
                                  is_prefetch=True)
        if outcome[0] == "hit":
            return outcome[1], None
        if outcome[0] == "miss_alloc" and self.cache.permitted_ways(part):
            return None, self.cache.parts[part].mshr[outcome[1]].block_addr
        return None, None

    def runahead_store_prefetch(self, addr, row):
        """Write converted to a prefetching read; data never reaches memory.

        Returns the prefetched block base, or None if present/pending/dropped.
        """
        part = self.partition_of_row(row)
        hit = self.lookup(addr)
        if hit is None or hit[0] != part or hit[1]:
            return None  # unrouteable, or SPM (always present)
        if not self.cache.permitted_ways(part):
            return None
        if self.cache.probe(part, addr) or self.cache.pending_block(part, addr):
            return None
        if not self.cache.mshr_free(part):
            return None
        outcome = self.cache.load(part, addr, req_id=None, demand=False,
                                  is_prefetch=True)
        if outcome[0] != "miss_alloc":
            raise SimulationError("prefetch allocation expected")
        return self.cache.parts[part].mshr[outcome[1]].block_addr

    # -- per-cycle advance ---------------------------------------------------------

    def tick(self, cycle):
        """Complete due transactions, then dispatch one fetch per L1.

        Returns load completions as (req_id, TaggedWord) pairs.
        """
        completions = []
        while self.events and self.events[0][0] <= cycle:
            _, _, kind, payload = heapq.heappop(self.events)
            if kind == "direct":
                if payload is not None:
                    req_id, word = payload
                    completions.append((req_id, TaggedWord(word, False)))
            else:  # L1 fill
                part, idx, words = payload
                fills, writebacks, writethrough = self.cache.fill(part, idx, words)
                for base, line_words in writebacks:
                    self.l2.write_block(base, line_words)
                if writethrough is not None:
                    self.l2.write_block(*writethrough)
                for req_id, word in fills:
                    completions.append((req_id, TaggedWord(word, False)))

        if self.cache is not None:
            for part in range(self.partitions):
                idx = self.cache.next_unissued(part)
                if idx is None:
                    continue
                entry = self.cache.parts[part].mshr[idx]
                vbytes = PHYS_LINE << self.cache.parts[part].line_exp
                latency, words = self.l2.read_block(entry.block_addr, vbytes)
                self.cache.mark_issued(part, idx)
                self._schedule(cycle + latency, "fill", (part, idx, list(words)))
        return completions

    def quiescent(self):
        if self.events:
            return False
        if self.cache is None:
            return True
        return all(self.cache.quiescent(p) for p in range(self.partitions))

    # -- reconfiguration ------------------------------------------------------------

    def apply_plan(self, allocations, line_exps):
        """Install a new way/line-size assignment; returns the stall cost."""
        writebacks = self.cache.apply_permissions(allocations, line_exps)
        for base, words in writebacks:
            self.l2.write_block(base, words)
        return self.config.reconfig_overhead + len(writebacks)

    # -- end of run -------------------------------------------------------------------

    def finalize(self):
        """Flush caches so the backing store holds the architectural image."""
        if self.cache is not None:
            for base, words in self.cache.flush():
                self.l2.write_block(base, words)
            self.l2.flush()

    def image_words(self):
        """Architectural memory image: every region's words, address order."""
        self.finalize()
        out = []
        for base, end, _, _ in sorted(self.region_table):
            out.append((base, self.backing.read_words(base, (end - base) // 4)))
        return out
