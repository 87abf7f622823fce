"""Reconfigurable non-blocking L1 cache pool.

One CacheUnit holds the physical line array shared by every virtual-SPM
partition: sets x total_ways lines of 16 bytes.  Each way has a permission
register naming the partition that may hit or allocate in it, so moving a
way between partitions reconfigures cache size/associativity.  Each
partition additionally has a virtual-line exponent m: lines are replaced in
groups of 2^m consecutive physical lines (one "virtual line"), while hits
keep physical-line granularity.  LRU bookkeeping for a virtual set lives
entirely in its first physical set (the representative set).

Miss handling is non-blocking: an MSHR entry per outstanding virtual line,
a load/store table recording each miss consumer, and a store buffer holding
write-allocate data until the fill merges it.  All of those are per
partition, matching one "L1 cache" per virtual SPM.
"""

from dataclasses import dataclass, field

from .errors import SimulationError

PHYS_LINE = 16
PHYS_WORDS = PHYS_LINE // 4


@dataclass
class MshrEntry:
    valid: bool = False
    block_addr: int = 0  # virtual-line base address
    issued: bool = False
    demand: bool = False  # any normal-mode consumer waiting
    alloc_seq: int = 0


@dataclass
class LoadStoreEntry:
    mshr_index: int
    dest: int | None  # request id for read misses, store-buffer slot for writes
    op_type: str  # "LW" | "SW"
    offset: int  # byte offset within the virtual line
    is_prefetch: bool = False


@dataclass
class StoreBufferSlot:
    valid: bool = False
    addr: int = 0
    data: int = 0


class Line:
    __slots__ = ("base", "dirty", "words", "pf_untouched")

    def __init__(self):
        self.base = None
        self.dirty = False
        self.words = None
        self.pf_untouched = False


@dataclass
class PartitionState:
    line_exp: int  # virtual line = 2^m physical lines
    mshr: list[MshrEntry]
    lst: list[LoadStoreEntry] = field(default_factory=list)
    store_buffer: list[StoreBufferSlot] = field(default_factory=list)
    # counters
    acc: int = 0
    hits: int = 0
    demand_misses: int = 0  # allocations + merges + bypasses, normal mode
    demand_fetches: int = 0  # allocations + bypasses (what reaches L2)
    prefetch_fetches: int = 0


class CacheUnit:
    def __init__(self, n_sets, total_ways, partitions, line_exps, mshr_entries,
                 sb_slots, tracker=None):
        if n_sets & (n_sets - 1):
            raise ValueError("set count must be a power of two")
        self.n_sets = n_sets
        self.total_ways = total_ways
        self.n_partitions = partitions
        self.lines = [[Line() for _ in range(total_ways)] for _ in range(n_sets)]
        self.lru = [[0] * total_ways for _ in range(n_sets)]
        self.touch = 0
        self.alloc_seq = 0
        # Even initial split: way w belongs to partition w * P // total_ways.
        self.way_permissions = [w * partitions // total_ways
                                for w in range(total_ways)]
        self.parts = []
        for p in range(partitions):
            exp = line_exps[p]
            if n_sets % (1 << exp):
                raise ValueError("virtual line does not divide the set count")
            self.parts.append(PartitionState(
                line_exp=exp,
                mshr=[MshrEntry() for _ in range(mshr_entries)],
                store_buffer=[StoreBufferSlot() for _ in range(sb_slots)],
            ))
        self.tracker = tracker  # prefetch-outcome listener, may be None
        self.partial_observations = 0  # must stay zero (full hit/full miss)

    # -- geometry helpers ---------------------------------------------------

    def permitted_ways(self, partition):
        return [w for w in range(self.total_ways)
                if self.way_permissions[w] == partition]

    def _locate(self, partition, addr):
        """(virtual line base, representative set) for an address."""
        exp = self.parts[partition].line_exp
        vbytes = PHYS_LINE << exp
        vbase = addr & ~(vbytes - 1)
        n_vsets = self.n_sets >> exp
        rep = ((vbase // vbytes) % n_vsets) << exp
        return vbase, rep

    def _find_way(self, partition, vbase, rep):
        exp = self.parts[partition].line_exp
        for w in self.permitted_ways(partition):
            if self.lines[rep][w].base == vbase:
                for j in range(1, 1 << exp):
                    if self.lines[rep + j][w].base != vbase + PHYS_LINE * j:
                        self.partial_observations += 1
                        raise SimulationError("partially present virtual line")
                return w
        return None

    def _touch_way(self, rep, way):
        self.touch += 1
        self.lru[rep][way] = self.touch

    def select_victim(self, virtual_set, partition):
        """LRU-least-recent permitted way per the representative set's
        metadata; invalid permitted ways are chosen first (lowest index)."""
        exp = self.parts[partition].line_exp
        rep = virtual_set << exp
        ways = self.permitted_ways(partition)
        if not ways:
            raise SimulationError("victim requested with zero permitted ways")
        for w in ways:
            if self.lines[rep][w].base is None:
                return w
        return min(ways, key=lambda w: self.lru[rep][w])

    # -- lookups ------------------------------------------------------------

    def probe(self, partition, addr):
        """Presence check without any state change."""
        vbase, rep = self._locate(partition, addr)
        return self._find_way(partition, vbase, rep) is not None

    def pending_block(self, partition, addr):
        vbase, _ = self._locate(partition, addr)
        for entry in self.parts[partition].mshr:
            if entry.valid and entry.block_addr == vbase:
                return True
        return False

    def mshr_free(self, partition):
        return any(not e.valid for e in self.parts[partition].mshr)

    # -- the access path ----------------------------------------------------

    def _hit_path(self, partition, vbase, rep, way, demand):
        part = self.parts[partition]
        self._touch_way(rep, way)
        if demand and self.lines[rep][way].pf_untouched:
            self.lines[rep][way].pf_untouched = False
            if self.tracker:
                self.tracker.on_demand_use(vbase)
        part.hits += 1

    def _miss_path(self, partition, vbase, demand):
        """Allocate or coalesce an MSHR entry for a missing virtual line.

        Returns ("miss_alloc", idx) | ("miss_merge", idx) | ("mshr_full",).
        A partition with zero permitted ways never hits; its misses still
        allocate MSHR entries, but fills will not install a line.
        """
        part = self.parts[partition]
        for i, entry in enumerate(part.mshr):
            if entry.valid and entry.block_addr == vbase:
                if demand:
                    part.demand_misses += 1
                    if self.tracker:
                        self.tracker.on_demand_miss(vbase)
                return ("miss_merge", i)
        free = next((i for i, e in enumerate(part.mshr) if not e.valid), None)
        if free is None:
            return ("mshr_full",)
        if demand:
            part.demand_misses += 1
            part.demand_fetches += 1
            if self.tracker:
                self.tracker.on_demand_miss(vbase)
        else:
            part.prefetch_fetches += 1
        entry = part.mshr[free]
        entry.valid = True
        entry.block_addr = vbase
        entry.issued = False
        entry.demand = demand
        self.alloc_seq += 1
        entry.alloc_seq = self.alloc_seq
        return ("miss_alloc", free)

    def load(self, partition, addr, req_id, demand, is_prefetch=False):
        """Load access.  ("hit", word) or a _miss_path outcome; misses get a
        load/store-table entry naming the consumer (or the prefetch tag)."""
        part = self.parts[partition]
        vbase, rep = self._locate(partition, addr)
        way = self._find_way(partition, vbase, rep)
        part.acc += 1
        if way is not None:
            self._hit_path(partition, vbase, rep, way, demand)
            sub = rep + (addr - vbase) // PHYS_LINE
            word = self.lines[sub][way].words[(addr % PHYS_LINE) // 4]
            return ("hit", word)
        outcome = self._miss_path(partition, vbase, demand)
        if outcome[0] != "mshr_full":
            part.lst.append(LoadStoreEntry(
                mshr_index=outcome[1],
                dest=req_id,
                op_type="LW",
                offset=addr - vbase,
                is_prefetch=is_prefetch,
            ))
        return outcome

    def store(self, partition, addr, data, demand=True):
        """Store access: hits write through to the line; misses park the data
        in the store buffer until the fill merges it (write-allocate)."""
        part = self.parts[partition]
        vbase, rep = self._locate(partition, addr)
        way = self._find_way(partition, vbase, rep)
        part.acc += 1
        if way is not None:
            self._hit_path(partition, vbase, rep, way, demand)
            sub = rep + (addr - vbase) // PHYS_LINE
            line = self.lines[sub][way]
            line.words[(addr % PHYS_LINE) // 4] = data
            line.dirty = True
            return ("hit", None)

        slot = next((i for i, s in enumerate(part.store_buffer) if not s.valid),
                    None)
        if slot is None:
            return ("sb_full",)
        outcome = self._miss_path(partition, vbase, demand)
        if outcome[0] == "mshr_full":
            return outcome
        sb = part.store_buffer[slot]
        sb.valid = True
        sb.addr = addr
        sb.data = data
        part.lst.append(LoadStoreEntry(
            mshr_index=outcome[1],
            dest=slot,
            op_type="SW",
            offset=addr - vbase,
        ))
        return outcome

    # -- fills --------------------------------------------------------------

    def next_unissued(self, partition):
        """Oldest allocated-but-unissued MSHR entry, or None.  Modelling one
        fetch dispatched to the next level per cycle per L1."""
        part = self.parts[partition]
        best = None
        for i, e in enumerate(part.mshr):
            if e.valid and not e.issued:
                if best is None or e.alloc_seq < part.mshr[best].alloc_seq:
                    best = i
        return best

    def mark_issued(self, partition, idx):
        self.parts[partition].mshr[idx].issued = True

    def fill(self, partition, mshr_idx, words):
        """Install a fetched virtual line and resolve its miss consumers.

        ``words`` covers the whole virtual line.  Load/store-table entries
        are replayed in arrival order, so reads observe exactly the writes
        that preceded them in program order.  Returns (completions,
        writebacks, writethrough): completions are (req_id, word) pairs for
        demand loads; writebacks are (base, words) evicted dirty physical
        lines; writethrough carries merged data when no line was installed
        (zero permitted ways).
        """
        part = self.parts[partition]
        entry = part.mshr[mshr_idx]
        if not (entry.valid and entry.issued):
            raise SimulationError("fill for an invalid or unissued MSHR entry")
        vbase = entry.block_addr
        exp = part.line_exp
        words = list(words)

        completions = []
        merged_store = False
        remaining = []
        served_demand = False
        for lse in part.lst:
            if lse.mshr_index != mshr_idx:
                remaining.append(lse)
                continue
            if lse.op_type == "SW":
                sb = part.store_buffer[lse.dest]
                words[lse.offset // 4] = sb.data
                sb.valid = False
                merged_store = True
            elif not lse.is_prefetch:
                completions.append((lse.dest, words[lse.offset // 4]))
                served_demand = True
        part.lst = remaining

        writebacks = []
        writethrough = None
        ways = self.permitted_ways(partition)
        if ways:
            n_vsets = self.n_sets >> exp
            vset = (vbase // (PHYS_LINE << exp)) % n_vsets
            victim = self.select_victim(vset, partition)
            rep = vset << exp
            evict_base = self.lines[rep][victim].base
            if evict_base is not None:
                if self.lines[rep][victim].pf_untouched and self.tracker:
                    self.tracker.on_evict_untouched(evict_base)
                for j in range(1 << exp):
                    line = self.lines[rep + j][victim]
                    if line.base is not None and line.dirty:
                        writebacks.append((line.base, line.words))
                    line.base = None
                    line.words = None
                    line.dirty = False
                    line.pf_untouched = False
            for j in range(1 << exp):
                line = self.lines[rep + j][victim]
                line.base = vbase + PHYS_LINE * j
                line.words = words[j * PHYS_WORDS:(j + 1) * PHYS_WORDS]
                line.dirty = merged_store
            is_pf_block = not entry.demand
            self.lines[rep][victim].pf_untouched = is_pf_block and not served_demand
            if self.tracker and is_pf_block:
                self.tracker.on_prefetch_fill(vbase, used_at_fill=served_demand)
            self._touch_way(rep, victim)
        elif merged_store:
            writethrough = (vbase, words)

        entry.valid = False
        entry.issued = False
        entry.demand = False
        return completions, writebacks, writethrough

    # -- reconfiguration + maintenance ---------------------------------------

    def apply_permissions(self, allocations, line_exps):
        """Re-assign ways and per-partition virtual line sizes.

        Ways changing owner, and every way of a partition whose line size
        changed, are written back and invalidated.  LRU metadata is reset.
        Returns the evicted dirty lines as (base, words) pairs.
        """
        if sum(allocations) > self.total_ways:
            raise SimulationError("allocation exceeds the way budget")
        new_perms = []
        for p, count in enumerate(allocations):
            new_perms.extend([p] * count)
        leftovers = self.total_ways - len(new_perms)
        for i in range(leftovers):  # round-robin any unallocated ways
            new_perms.append(i % self.n_partitions)

        resized = {p for p in range(self.n_partitions)
                   if line_exps[p] != self.parts[p].line_exp}
        writebacks = []
        for w in range(self.total_ways):
            owner = self.way_permissions[w]
            if new_perms[w] != owner or owner in resized:
                for s in range(self.n_sets):
                    line = self.lines[s][w]
                    if line.base is not None:
                        if line.dirty:
                            writebacks.append((line.base, line.words))
                        if line.pf_untouched and self.tracker:
                            self.tracker.on_evict_untouched(line.base)
                        line.base = None
                        line.words = None
                        line.dirty = False
                        line.pf_untouched = False
        self.way_permissions = new_perms
        for p in range(self.n_partitions):
            self.parts[p].line_exp = line_exps[p]
        self.lru = [[0] * self.total_ways for _ in range(self.n_sets)]
        return writebacks

    def flush(self):
        """Write back and drop every line (end of run, before imaging)."""
        writebacks = []
        for s in range(self.n_sets):
            for w in range(self.total_ways):
                line = self.lines[s][w]
                if line.base is not None:
                    if line.dirty:
                        writebacks.append((line.base, line.words))
                    if line.pf_untouched and self.tracker:
                        self.tracker.on_evict_untouched(line.base)
                    line.base = None
                    line.words = None
                    line.dirty = False
                    line.pf_untouched = False
        return writebacks

    def quiescent(self, partition):
        part = self.parts[partition]
        return (not any(e.valid for e in part.mshr)
                and not any(s.valid for s in part.store_buffer)
                and not part.lst)

    # -- functional (timing-free) mode ---------------------------------------

    def access_functional(self, partition, kind, addr, fetch, writeback):
        """Timing-free access: misses install immediately.

        ``fetch(base, nwords)`` supplies line data, ``writeback(base, words)``
        absorbs dirty evictions.  Returns "hit" or "miss".  Used by the
        cache-model agreement checks; the timed path never calls this.
        """
        part = self.parts[partition]
        vbase, rep = self._locate(partition, addr)
        way = self._find_way(partition, vbase, rep)
        part.acc += 1
        exp = part.line_exp
        if way is not None:
            self._touch_way(rep, way)
            sub = rep + (addr - vbase) // PHYS_LINE
            if kind == "store":
                self.lines[sub][way].words[(addr % PHYS_LINE) // 4] = 0
                self.lines[sub][way].dirty = True
            part.hits += 1
            return "hit"
        ways = self.permitted_ways(partition)
        if ways:
            n_vsets = self.n_sets >> exp
            vset = (vbase // (PHYS_LINE << exp)) % n_vsets
            victim = self.select_victim(vset, partition)
            for j in range(1 << exp):
                line = self.lines[rep + j][victim]
                if line.base is not None and line.dirty:
                    writeback(line.base, line.words)
                line.base = vbase + PHYS_LINE * j
                line.words = fetch(vbase + PHYS_LINE * j, PHYS_WORDS)
                line.dirty = kind == "store" and (addr - vbase) // PHYS_LINE == j
            self._touch_way(rep, victim)
        return "miss"
