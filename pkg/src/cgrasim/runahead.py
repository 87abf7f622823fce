"""Runahead execution: speculation during load-miss stalls, for prefetching.

When a normal-mode load misses, the array snapshots its state and keeps
stepping with dummy placeholders instead of pausing.  Speculative requests
whose address depends on a dummy are discarded outright.  Valid loads read
the temporary store, SPM or L1; on an L1 miss they return a dummy and leave
a prefetch behind.  Valid stores never touch memory: the data lands in a
small temporary store (read-your-own-write within the episode) and the
address is converted into a prefetching read.  The episode ends once every
triggering miss has been filled; restoring the snapshot makes the whole
episode architecturally invisible.
"""

from collections import Counter, OrderedDict
from dataclasses import dataclass, field

from .errors import SimulationError
from .isa import TaggedWord
from .pearray import NORMAL, RUNAHEAD


@dataclass
class RunaheadEpisode:
    entry_cycle: int
    trigger_misses: int
    exit_cycle: int | None = None
    prefetches_issued: list[int] = field(default_factory=list)
    invalid_reads: int = 0
    invalid_writes: int = 0
    dropped_prefetches: int = 0
    temp_evictions: int = 0
    raw_risk: bool = False  # a temp-store eviction was later read back


class PrefetchTracker:
    """Classifies every prefetched block as Used / Evicted / Useless.

    Used: a normal-mode demand access touched the block while it was cached.
    Evicted: it was displaced untouched, and demand later missed on it.
    Useless: the program never demanded it.
    """

    def __init__(self):
        self.used = 0
        self.evicted = 0
        self.evicted_untouched = Counter()  # block -> instances awaiting demand
        self.in_cache_untouched = 0
        self.total = 0

    def on_prefetch_fill(self, block, used_at_fill):
        self.total += 1
        if used_at_fill:
            # A demand miss coalesced into the prefetch; the block served it.
            self.used += 1
        else:
            self.in_cache_untouched += 1

    def on_demand_use(self, block):
        self.used += 1
        self.in_cache_untouched -= 1

    def on_evict_untouched(self, block):
        self.in_cache_untouched -= 1
        self.evicted_untouched[block] += 1

    def on_demand_miss(self, block):
        if self.evicted_untouched.get(block, 0) > 0:
            self.evicted_untouched[block] -= 1
            self.evicted += 1

    def counts(self):
        """(used, evicted, useless); the three sum to the prefetch total."""
        useless = (self.in_cache_untouched
                   + sum(self.evicted_untouched.values()))
        assert self.used + self.evicted + useless == self.total
        return self.used, self.evicted, useless


class RunaheadController:
    def __init__(self, array, hierarchy, temp_store_bytes):
        self.array = array
        self.hierarchy = hierarchy
        self.temp_capacity = temp_store_bytes // 4  # word-granular entries
        self.temp = OrderedDict()  # addr -> word, FIFO on overflow
        self.episodes = []
        self.episode = None
        self.evicted_temp_addrs = set()

    @property
    def active(self):
        return self.episode is not None

    def enter(self, cycle):
        """Snapshot state and dummy out the destinations of every
        outstanding (triggering) load miss."""
        array = self.array
        if array.mode != NORMAL:
            raise SimulationError("runahead entry outside normal mode")
        if not array.pending:
            raise SimulationError("runahead entry without an outstanding miss")
        array.save_state()
        array.mode = RUNAHEAD
        for req_id in list(array.pending):
            array.mark_dummy(req_id)
        self.episode = RunaheadEpisode(entry_cycle=cycle,
                                       trigger_misses=len(array.pending))
        self.temp.clear()
        self.evicted_temp_addrs.clear()

    def should_exit(self):
        """All triggering misses resolved (their fills landed in the shadow)."""
        return not any(mode == NORMAL for _, _, mode in self.array.pending.values())

    def exit(self, cycle):
        ep = self.episode
        ep.exit_cycle = cycle
        self.array.restore_state()
        self.temp.clear()
        self.episodes.append(ep)
        self.episode = None

    # -- speculative request handling ---------------------------------------

    def process(self, req):
        """Handle one request emitted while speculating."""
        ep = self.episode
        if req.kind == "load":
            if req.addr.dummy:
                ep.invalid_reads += 1
                self.array.deliver(req.req_id, TaggedWord(0, True))
                return
            addr = req.addr.value
            if addr in self.temp:
                self.array.deliver(req.req_id, TaggedWord(self.temp[addr], False))
                return
            if addr in self.evicted_temp_addrs:
                ep.raw_risk = True  # diagnosis only; data stays speculative
            word, prefetched = self.hierarchy.runahead_load(addr, req.row)
            if prefetched is not None:
                ep.prefetches_issued.append(prefetched)
            if word is not None:
                self.array.deliver(req.req_id, TaggedWord(word, False))
            else:
                if prefetched is None and not req.addr.dummy:
                    ep.dropped_prefetches += 1
                self.array.deliver(req.req_id, TaggedWord(0, True))
            return

        # Store: discarded when tainted, otherwise contained + converted
        # into a prefetching read.
        if req.addr.dummy or req.data.dummy:
            ep.invalid_writes += 1
            return
        addr = req.addr.value
        if addr not in self.temp and len(self.temp) >= self.temp_capacity:
            evicted, _ = self.temp.popitem(last=False)
            self.evicted_temp_addrs.add(evicted)
            ep.temp_evictions += 1
        self.temp[addr] = req.data.value
        prefetched = self.hierarchy.runahead_store_prefetch(addr, req.row)
        if prefetched is not None:
            ep.prefetches_issued.append(prefetched)

    def total_prefetches(self):
        return sum(len(ep.prefetches_issued) for ep in self.episodes)
