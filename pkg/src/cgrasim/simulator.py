"""Top-level simulation loop tying the PE array to the memory subsystem.

One simulator cycle: due memory transactions complete first, then the array
acts.  In normal mode the array steps unless a load miss (or rejected
request awaiting retry) holds it; with the runahead variant a stall instead
enters speculation, which keeps stepping until every trigger miss is
filled.  The reconfiguration variant additionally runs the monitor /
sampler / solver state machine at observation-window boundaries.  The run
ends when the trip count is reached and all in-flight memory work drained.
"""

import hashlib
from collections import deque

from .errors import SimulationError
from .hierarchy import MemoryHierarchy
from .metrics import RunStats
from .pearray import NORMAL, RUNAHEAD, PEArray
from .reconfig import ReconfigEngine
from .runahead import PrefetchTracker, RunaheadController

VARIANTS = ("spm-only", "cache", "runahead", "reconfig")


class CycleCapExceeded(SimulationError):
    pass


class Simulator:
    def __init__(self, program, config, variant, seed=0, cycles_max=10 ** 8,
                 trace_mem=False, run_id=None, kernel_name="kernel"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.program = program
        self.config = config
        self.variant = variant
        self.cycles_max = cycles_max
        self.array = PEArray(program)
        self.tracker = PrefetchTracker() if variant == "runahead" else None
        self.hierarchy = MemoryHierarchy(program, config, variant, self.tracker)
        self.controller = None
        if variant == "runahead":
            self.controller = RunaheadController(self.array, self.hierarchy,
                                                 config.temp_store_bytes)
        self.engine = ReconfigEngine(self.hierarchy) \
            if variant == "reconfig" else None
        self.retry = deque()
        self.trace = [] if trace_mem else None
        self.stats = RunStats(
            run_id=run_id or f"{kernel_name}-{variant}-{seed}",
            kernel=kernel_name, variant=variant, seed=seed,
            kernel_digest=program.digest())

    # -- helpers ---------------------------------------------------------------

    def _accept(self, req, cycle):
        """Offer one normal-mode request to the hierarchy."""
        outcome = self.hierarchy.handle_request(req, cycle)
        if outcome[0] == "rejected":
            return False
        for req_id, word in outcome[1]:
            self.array.deliver(req_id, word)
        return True

    def _drain_retries(self, cycle):
        while self.retry:
            if not self._accept(self.retry[0], cycle):
                return
            self.retry.popleft()

    def _fast_forward(self, cycle):
        """Cycles to skip while the array is provably idle."""
        nxt = self.hierarchy.next_event_cycle()
        if nxt is None or nxt <= cycle + 1:
            return 0
        target = nxt
        if self.engine is not None:
            w = self.config.window
            boundary = (cycle // w + 1) * w
            target = min(target, boundary)
        target = min(target, self.cycles_max)
        return max(0, target - cycle - 1)

    # -- main loop ---------------------------------------------------------------

    def run(self):
        array = self.array
        hierarchy = self.hierarchy
        st = self.stats
        trip = self.program.trip_count
        cycle = 0
        frozen_until = 0

        while True:
            if (array.mode == NORMAL and not array.pending and not self.retry
                    and array.iteration >= trip and hierarchy.quiescent()
                    and cycle >= frozen_until):
                break
            if cycle >= self.cycles_max:
                raise CycleCapExceeded(
                    f"no completion within {self.cycles_max} cycles")
            cycle += 1

            if self.engine is not None and cycle % self.config.window == 0:
                penalty = self.engine.on_boundary(cycle)
                if penalty:
                    frozen_until = cycle + penalty

            for req_id, word in hierarchy.tick(cycle):
                array.deliver(req_id, word)

            if cycle < frozen_until:  # reconfiguration in progress
                st.stall_cycles += 1
                continue

            if array.mode == RUNAHEAD:
                st.stall_cycles += 1
                st.runahead_cycles += 1
                if self.controller.should_exit():
                    self.controller.exit(cycle)
                    continue
                for req in array.step(cycle):
                    self.controller.process(req)
                continue

            if self.retry:
                self._drain_retries(cycle)
                st.stall_cycles += 1
                if self.retry:
                    skip = self._fast_forward(cycle)
                    st.stall_cycles += skip
                    cycle += skip
                continue

            if array.stalled():
                if self.controller is not None:
                    self.controller.enter(cycle)
                    st.stall_cycles += 1
                    st.runahead_cycles += 1
                    for req in array.step(cycle):
                        self.controller.process(req)
                else:
                    st.stall_cycles += 1
                    skip = self._fast_forward(cycle)
                    st.stall_cycles += skip
                    cycle += skip
                continue

            if array.iteration >= trip:  # kernel done, memory draining
                st.stall_cycles += 1
                skip = self._fast_forward(cycle)
                st.stall_cycles += skip
                cycle += skip
                continue

            requests = array.step(cycle)
            st.active_cycles += 1
            if self.trace is not None:
                for req in requests:
                    self.trace.append((cycle, req.pe, req.kind, req.addr.value))
            blocked = False
            for req in requests:
                if blocked or not self._accept(req, cycle):
                    blocked = True  # keep program order: queue the rest too
                    self.retry.append(req)

        st.total_cycles = cycle
        self._finalize(st)
        return st

    def _finalize(self, st):
        image = self.hierarchy.image_words()
        h = hashlib.sha256()
        for base, words in image:
            h.update(base.to_bytes(8, "little"))
            for w in words:
                h.update(w.to_bytes(4, "little"))
        st.image_digest = h.hexdigest()

        st.spm_acc = self.hierarchy.spm_acc
        cache = self.hierarchy.cache
        if cache is not None:
            st.l1_acc = sum(p.acc for p in cache.parts)
            st.l1_miss = sum(p.demand_misses for p in cache.parts)
            st.l2_acc = self.hierarchy.l2.accesses
            st.dram_acc = self.hierarchy.l2.dram_fetches
        else:
            st.dram_acc = self.hierarchy.direct_acc
        if self.controller is not None:
            st.ra_episodes = len(self.controller.episodes)
            used, evicted, useless = self.tracker.counts()
            st.pf_used = used
            st.pf_evicted = evicted
            st.pf_useless = useless
            avoided = used
            remaining = st.l1_miss
            st.coverage = avoided / (avoided + remaining) \
                if avoided + remaining else 0.0
        if self.engine is not None:
            st.extra["plans_applied"] = self.engine.plans_applied
            st.extra["samples_taken"] = self.engine.samples_taken
        st.extra["partial_virtual_lines"] = (
            cache.partial_observations if cache is not None else 0)


def run_simulation(program, config, variant, **kwargs):
    return Simulator(program, config, variant, **kwargs).run()
