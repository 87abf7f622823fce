"""Closed-loop cache reconfiguration.

A monitor watches per-partition time miss rates (misses per cycle of a
fixed observation window, not per access).  When any partition exceeds the
trigger threshold, the next window of cache-path accesses is sampled.  The
sampled streams are replayed through a standalone single-level LRU model
for every (way count, line size) combination, deliberately ignoring the
way budget while profiling; the best time hit rate per way count fills a
log-profit matrix, the exact DP allocator picks the way split, and the
plan is applied by rewriting way permissions and virtual line sizes.
"""

import math
from dataclasses import dataclass, field

from .allocator import brute_force_alloc, max_profit  # re-exported API
from .config import PHYS_LINE

LOG_FLOOR = 1e-9  # time hit rates are floored here before taking logs


def time_miss_rate(misses, window):
    """Misses per cycle of the observation window (not per access)."""
    if window <= 0:
        raise ValueError("window must be positive")
    return misses / window


def time_hit_rate(misses, window):
    return 1.0 - time_miss_rate(misses, window)


def monitor_tick(rate, threshold):
    """Window-boundary decision: sample only on a strict exceed."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    return "trigger" if rate > threshold else "quiet"


@dataclass
class SampleWindow:
    start_cycle: int
    length: int
    accesses: list[list] = None  # per partition: [(cycle, addr, kind), ...]

    def __post_init__(self):
        if self.accesses is None:
            self.accesses = []

    def record(self, cycle, partition, kind, addr):
        if not self.start_cycle <= cycle < self.start_cycle + self.length:
            raise ValueError("sample outside the window")
        self.accesses[partition].append((cycle, addr, kind))


@dataclass
class ReconfigPlan:
    allocations: list[int]
    line_sizes: list[int]
    objective: float = 0.0

    def to_text(self):
        return "".join(
            f"partition {i} ways {s} line {l}\n"
            for i, (s, l) in enumerate(zip(self.allocations, self.line_sizes)))

    @classmethod
    def from_text(cls, text):
        allocations, line_sizes = [], []
        for line in text.splitlines():
            tok = line.split()
            if not tok:
                continue
            if (len(tok) != 6 or tok[0] != "partition" or tok[2] != "ways"
                    or tok[4] != "line"):
                raise ValueError(f"bad plan line: {line!r}")
            if int(tok[1]) != len(allocations):
                raise ValueError("plan partitions out of order")
            allocations.append(int(tok[3]))
            line_sizes.append(int(tok[5]))
        return cls(allocations, line_sizes)


class ModelCache:
    """Standalone single-level LRU model used for hit-rate profiling.

    Geometry rules mirror the real L1 (virtual lines over 16B physical
    lines, representative-set recency) but there is no miss timing, no MSHR
    and no data: a miss installs instantly.  Kept deliberately independent
    of the CacheUnit implementation.
    """

    def __init__(self, n_sets, ways, line_size):
        exp = (line_size // PHYS_LINE).bit_length() - 1
        if n_sets % (1 << exp):
            raise ValueError("line size does not divide the set count")
        self.vline = line_size
        self.n_vsets = n_sets >> exp
        self.ways = ways
        self.sets = [[] for _ in range(self.n_vsets)]  # MRU-first block lists

    def access(self, addr):
        if self.ways == 0:
            return "miss"
        block = addr - addr % self.vline
        entries = self.sets[(block // self.vline) % self.n_vsets]
        try:
            entries.remove(block)
        except ValueError:
            if len(entries) >= self.ways:
                entries.pop()
            entries.insert(0, block)
            return "miss"
        entries.insert(0, block)
        return "hit"


def model_hit_rates(window, partition, ways, line_size, n_sets):
    """Replay one partition's sampled accesses; returns the time hit rate."""
    model = ModelCache(n_sets, ways, line_size)
    misses = 0
    for _, addr, _ in window.accesses[partition]:
        if model.access(addr) == "miss":
            misses += 1
    return time_hit_rate(misses, window.length)


def build_profit_matrix(window, n_sets, t_max, line_choices):
    """H[i][k] = log of the best modelled time hit rate of partition i with
    k ways; also returns the argmax line size per (i, k)."""
    n = len(window.accesses)
    profits = []
    best_lines = []
    for i in range(n):
        row = []
        lines_row = []
        for k in range(t_max + 1):
            best_rate, best_line = None, line_choices[0]
            for line in line_choices:
                rate = model_hit_rates(window, i, k, line, n_sets)
                if best_rate is None or rate > best_rate:
                    best_rate, best_line = rate, line
            row.append(math.log(max(best_rate, LOG_FLOOR)))
            lines_row.append(best_line)
        for k in range(t_max):
            assert row[k + 1] >= row[k], \
                "modelled hit rate decreased with more ways"
        profits.append(row)
        best_lines.append(lines_row)
    return profits, best_lines


def build_plan(window, n_sets, t_max, line_choices):
    """Profile the sampled window and solve for the optimal way allocation."""
    profits, best_lines = build_profit_matrix(window, n_sets, t_max,
                                              line_choices)
    objective, allocations = max_profit(profits, t_max)
    line_sizes = [best_lines[i][allocations[i]] for i in range(len(profits))]
    return ReconfigPlan(allocations, line_sizes, objective), profits


IDLE = "idle"
SAMPLING = "sampling"


class ReconfigEngine:
    """Window-driven monitor/sampler/solver state machine.

    The simulator calls on_boundary() at every window multiple; while
    sampling, the hierarchy streams demand cache accesses into the current
    SampleWindow.  A freshly built plan is applied only when it beats the
    modelled objective of the current allocation, so converged workloads
    stop paying reconfiguration stalls.
    """

    def __init__(self, hierarchy):
        self.hierarchy = hierarchy
        self.cfg = hierarchy.config
        self.state = IDLE
        self.window = None
        self.plans_applied = 0
        self.samples_taken = 0
        self._last_misses = [0] * hierarchy.partitions

    def _window_rates(self):
        rates = []
        for p in range(self.hierarchy.partitions):
            total = self.hierarchy.cache.parts[p].demand_misses
            rates.append(time_miss_rate(total - self._last_misses[p],
                                        self.cfg.window))
            self._last_misses[p] = total
        return rates

    def on_boundary(self, cycle):
        """Window-boundary hook; returns a stall penalty in cycles."""
        if self.state == IDLE:
            rates = self._window_rates()
            if any(monitor_tick(r, self.cfg.threshold) == "trigger"
                   for r in rates):
                self.window = SampleWindow(
                    start_cycle=cycle, length=self.cfg.window,
                    accesses=[[] for _ in range(self.hierarchy.partitions)])
                self.hierarchy.sampler = self.window.record
                self.state = SAMPLING
            return 0

        # Sampling window complete: profile, solve, maybe apply.
        self.hierarchy.sampler = None
        self.state = IDLE
        self.samples_taken += 1
        self._window_rates()  # keep the per-window miss deltas aligned
        cache = self.hierarchy.cache
        plan, profits = build_plan(self.window, cache.n_sets, cache.total_ways,
                                   self.cfg.line_choices)
        self.window = None

        current_alloc = [len(cache.permitted_ways(p))
                         for p in range(self.hierarchy.partitions)]
        current_lines = [PHYS_LINE << cache.parts[p].line_exp
                         for p in range(self.hierarchy.partitions)]
        current_objective = sum(
            profits[i][min(current_alloc[i], cache.total_ways)]
            for i in range(len(current_alloc)))
        if (plan.allocations == current_alloc
                and plan.line_sizes == current_lines):
            return 0
        if plan.objective <= current_objective:
            return 0  # keep the current assignment (idle or tied profile)
        line_exps = [(l // PHYS_LINE).bit_length() - 1 for l in plan.line_sizes]
        penalty = self.hierarchy.apply_plan(plan.allocations, line_exps)
        self.plans_applied += 1
        return penalty
