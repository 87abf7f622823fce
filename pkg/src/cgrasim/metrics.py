"""Run statistics, aggregation and CSV emission.

CSV schema (stable column order, one row per run):

    run_id, kernel, variant, cycles, utilization, spm_acc, l1_acc, l1_miss,
    l2_acc, dram_acc, ra_episodes, pf_used, pf_evicted, pf_useless, coverage

Counting rules: l1_acc is every accepted L1 lookup (normal or speculative);
l1_miss counts normal-mode demand misses (merges included); l2_acc counts
fetches the L1s dispatched to the L2 (demand allocations + prefetches, so
l1 demand fetches + prefetch fetches == l2_acc); dram_acc counts backing
fetches for L2 read misses, or direct backing transfers in the spm-only
system.  Writeback traffic is tracked separately and never folded into
these columns.
"""

import csv
from dataclasses import dataclass, field, fields


@dataclass
class RunStats:
    run_id: str
    kernel: str
    variant: str
    seed: int = 0
    total_cycles: int = 0
    active_cycles: int = 0
    stall_cycles: int = 0
    runahead_cycles: int = 0
    spm_acc: int = 0
    l1_acc: int = 0
    l1_miss: int = 0
    l2_acc: int = 0
    dram_acc: int = 0
    ra_episodes: int = 0
    pf_used: int = 0
    pf_evicted: int = 0
    pf_useless: int = 0
    coverage: float = 0.0
    image_digest: str = ""
    kernel_digest: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def utilization(self):
        return utilization(self)


def utilization(stats):
    """Active (non-stalled, normal-mode) cycles over total cycles."""
    if stats.total_cycles == 0:
        return 1.0  # degenerate zero-trip run: nothing ever stalled
    return stats.active_cycles / stats.total_cycles


def speedup(baseline, candidate):
    """baseline cycles / candidate cycles, for runs of the same kernel."""
    if baseline.kernel_digest != candidate.kernel_digest:
        raise ValueError("speedup across different kernels or data seeds")
    return baseline.total_cycles / candidate.total_cycles


CSV_COLUMNS = [
    "run_id", "kernel", "variant", "cycles", "utilization", "spm_acc",
    "l1_acc", "l1_miss", "l2_acc", "dram_acc", "ra_episodes", "pf_used",
    "pf_evicted", "pf_useless", "coverage",
]


def csv_row(stats):
    return {
        "run_id": stats.run_id,
        "kernel": stats.kernel,
        "variant": stats.variant,
        "cycles": stats.total_cycles,
        "utilization": f"{stats.utilization:.6f}",
        "spm_acc": stats.spm_acc,
        "l1_acc": stats.l1_acc,
        "l1_miss": stats.l1_miss,
        "l2_acc": stats.l2_acc,
        "dram_acc": stats.dram_acc,
        "ra_episodes": stats.ra_episodes,
        "pf_used": stats.pf_used,
        "pf_evicted": stats.pf_evicted,
        "pf_useless": stats.pf_useless,
        "coverage": f"{stats.coverage:.6f}",
    }


def emit_csv(stats_list, path):
    """Write one deterministic CSV file for a set of runs."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for stats in stats_list:
            writer.writerow(csv_row(stats))
