"""cgrasim: cycle-accurate CGRA + memory-subsystem simulator."""

from .config import HierarchyConfig, PRESETS, preset
from .generators import (AccessPatternSpec, gen_gather_kernel,
                         gen_mixed_partition_kernel, gen_pattern_kernel,
                         gen_radix_hist_kernel)
from .kernel import KernelError, KernelProgram, emit_kernel, parse_kernel
from .metrics import RunStats, emit_csv, speedup, utilization
from .simulator import Simulator, run_simulation

__all__ = [
    "AccessPatternSpec", "HierarchyConfig", "KernelError", "KernelProgram",
    "PRESETS", "RunStats", "Simulator", "emit_csv", "emit_kernel",
    "gen_gather_kernel", "gen_mixed_partition_kernel", "gen_pattern_kernel",
    "gen_radix_hist_kernel", "parse_kernel", "preset", "run_simulation",
    "speedup", "utilization",
]
