"""Memory-system configuration and the three named hardware presets.

Presets follow the evaluated hardware configurations: ``base`` and
``runahead`` are 4x4 grids with two virtual-SPM partitions (2x512B SPM, one
pooled 4KB/4-way L1, 128KB L2), ``reconfig`` is an 8x8 grid with four
partitions (4x2KB SPM, 4x4KB 8-way L1 pool, 128KB L2).  L1 sizes/ways
describe the pooled way array shared by all partitions; each partition
starts with an even share.  Physical L1 lines are fixed at 16 bytes; the
configured line size is realised as a virtual line of 2^m physical lines.
"""

from dataclasses import dataclass, replace

PHYS_LINE = 16
LINE_SIZES = (16, 32, 64, 128)


@dataclass
class HierarchyConfig:
    partitions: int = 2
    spm_bytes: int = 512  # per partition
    l1_size: int = 4096  # pooled bytes
    l1_line: int = 32  # configured (virtual) line size, bytes
    l1_ways: int = 4  # pooled ways
    l1_mshr: int = 16  # entries per partition
    l1_hit_latency: int = 1
    sb_slots: int = 16  # store-buffer slots per partition
    l2_size: int = 131072
    l2_line: int = 32
    l2_ways: int = 8
    l2_hit_latency: int = 8
    l2_miss_latency: int = 80
    grid_rows: int = 4
    grid_cols: int = 4
    window: int = 4096  # reconfiguration observation window, cycles
    threshold: float = 0.05  # time-miss-rate trigger
    temp_store_bytes: int = 512  # runahead temporary storage (SPM partition)
    reconfig_overhead: int = 64  # fixed control cycles per applied plan

    @property
    def n_sets(self):
        return self.l1_size // (self.l1_ways * PHYS_LINE)

    @property
    def line_exp(self):
        return (self.l1_line // PHYS_LINE).bit_length() - 1

    @property
    def line_choices(self):
        """Valid reconfigurable line sizes, capped by the L2 line."""
        return tuple(s for s in LINE_SIZES if s <= self.l2_line)

    def validate(self):
        for name in ("l1_line", "l2_line", "l1_size", "l2_size"):
            v = getattr(self, name)
            if v <= 0 or v & (v - 1):
                raise ValueError(f"{name} must be a positive power of two")
        if self.l1_line < PHYS_LINE or self.l1_line > self.l2_line:
            raise ValueError("l1 line must lie between 16B and the L2 line")
        if self.l1_size % (self.l1_ways * PHYS_LINE):
            raise ValueError("l1 size must divide into ways of 16B lines")
        if self.n_sets % (self.l1_line // PHYS_LINE):
            raise ValueError("virtual line does not divide the set count")
        if self.partitions < 1 or self.grid_rows % self.partitions:
            raise ValueError("partitions must evenly divide the grid rows")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")
        return self


PRESETS = {
    "base": HierarchyConfig(
        partitions=2, spm_bytes=512,
        l1_size=4096, l1_line=32, l1_ways=4, l1_mshr=16,
        l2_size=131072, l2_line=32, l2_ways=8,
        grid_rows=4, grid_cols=4,
    ),
    "runahead": HierarchyConfig(
        partitions=2, spm_bytes=512,
        l1_size=4096, l1_line=64, l1_ways=4, l1_mshr=16,
        l2_size=131072, l2_line=64, l2_ways=8,
        grid_rows=4, grid_cols=4,
    ),
    "reconfig": HierarchyConfig(
        partitions=4, spm_bytes=2048,
        l1_size=16384, l1_line=64, l1_ways=32, l1_mshr=16,
        l2_size=131072, l2_line=128, l2_ways=8,
        grid_rows=8, grid_cols=8,
    ),
}

VARIANTS = ("spm-only", "cache", "runahead", "reconfig")

_INT_FIELDS = {
    "partitions", "spm_bytes", "l1_size", "l1_line", "l1_ways", "l1_mshr",
    "l1_hit_latency", "sb_slots", "l2_size", "l2_line", "l2_ways",
    "l2_hit_latency", "l2_miss_latency", "grid_rows", "grid_cols", "window",
    "temp_store_bytes", "reconfig_overhead",
}


def preset(name):
    try:
        return replace(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; "
                         f"choose from {sorted(PRESETS)}") from None


def load_config_file(path, base=None):
    """Apply ``key = value`` lines from a config file over a preset.

    A ``preset = name`` line selects the starting preset; any HierarchyConfig
    field name may follow.  Lines starting with '#' are comments.
    """
    cfg = replace(base) if base is not None else preset("base")
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = (t.strip() for t in line.partition("="))
            if key == "preset":
                cfg = preset(value)
            elif key in _INT_FIELDS:
                cfg = replace(cfg, **{key: int(value, 0)})
            elif key == "threshold":
                cfg = replace(cfg, threshold=float(value))
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return cfg.validate()
