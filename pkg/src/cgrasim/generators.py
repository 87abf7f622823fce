"""Builtin benchmark kernels with controlled memory-access shapes.

Every generator emits a fully mapped KernelProgram: memory streams sit on
edge-column PEs, addresses are computed in the dataflow itself, and each
loop iteration completes within one pass of the initiation interval (a
designated PE per stream keeps its own induction register).  All random
content flows from splitmix64 child seeds, so identical seeds give
byte-identical kernels.

The gather kernel implements the edge-centric aggregation loop

    output[edge_start[i]*F] (+)= weight[i] * feature[edge_end[i]*F]

over seeded synthetic edge lists (F is the padded feature length; only
element 0 of each node's vector is touched, spreading irregular accesses
across F words per node).  accumulate=False turns the read-modify-write
into a plain indexed store, removing the memory-carried dependency.
"""

from dataclasses import dataclass

from .isa import MASK32
from .kernel import KernelProgram, PEConfig, Region, validate
from .rng import SplitMix64, split_seed

KNUTH32 = 2654435761  # multiplicative hash constant for in-dataflow "random"
PATTERN_KINDS = ("constant", "linear", "strided", "random-uniform",
                 "irregular-step", "mixed")


@dataclass
class AccessPatternSpec:
    kind: str
    base: int = 0x1000
    range_words: int = 1024  # power of two for the hashed kinds
    stride: int = 4  # bytes, linear/strided (may be negative)
    max_step_words: int = 16  # power of two, irregular-step
    seed: int = 0
    row: int = 0  # edge-PE row carrying the stream


def _lg(n, what):
    if n <= 0 or n & (n - 1):
        raise ValueError(f"{what} must be a positive power of two")
    return n.bit_length() - 1


def _hash32(x):
    return ((x & MASK32) * KNUTH32) & MASK32


def reference_pattern_addresses(spec, length):
    """Standalone regeneration of the address sequence a pattern kernel
    issues; the simulator's trace must match this exactly."""
    kind = spec.kind
    out = []
    if kind == "constant":
        return [spec.base] * length
    if kind in ("linear", "strided"):
        for j in range(length):
            out.append((spec.base + spec.stride * j) & MASK32)
        return out
    if kind == "random-uniform":
        k = _lg(spec.range_words, "range_words")
        for j in range(length):
            off = _hash32(spec.seed + j) >> (32 - k)
            out.append(spec.base + 4 * off)
        return out
    if kind == "irregular-step":
        _lg(spec.range_words, "range_words")
        lgstep = _lg(spec.max_step_words, "max_step_words")
        acc = 0
        for j in range(length):
            acc = (acc + (_hash32(spec.seed + j) >> (32 - lgstep))) & MASK32
            out.append(spec.base + 4 * (acc & (spec.range_words - 1)))
        return out
    if kind == "mixed":
        k = _lg(spec.range_words, "range_words")
        for j in range(length):
            if j & 1:
                off = _hash32(spec.seed + j) >> (32 - k)
            else:
                off = (j >> 1) & (spec.range_words - 1)
            out.append(spec.base + 4 * off)
        return out
    raise ValueError(f"unknown pattern kind {kind!r}")


class _Builder:
    """Accumulates pe configs context by context."""

    def __init__(self, rows, cols, trip):
        self.rows = rows
        self.cols = cols
        self.trip = trip
        self.configs = {}
        self.max_ctx = -1

    def put(self, r, c, ctx, op, a=None, b=None, c_src=None, dest=None, imm=0):
        key = (r, c, ctx)
        assert key not in self.configs, f"double-mapped {key}"
        self.configs[key] = PEConfig(op, a, b, c_src, dest, imm & MASK32)
        self.max_ctx = max(self.max_ctx, ctx)

    def program(self, regions, spm, ii=None):
        prog = KernelProgram(
            grid_rows=self.rows,
            grid_cols=self.cols,
            initiation_interval=ii if ii is not None else self.max_ctx + 1,
            trip_count=self.trip,
            pe_configs=self.configs,
            data_image=regions,
            spm_resident=spm,
        )
        return validate(prog)


def _layout(sizes, start=0x1000, gap=128):
    """Assign 128B-aligned, gap-separated base addresses."""
    bases = []
    addr = start
    for size in sizes:
        bases.append(addr)
        addr += size + gap
        addr += (-addr) % 128
    return bases


R = lambda k: ("reg", k)
IMM = lambda v: ("imm", v & MASK32)


def gen_gather_kernel(num_edges, num_nodes, seed, grid=(4, 4), feature_dim=4,
                      accumulate=True):
    """Edge-list gather/aggregate kernel (see module docstring).

    Streams: edge_start/weight/output on partition rows 0-1, edge_end and
    feature on rows 2-3, so a two-partition system splits the traffic.
    """
    rows, cols = grid
    if rows < 4 or cols < 2:
        raise ValueError("gather needs at least a 4x2 grid for its streams")
    lgf = _lg(feature_dim, "feature_dim")
    if num_edges < 1 or num_nodes < 1:
        raise ValueError("need at least one edge and one node")

    e_bytes = num_edges * 4
    n_bytes = num_nodes * feature_dim * 4
    a_es, a_ee, a_w, a_f, a_od = _layout(
        [e_bytes, e_bytes, e_bytes, n_bytes, n_bytes])

    rng_e = SplitMix64(split_seed(seed, 0))
    rng_w = SplitMix64(split_seed(seed, 1))
    rng_f = SplitMix64(split_seed(seed, 2))
    edge_start = [rng_e.randrange(num_nodes) for _ in range(num_edges)]
    edge_end = [rng_e.randrange(num_nodes) for _ in range(num_edges)]
    weight = [rng_w.randrange(256) for _ in range(num_edges)]
    feature = [0] * (num_nodes * feature_dim)
    for n in range(num_nodes):
        feature[n * feature_dim] = rng_f.randrange(256)

    regions = [
        Region("edge_start", a_es, list(edge_start), owner_row=0),
        Region("edge_end", a_ee, list(edge_end), owner_row=2),
        Region("weight", a_w, list(weight), owner_row=1),
        Region("feature", a_f, feature, owner_row=3),
        Region("output", a_od, [0] * (num_nodes * feature_dim), owner_row=0),
    ]

    b = _Builder(rows, cols, trip=num_edges)
    # (0,0): edge_start stream, output read-modify-write
    b.put(0, 0, 0, "SHL", R(1), IMM(2), dest=R(2))
    b.put(0, 0, 1, "ADD", R(2), IMM(a_es), dest=R(3))
    b.put(0, 0, 2, "LOAD", R(3), dest=R(4))
    b.put(0, 0, 3, "SHL", R(4), IMM(2 + lgf), dest=R(5))
    b.put(0, 0, 4, "ADD", R(5), IMM(a_od), dest=R(6))
    if accumulate:
        b.put(0, 0, 5, "LOAD", R(6), dest=R(7))
        b.put(0, 0, 6, "ROUTE", R(7), dest=("out",))
    b.put(0, 0, 12, "STORE", R(6), ("dir", "e"))
    b.put(0, 0, 13, "ADD", R(1), IMM(1), dest=R(1))
    # (0,1): accumulate output + w*f (or pass w*f through)
    if accumulate:
        b.put(0, 1, 7, "ROUTE", ("dir", "w"), dest=R(1))
        b.put(0, 1, 11, "ADD", R(1), ("dir", "s"), dest=("out",))
    else:
        b.put(0, 1, 11, "ROUTE", ("dir", "s"), dest=("out",))
    # (1,0): weight stream
    b.put(1, 0, 0, "SHL", R(1), IMM(2), dest=R(2))
    b.put(1, 0, 1, "ADD", R(2), IMM(a_w), dest=R(3))
    b.put(1, 0, 2, "LOAD", R(3), dest=R(4))
    b.put(1, 0, 3, "ROUTE", R(4), dest=("out",))
    b.put(1, 0, 13, "ADD", R(1), IMM(1), dest=R(1))
    # (1,1): multiply
    b.put(1, 1, 4, "ROUTE", ("dir", "w"), dest=R(1))
    b.put(1, 1, 10, "MUL", R(1), ("dir", "s"), dest=("out",))
    # (2,0): edge_end stream
    b.put(2, 0, 0, "SHL", R(1), IMM(2), dest=R(2))
    b.put(2, 0, 1, "ADD", R(2), IMM(a_ee), dest=R(3))
    b.put(2, 0, 2, "LOAD", R(3), dest=R(4))
    b.put(2, 0, 3, "ROUTE", R(4), dest=("out",))
    b.put(2, 0, 13, "ADD", R(1), IMM(1), dest=R(1))
    # (3,0): feature gather
    b.put(3, 0, 4, "SHL", ("dir", "n"), IMM(2 + lgf), dest=R(2))
    b.put(3, 0, 5, "ADD", R(2), IMM(a_f), dest=R(3))
    b.put(3, 0, 6, "LOAD", R(3), dest=R(4))
    b.put(3, 0, 7, "ROUTE", R(4), dest=("out",))
    # f hops (3,0) -> (3,1) -> (2,1) -> (1,1)
    b.put(3, 1, 8, "ROUTE", ("dir", "w"), dest=("out",))
    b.put(2, 1, 9, "ROUTE", ("dir", "s"), dest=("out",))
    return b.program(regions, spm=[], ii=14)


def gather_oracle(program, feature_dim, accumulate=True):
    """Scalar Listing-1 evaluation over the kernel's own arrays: the final
    output region any correct execution must produce."""
    es = program.region("edge_start").words
    ee = program.region("edge_end").words
    w = program.region("weight").words
    f = program.region("feature").words
    out = [0] * len(program.region("output").words)
    for i in range(program.trip_count):
        prod = (w[i] * f[ee[i] * feature_dim]) & MASK32
        idx = es[i] * feature_dim
        if accumulate:
            out[idx] = (out[idx] + prod) & MASK32
        else:
            out[idx] = prod
    return out


def gen_pattern_kernel(spec, length):
    """Single-load-stream kernel issuing exactly the spec'd addresses.

    The address sequence is produced inside the dataflow (multiplicative
    hashing for the irregular kinds), so the traced loads of the one memory
    PE reproduce reference_pattern_addresses(spec, length) bit for bit.
    """
    if spec.kind not in PATTERN_KINDS:
        raise ValueError(f"unknown pattern kind {spec.kind!r}")
    if length < 1:
        raise ValueError("length must be positive")
    addrs = reference_pattern_addresses(spec, length)
    lo = min(addrs)
    hi = max(addrs) + 4
    if spec.base % 128:
        raise ValueError("pattern base must be 128-byte aligned")
    if lo < 0 or hi > 1 << 32:
        raise ValueError("stride walks outside the 32-bit address space")
    lo -= lo % 128
    region = Region("pattern", lo, [0] * ((hi - lo) // 4), owner_row=spec.row)

    rows = max(4, spec.row + 1)
    b = _Builder(rows, 4, trip=length)
    r = spec.row
    seed32 = spec.seed & MASK32
    if spec.kind == "constant":
        b.put(r, 0, 0, "LOAD", IMM(spec.base), dest=R(2))
    elif spec.kind in ("linear", "strided"):
        b.put(r, 0, 0, "MUL", R(1), IMM(spec.stride), dest=R(2))
        b.put(r, 0, 1, "ADD", R(2), IMM(spec.base), dest=R(3))
        b.put(r, 0, 2, "LOAD", R(3), dest=R(4))
        b.put(r, 0, 3, "ADD", R(1), IMM(1), dest=R(1))
    elif spec.kind == "random-uniform":
        k = _lg(spec.range_words, "range_words")
        b.put(r, 0, 0, "ADD", R(1), IMM(seed32), dest=R(2))
        b.put(r, 0, 1, "MUL", R(2), IMM(KNUTH32), dest=R(3))
        b.put(r, 0, 2, "LSHR", R(3), IMM(32 - k), dest=R(4))
        b.put(r, 0, 3, "SHL", R(4), IMM(2), dest=R(5))
        b.put(r, 0, 4, "ADD", R(5), IMM(spec.base), dest=R(6))
        b.put(r, 0, 5, "LOAD", R(6), dest=R(7))
        b.put(r, 0, 6, "ADD", R(1), IMM(1), dest=R(1))
    elif spec.kind == "irregular-step":
        lgstep = _lg(spec.max_step_words, "max_step_words")
        b.put(r, 0, 0, "ADD", R(1), IMM(seed32), dest=R(2))
        b.put(r, 0, 1, "MUL", R(2), IMM(KNUTH32), dest=R(3))
        b.put(r, 0, 2, "LSHR", R(3), IMM(32 - lgstep), dest=R(4))
        b.put(r, 0, 3, "ADD", R(5), R(4), dest=R(5))
        b.put(r, 0, 4, "AND", R(5), IMM(spec.range_words - 1), dest=R(6))
        b.put(r, 0, 5, "SHL", R(6), IMM(2), dest=R(7))
        b.put(r, 0, 6, "ADD", R(7), IMM(spec.base), dest=R(8))
        b.put(r, 0, 7, "LOAD", R(8), dest=R(9))
        b.put(r, 0, 8, "ADD", R(1), IMM(1), dest=R(1))
    else:  # mixed: even iterations walk linearly, odd ones jump randomly
        k = _lg(spec.range_words, "range_words")
        b.put(r, 0, 0, "AND", R(1), IMM(1), dest=R(2))
        b.put(r, 0, 1, "LSHR", R(1), IMM(1), dest=R(3))
        b.put(r, 0, 2, "AND", R(3), IMM(spec.range_words - 1), dest=R(4))
        b.put(r, 0, 3, "ADD", R(1), IMM(seed32), dest=R(5))
        b.put(r, 0, 4, "MUL", R(5), IMM(KNUTH32), dest=R(6))
        b.put(r, 0, 5, "LSHR", R(6), IMM(32 - k), dest=R(7))
        b.put(r, 0, 6, "SELECT", R(2), R(7), R(4), dest=R(8))
        b.put(r, 0, 7, "SHL", R(8), IMM(2), dest=R(9))
        b.put(r, 0, 8, "ADD", R(9), IMM(spec.base), dest=R(10))
        b.put(r, 0, 9, "LOAD", R(10), dest=R(11))
        b.put(r, 0, 10, "ADD", R(1), IMM(1), dest=R(1))
    return b.program([region], spm=[])


def gen_radix_hist_kernel(num_elems, num_buckets, seed, grid=(4, 4),
                          shift=4):
    """Radix-sort histogram step: hist[(a[i] >> shift) & (buckets-1)] += 1.

    The input stream is regular, the histogram updates are data-dependent
    read-modify-writes on another partition's rows.
    """
    rows, cols = grid
    if rows < 3 or cols < 2:
        raise ValueError("radix histogram needs at least a 3x2 grid")
    _lg(num_buckets, "num_buckets")
    rng = SplitMix64(split_seed(seed, 0))
    data = [rng.next_u64() & MASK32 for _ in range(num_elems)]
    a_in, a_h = _layout([num_elems * 4, num_buckets * 4])
    regions = [
        Region("input", a_in, data, owner_row=0),
        Region("hist", a_h, [0] * num_buckets, owner_row=2),
    ]
    b = _Builder(rows, cols, trip=num_elems)
    b.put(0, 0, 0, "SHL", R(1), IMM(2), dest=R(2))
    b.put(0, 0, 1, "ADD", R(2), IMM(a_in), dest=R(3))
    b.put(0, 0, 2, "LOAD", R(3), dest=R(4))
    b.put(0, 0, 3, "ROUTE", R(4), dest=("out",))
    b.put(0, 0, 13, "ADD", R(1), IMM(1), dest=R(1))
    b.put(0, 1, 4, "LSHR", ("dir", "w"), IMM(shift), dest=R(2))
    b.put(0, 1, 5, "AND", R(2), IMM(num_buckets - 1), dest=("out",))
    b.put(1, 1, 6, "ROUTE", ("dir", "n"), dest=("out",))
    b.put(2, 1, 7, "ROUTE", ("dir", "n"), dest=("out",))
    b.put(2, 0, 8, "SHL", ("dir", "e"), IMM(2), dest=R(2))
    b.put(2, 0, 9, "ADD", R(2), IMM(a_h), dest=R(3))
    b.put(2, 0, 10, "LOAD", R(3), dest=R(4))
    b.put(2, 0, 11, "ADD", R(4), IMM(1), dest=R(5))
    b.put(2, 0, 12, "STORE", R(3), R(5))
    return b.program(regions, spm=[], ii=14)


def radix_hist_oracle(program, shift=4):
    data = program.region("input").words
    hist = [0] * len(program.region("hist").words)
    mask = len(hist) - 1
    for i in range(program.trip_count):
        hist[(data[i] >> shift) & mask] = (hist[(data[i] >> shift) & mask] + 1) \
            & MASK32
    return hist


def gen_mixed_partition_kernel(trip, seed, grid=(4, 4), linear_words=4096,
                               random_words=1024):
    """Two-partition workload: a linear stream on partition rows 0-1 and a
    hashed random stream on rows 2-3.  The reconfiguration experiments use
    it because the two partitions want very different cache shapes."""
    rows, cols = grid
    if rows < 3:
        raise ValueError("needs at least 3 rows for two partitions")
    lgl = _lg(linear_words, "linear_words")
    k = _lg(random_words, "random_words")
    a_lin, a_rnd = _layout([linear_words * 4, random_words * 4])
    regions = [
        Region("linear", a_lin, [0] * linear_words, owner_row=0),
        Region("random", a_rnd, [0] * random_words, owner_row=2),
    ]
    seed32 = seed & MASK32
    b = _Builder(rows, cols, trip=trip)
    b.put(0, 0, 0, "AND", R(1), IMM(linear_words - 1), dest=R(2))
    b.put(0, 0, 1, "SHL", R(2), IMM(2), dest=R(3))
    b.put(0, 0, 2, "ADD", R(3), IMM(a_lin), dest=R(4))
    b.put(0, 0, 3, "LOAD", R(4), dest=R(5))
    b.put(0, 0, 6, "ADD", R(1), IMM(1), dest=R(1))
    b.put(2, 0, 0, "ADD", R(1), IMM(seed32), dest=R(2))
    b.put(2, 0, 1, "MUL", R(2), IMM(KNUTH32), dest=R(3))
    b.put(2, 0, 2, "LSHR", R(3), IMM(32 - k), dest=R(4))
    b.put(2, 0, 3, "SHL", R(4), IMM(2), dest=R(5))
    b.put(2, 0, 4, "ADD", R(5), IMM(a_rnd), dest=R(6))
    b.put(2, 0, 5, "LOAD", R(6), dest=R(7))
    b.put(2, 0, 6, "ADD", R(1), IMM(1), dest=R(1))
    return b.program(regions, spm=[], ii=7)


def load_edge_list(text):
    """Tiny edge-list reader: lines of ``src dst weight``."""
    starts, ends, weights = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"edge list line {lineno}: expected src dst weight")
        starts.append(int(parts[0]))
        ends.append(int(parts[1]))
        weights.append(int(parts[2]) & MASK32)
    return starts, ends, weights


def gen_gather_from_edges(starts, ends, weights, seed=0, grid=(4, 4),
                          feature_dim=4, accumulate=True):
    """Gather kernel over an explicit edge list instead of a seeded one."""
    num_nodes = max(starts + ends) + 1
    prog = gen_gather_kernel(len(starts), num_nodes, seed, grid, feature_dim,
                             accumulate)
    prog.region("edge_start").words[:] = [s & MASK32 for s in starts]
    prog.region("edge_end").words[:] = [e & MASK32 for e in ends]
    prog.region("weight").words[:] = list(weights)
    return validate(prog)
