"""Seedable 64-bit PRNG (splitmix64) used for all generated data and traces.

splitmix64 is used instead of random.Random so that every generated kernel,
edge list, and address trace is reproducible from its integer seed by any
implementation of the same well-known algorithm:

    state += 0x9E3779B97F4A7C15              (mod 2^64)
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2^64)
    return z ^ (z >> 31)

Seed splitting for independent sub-streams: child k of seed s is the
(k+1)-th output of splitmix64 seeded with s.
"""

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randrange(self, n):
        """Uniform integer in [0, n). Plain modulo reduction, documented as
        part of the trace-reproducibility contract (bias is irrelevant at the
        ranges used here)."""
        return self.next_u64() % n


def split_seed(seed, k):
    """Child seed k of a master seed (k-th independent sub-stream)."""
    rng = SplitMix64(seed)
    child = 0
    for _ in range(k + 1):
        child = rng.next_u64()
    return child
