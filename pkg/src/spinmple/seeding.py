"""Child-seed derivation for schedule-independent replicas."""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix_seed(master: int, index: int) -> int:
    """SplitMix64 finalizer applied to ``master ^ (index * GOLDEN)`` (mod 2^64).

    Frozen: changing this changes every derived data set.
    """
    z = (int(master) ^ (int(index) * GOLDEN)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)
