"""Deterministic 64-bit seed derivation for parallel-safe repetitions.

Child seeds are produced with a splitmix64 step so that repetition k of a
run with master seed s always sees the same stream, independent of how
repetitions are scheduled.
"""

MASK64 = (1 << 64) - 1

# splitmix64 constants (Steele, Lea, Flood 2014).
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One splitmix64 output step on a 64-bit state."""
    x = (x + _GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def child_seed(master: int, index: int) -> int:
    """Seed for the index-th independent substream of a master seed."""
    return splitmix64((master & MASK64) ^ splitmix64(index & MASK64))
