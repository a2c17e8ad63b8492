"""SplitMix64: a tiny, platform-independent 64-bit generator.

Used wherever a run must be reproducible bit for bit from an integer seed
(competitor sequences in calibration trials, random test functions).
"""
from __future__ import annotations

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed=0):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self):
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, a, b):
        return a + (b - a) * self.random()

    def uniforms(self, n, a=0.0, b=1.0):
        return [self.uniform(a, b) for _ in range(n)]
