"""Counter-based deterministic random number generator.

The kernel never touches ``random`` or numpy's global state. Every stochastic
decision flows through a :class:`DetRng` so that a session seed fully
determines the trajectory, and the generator state can be folded into state
digests. The core is splitmix64: the state is a plain 64-bit counter advanced
by a fixed odd gamma, and each output is a bijective mix of the counter, so
streams can be split cheaply without correlation.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def stable_hash(text: str) -> int:
    """64-bit FNV-1a of ``text``; stable across runs and platforms."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


class DetRng:
    """Deterministic splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = _mix(seed & MASK64)

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def choice(self, seq):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def substream(self, label: str) -> "DetRng":
        """Child stream keyed by ``label`` and this stream's position.

        Advances this stream by one draw, so repeated calls with the same
        label yield distinct substreams.
        """
        child = DetRng.__new__(DetRng)
        child.state = _mix(self.next_u64() ^ stable_hash(label))
        return child
