"""Counter-based per-packet random streams (splitmix64).

Each photon packet gets its own stream keyed by (seed, packet_index), so
results do not depend on execution order or worker count. The compiled
kernel implements the identical sequence in C; this module is the
reference (and the fallback engine's RNG).

Stream definition, all arithmetic mod 2^64:

    state0 = mix64(seed ^ mix64((index + 1) * 0xD1B54A32D192ED03))
    next:    state += 0x9E3779B97F4A7C15; output mix64(state)

where mix64 is the splitmix64 finalizer. Doubles are taken from the top
53 bits: ``(x >> 11) * 2^-53`` for [0, 1) and ``((x >> 11) + 1) * 2^-53``
for (0, 1] (safe for log).
"""

from __future__ import annotations

_M64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_STREAM_KEY = 0xD1B54A32D192ED03
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    z &= _M64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _M64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _M64
    z ^= z >> 31
    return z


class PacketStream:
    """Random stream for one photon packet."""

    __slots__ = ("state",)

    def __init__(self, seed: int, index: int):
        self.state = mix64((seed & _M64) ^ mix64(((index + 1) * _STREAM_KEY) & _M64))

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & _M64
        return mix64(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_open(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * _INV_2_53
