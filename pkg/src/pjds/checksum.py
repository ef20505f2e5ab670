"""Order-independent 64-bit checksum of float64 vectors.

checksum(v) = sum_i mix(bits(v[i]) xor mix(i)) mod 2**64, where bits is the
IEEE-754 binary64 pattern and mix the splitmix64 finalizer. Addition mod
2**64 commutes, so chunks may be summed in any order; mixing in the index
keeps the checksum sensitive to element positions.
"""

from __future__ import annotations

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def checksum(v, offset: int = 0) -> int:
    """Checksum of ``v`` whose first element sits at global position ``offset``."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    idx = np.arange(offset, offset + v.size, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return int(_mix(v.view(np.uint64) ^ _mix(idx)).sum(dtype=np.uint64))


def combine(*parts: int) -> int:
    return sum(parts) % (1 << 64)


def format_checksum(c: int) -> str:
    return f"{c:016x}"
