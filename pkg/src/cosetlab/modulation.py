"""Constellations with Gray bit labeling.

All constellations are normalized to unit average symbol energy.  The same
tables drive the waveform generators, the classical minimum-distance
receiver and the per-modulation demodulation heads of the network, so the
bit maps live here and nowhere else.

Conventions:
  - qpsk : 4-PSK at 45/135/225/315 degrees.
  - 8psk : uniform 8-PSK starting at angle 0.
  - 8qam : rectangular 2x4 grid, in-phase levels {-3,-1,1,3}, quadrature
           levels {-1,1}, normalized by sqrt(6).
  - 16qam: square grid {-3,-1,1,3}^2 normalized by sqrt(10).

Labels are Gray per axis (per angle for PSK), so nearest-neighbor symbol
errors flip a single bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SCHEME_NAMES = ("qpsk", "8psk", "8qam", "16qam")


@dataclass(frozen=True)
class ModulationScheme:
    name: str
    points: np.ndarray  # (M,) complex, unit average energy
    bits: np.ndarray    # (M, log2 M) uint8, Gray labeling

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return self.bits.shape[1]


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _gray_bits(k: int, width: int) -> list[int]:
    g = _gray(k)
    return [(g >> (width - 1 - i)) & 1 for i in range(width)]


def _normalize(points: np.ndarray) -> np.ndarray:
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


@lru_cache(maxsize=None)
def make_constellation(name: str) -> ModulationScheme:
    """Constellation table for one of qpsk/8psk/8qam/16qam."""
    if name == "qpsk":
        points = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
        bits = [_gray_bits(k, 2) for k in range(4)]
    elif name == "8psk":
        points = np.exp(2j * np.pi * np.arange(8) / 8)
        bits = [_gray_bits(k, 3) for k in range(8)]
    elif name == "8qam":
        levels_i = np.array([-3.0, -1.0, 1.0, 3.0])
        levels_q = np.array([-1.0, 1.0])
        points = np.array([i + 1j * q for q in levels_q for i in levels_i])
        bits = [
            _gray_bits(qi, 1) + _gray_bits(ii, 2)
            for qi in range(2)
            for ii in range(4)
        ]
    elif name == "16qam":
        levels = np.array([-3.0, -1.0, 1.0, 3.0])
        points = np.array([i + 1j * q for q in levels for i in levels])
        bits = [
            _gray_bits(qi, 2) + _gray_bits(ii, 2)
            for qi in range(4)
            for ii in range(4)
        ]
    else:
        raise ValueError(f"unknown modulation scheme {name!r}")
    points = _normalize(np.asarray(points, dtype=complex))
    points.flags.writeable = False
    bit_arr = np.asarray(bits, dtype=np.uint8)
    bit_arr.flags.writeable = False
    return ModulationScheme(name=name, points=points, bits=bit_arr)


def max_order() -> int:
    return max(make_constellation(n).order for n in SCHEME_NAMES)


def symbols_to_bits(indices, scheme: ModulationScheme) -> np.ndarray:
    """Concatenated Gray bits of a symbol-index sequence."""
    idx = np.asarray(indices, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= scheme.order):
        raise ValueError("symbol index outside constellation")
    return scheme.bits[idx].reshape(-1)


def bits_to_symbols(bits, scheme: ModulationScheme) -> np.ndarray:
    """Inverse of symbols_to_bits; bit count must be a multiple of
    bits_per_symbol."""
    b = np.asarray(bits, dtype=np.uint8).reshape(-1, scheme.bits_per_symbol)
    weights = 1 << np.arange(scheme.bits_per_symbol - 1, -1, -1)
    keys = (scheme.bits * weights).sum(axis=1)
    lookup = np.empty(scheme.order, dtype=int)
    lookup[keys] = np.arange(scheme.order)
    return lookup[(b * weights).sum(axis=1)]


def nearest_symbols(values, scheme: ModulationScheme) -> np.ndarray:
    """Minimum-Euclidean-distance decisions against the unit constellation."""
    v = np.asarray(values, dtype=complex).reshape(-1)
    d = np.abs(v[:, None] - scheme.points[None, :])
    return np.argmin(d, axis=1)
