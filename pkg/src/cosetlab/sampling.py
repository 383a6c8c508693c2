"""Simulated multi-coset sub-Nyquist front end.

Channel ``j`` of the front end takes one sample per slot at Nyquist index
``slot * decimation + cosets[j]``, producing an (n_slots, n_channels)
complex matrix per frame.  `coset_snapshots` moves those samples to the
frequency domain where the exact folding identity

    snapshots = fold_matrix @ subband_spectra(frame)

holds for every frame; it is the correctness theorem the recovery stage
relies on, and the test suite checks it to 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SamplingGrid


@dataclass(frozen=True)
class CosetMatrix:
    """Sub-Nyquist samples of one frame: (n_slots, n_channels) complex."""

    samples: np.ndarray
    grid: SamplingGrid

    def __post_init__(self):
        expect = (self.grid.n_slots, self.grid.n_channels)
        if self.samples.shape != expect:
            raise ValueError(f"coset matrix shape {self.samples.shape} != {expect}")


def multicoset_sample(frame: np.ndarray, grid: SamplingGrid) -> CosetMatrix:
    """Sample a Nyquist-rate frame with the grid's coset pattern."""
    frame = np.asarray(frame)
    if frame.shape != (grid.frame_len,):
        raise ValueError(f"frame length {frame.shape} != {(grid.frame_len,)}")
    slots = frame.reshape(grid.n_slots, grid.decimation)
    return CosetMatrix(samples=slots[:, list(grid.cosets)].copy(), grid=grid)


def drop_channels(x: CosetMatrix, keep: list[int]) -> CosetMatrix:
    """Discard channels, keeping the listed coset offsets (ablations)."""
    if len(keep) == 0:
        raise ValueError("must keep at least one channel")
    cosets = list(x.grid.cosets)
    missing = [c for c in keep if c not in cosets]
    if missing:
        raise ValueError(f"coset offsets {missing} not present in grid")
    cols = [cosets.index(c) for c in keep]
    from dataclasses import replace

    new_grid = replace(x.grid, cosets=tuple(keep))
    return CosetMatrix(samples=x.samples[:, cols].copy(), grid=new_grid)


def fold_matrix(grid: SamplingGrid) -> np.ndarray:
    """Mixing matrix of the folded spectrum: (n_channels, decimation) with
    entry (j, k) = exp(2i pi c_j k / decimation)."""
    c = np.asarray(grid.cosets)[:, None]
    k = np.arange(grid.decimation)[None, :]
    return np.exp(2j * np.pi * c * k / grid.decimation)


def coset_snapshots(x: CosetMatrix) -> np.ndarray:
    """Frequency-domain snapshots: (n_channels, n_slots) matrix equal to
    fold_matrix @ subband_spectra for the originating frame.

    Row j is the slot-rate DFT of channel j with the per-channel fractional
    delay compensated."""
    grid = x.grid
    spectra = np.fft.fft(x.samples, axis=0).T  # (n_channels, n_slots)
    c = np.asarray(grid.cosets)[:, None]
    m = np.arange(grid.n_slots)[None, :]
    phase = np.exp(-2j * np.pi * c * m / grid.frame_len)
    return phase * spectra


def subband_spectra(frame: np.ndarray, grid: SamplingGrid) -> np.ndarray:
    """Reference decomposition (the DFT oracle): row k holds the n_slots
    DFT coefficients of sub-band k's content, scaled to match
    `coset_snapshots`."""
    frame = np.asarray(frame)
    if frame.shape != (grid.frame_len,):
        raise ValueError("frame length mismatch")
    spec = np.fft.fft(frame)
    return spec.reshape(grid.decimation, grid.n_slots) / grid.decimation


def slot_signals(spectra_rows: np.ndarray) -> np.ndarray:
    """Slot-rate time signals of sub-band spectral rows (inverse DFT)."""
    return np.fft.ifft(spectra_rows, axis=-1)
