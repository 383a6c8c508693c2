"""Sampling-grid geometry shared by the synthesizer, the simulated front end
and the analysis stages."""

from __future__ import annotations

from dataclasses import dataclass, replace

# Fixed offset pattern for the 40:8 wideband configuration.  The first four
# offsets are uniformly spaced, the natural hardware layout, which aliases
# monitored bands eight apart and is why greedy recovery degrades sharply in
# the 4-channel ablation; the remaining four break that ambiguity so the
# full array recovers noise-free scenes exactly.  Any other pattern can be
# passed explicitly.
WIDEBAND_COSETS = (0, 5, 10, 15, 13, 17, 31, 38)

# Offsets for the 8:4 mini configuration (a Sidon-like set in Z_8).
MINI_COSETS = (0, 1, 3, 7)


@dataclass(frozen=True)
class SamplingGrid:
    """Geometry of one monitoring frame.

    The Nyquist-rate frame is complex baseband sampled at ``nyquist_rate``.
    A slot is ``decimation`` consecutive Nyquist samples; each simulated ADC
    takes one sample per slot at its own coset offset.  The spectrum folds
    into ``decimation`` bins of width ``subband_width``; bins
    ``0..n_bands-1`` are the monitored sub-bands, and a narrowband signal
    must fit inside a single bin.
    """

    bandwidth: float
    decimation: int
    cosets: tuple[int, ...]
    n_slots: int
    n_bands: int

    def __post_init__(self):
        object.__setattr__(self, "cosets", tuple(int(c) for c in self.cosets))
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.decimation < 1:
            raise ValueError("decimation must be a positive integer")
        if not 1 <= len(self.cosets) <= self.decimation:
            raise ValueError("need between 1 and decimation coset offsets")
        if len(set(self.cosets)) != len(self.cosets):
            raise ValueError("coset offsets must be distinct")
        if any(not 0 <= c < self.decimation for c in self.cosets):
            raise ValueError("coset offsets must lie in [0, decimation)")
        if not 1 <= self.n_bands <= self.decimation:
            raise ValueError("n_bands must lie in [1, decimation]")
        if self.n_slots < 1:
            raise ValueError("n_slots must be positive")

    @property
    def nyquist_rate(self) -> float:
        return 2.0 * self.bandwidth

    @property
    def nyquist_dt(self) -> float:
        return 1.0 / self.nyquist_rate

    @property
    def n_channels(self) -> int:
        return len(self.cosets)

    @property
    def subband_width(self) -> float:
        """Width of one folding bin; also the per-channel ADC rate."""
        return self.nyquist_rate / self.decimation

    @property
    def frame_len(self) -> int:
        return self.n_slots * self.decimation

    @property
    def frame_duration(self) -> float:
        return self.frame_len * self.nyquist_dt

    def subband_center(self, band: int) -> float:
        """Center frequency of a monitored sub-band, in Hz."""
        if not 0 <= band < self.n_bands:
            raise ValueError(f"band index {band} outside [0, {self.n_bands})")
        return (band + 0.5) * self.subband_width


def wideband_grid() -> SamplingGrid:
    """1 GHz monitored span, 2 GSPS Nyquist, 40:1 decimation, 8 channels,
    16 monitored 50 MHz sub-bands, 0.4 us frames."""
    return SamplingGrid(
        bandwidth=1.0e9,
        decimation=40,
        cosets=WIDEBAND_COSETS,
        n_slots=20,
        n_bands=16,
    )


def mini_grid() -> SamplingGrid:
    """Small normalized grid (4 monitored bands, 8:1 decimation, 4 channels)
    for fast experiments and training runs on a CPU."""
    return SamplingGrid(
        bandwidth=0.5,
        decimation=8,
        cosets=MINI_COSETS,
        n_slots=20,
        n_bands=4,
    )


def nyquist_variant(grid: SamplingGrid) -> SamplingGrid:
    """Same spectrum with one channel per coset: full-rate sampling."""
    return replace(grid, cosets=tuple(range(grid.decimation)))


def keep_channels(grid: SamplingGrid, n_keep: int) -> SamplingGrid:
    """Grid restricted to the first ``n_keep`` cosets (channel ablations)."""
    if not 1 <= n_keep <= grid.n_channels:
        raise ValueError(f"cannot keep {n_keep} of {grid.n_channels} channels")
    return replace(grid, cosets=grid.cosets[:n_keep])
