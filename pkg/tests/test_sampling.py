"""Front-end simulation: the exact folding identity and its corollaries."""

import numpy as np
import pytest

from cosetlab.grid import SamplingGrid, nyquist_variant, wideband_grid
from cosetlab.sampling import (
    CosetMatrix,
    coset_snapshots,
    drop_channels,
    fold_matrix,
    multicoset_sample,
    slot_signals,
    subband_spectra,
)
from cosetlab.scene import NarrowbandSpec, Ofdm, n_symbols, synth_band

from conftest import random_frame


def test_wideband_grid_matches_published_rates(wb_grid):
    assert wb_grid.nyquist_rate == pytest.approx(2e9)   # 2 GSPS
    assert wb_grid.subband_width == pytest.approx(50e6)  # 50 MSPS per ADC
    assert wb_grid.decimation == 40
    assert wb_grid.n_channels == 8
    assert wb_grid.frame_duration == pytest.approx(0.4e-6)


def test_nyquist_special_case_flattens_to_frame(wb_grid, rng):
    grid = nyquist_variant(wb_grid)
    frame = random_frame(grid, rng)
    x = multicoset_sample(frame, grid)
    np.testing.assert_array_equal(x.samples.reshape(-1), frame)


def test_impulse_lands_in_the_right_cell(wb_grid, rng):
    frame = np.zeros(wb_grid.frame_len, dtype=complex)
    frame[wb_grid.cosets[1]] = 1.0
    x = multicoset_sample(frame, wb_grid)
    expected = np.zeros_like(x.samples)
    expected[0, 1] = 1.0
    np.testing.assert_array_equal(x.samples, expected)


def test_sampling_is_linear(wb_grid, rng):
    f = random_frame(wb_grid, rng)
    g = random_frame(wb_grid, rng)
    a, b = 2.5 - 1j, -0.25 + 3j
    lhs = multicoset_sample(a * f + b * g, wb_grid).samples
    rhs = a * multicoset_sample(f, wb_grid).samples + b * multicoset_sample(g, wb_grid).samples
    np.testing.assert_array_equal(lhs, rhs)


def test_energy_identity_exact(wb_grid, rng):
    frame = random_frame(wb_grid, rng)
    x = multicoset_sample(frame, wb_grid)
    sampled = frame.reshape(wb_grid.n_slots, wb_grid.decimation)[:, list(wb_grid.cosets)]
    assert np.sum(np.abs(x.samples) ** 2) == np.sum(np.abs(sampled) ** 2)


def test_folding_identity_on_random_frames(wb_grid, rng):
    mixing = fold_matrix(wb_grid)
    for _ in range(25):
        frame = random_frame(wb_grid, rng)
        snapshots = coset_snapshots(multicoset_sample(frame, wb_grid))
        reference = mixing @ subband_spectra(frame, wb_grid)
        err = np.linalg.norm(snapshots - reference) / np.linalg.norm(snapshots)
        assert err < 1e-9


def test_zero_input_zero_snapshots(wb_grid):
    x = multicoset_sample(np.zeros(wb_grid.frame_len, dtype=complex), wb_grid)
    np.testing.assert_array_equal(coset_snapshots(x), 0)


def test_frame_length_mismatch_rejected(wb_grid):
    with pytest.raises(ValueError):
        multicoset_sample(np.zeros(17, dtype=complex), wb_grid)


class TestDropChannels:
    def test_keep_all_is_identity(self, wb_grid, rng):
        x = multicoset_sample(random_frame(wb_grid, rng), wb_grid)
        kept = drop_channels(x, list(wb_grid.cosets))
        np.testing.assert_array_equal(kept.samples, x.samples)
        assert kept.grid == x.grid

    def test_drop_equals_sampling_with_reduced_pattern(self, wb_grid, rng):
        frame = random_frame(wb_grid, rng)
        keep = list(wb_grid.cosets[:4])
        dropped = drop_channels(multicoset_sample(frame, wb_grid), keep)
        from dataclasses import replace

        reduced = replace(wb_grid, cosets=tuple(keep))
        direct = multicoset_sample(frame, reduced)
        np.testing.assert_array_equal(dropped.samples, direct.samples)
        assert dropped.grid == direct.grid

    def test_empty_keep_rejected(self, wb_grid, rng):
        x = multicoset_sample(random_frame(wb_grid, rng), wb_grid)
        with pytest.raises(ValueError):
            drop_channels(x, [])

    def test_unknown_coset_rejected(self, wb_grid, rng):
        x = multicoset_sample(random_frame(wb_grid, rng), wb_grid)
        with pytest.raises(ValueError):
            drop_channels(x, [1])  # 1 is not one of the wideband offsets


class TestFullRankInversion:
    def test_tone_confined_to_its_row(self, wb_grid):
        # Full sampling: direct inversion localizes a band signal to its row.
        grid = nyquist_variant(wb_grid)
        waveform = Ofdm(1, 2e6)
        band = NarrowbandSpec(6, waveform, "qpsk", (2,) * n_symbols(waveform, grid), 1.0, 0.0)
        frame = synth_band(band, grid)
        snapshots = coset_snapshots(multicoset_sample(frame, grid))
        recovered = np.linalg.solve(fold_matrix(grid), snapshots)
        energy = np.sum(np.abs(recovered) ** 2, axis=1)
        assert energy[6] > 0
        others = np.delete(energy, 6)
        assert others.max() < 1e-18 * energy[6]

    def test_inversion_matches_dft_oracle(self, wb_grid, rng):
        grid = nyquist_variant(wb_grid)
        frame = random_frame(grid, rng)
        snapshots = coset_snapshots(multicoset_sample(frame, grid))
        recovered = np.linalg.solve(fold_matrix(grid), snapshots)
        reference = subband_spectra(frame, grid)
        err = np.linalg.norm(recovered - reference) / np.linalg.norm(reference)
        assert err < 1e-9


def test_slot_signals_consistent_with_spectra(wb_grid, rng):
    frame = random_frame(wb_grid, rng)
    spectra = subband_spectra(frame, wb_grid)
    signals = slot_signals(spectra)
    np.testing.assert_allclose(np.fft.fft(signals, axis=-1), spectra, atol=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        SamplingGrid(bandwidth=1.0, decimation=8, cosets=(0, 0), n_slots=4, n_bands=4)
    with pytest.raises(ValueError):
        SamplingGrid(bandwidth=1.0, decimation=8, cosets=(0, 9), n_slots=4, n_bands=4)
    with pytest.raises(ValueError):
        SamplingGrid(bandwidth=1.0, decimation=8, cosets=(0, 1), n_slots=4, n_bands=9)
    with pytest.raises(ValueError):
        SamplingGrid(bandwidth=-1.0, decimation=8, cosets=(0,), n_slots=4, n_bands=4)
