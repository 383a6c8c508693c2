"""Frame synthesis: pulse shapes, OFDM structure, SNR bookkeeping,
spectral confinement, and generator determinism."""

import numpy as np
import pytest

from cosetlab.grid import wideband_grid
from cosetlab.modulation import make_constellation
from cosetlab.scene import (
    NarrowbandSpec,
    Ofdm,
    SceneSpec,
    SingleCarrier,
    amplitude_for_snr,
    multiband_snr_db,
    n_symbols,
    noise_realization,
    random_scene,
    scene_seed,
    srrc_pulse,
    symbol_waveforms,
    synth_band,
    synth_ofdm,
    synth_scene,
    synth_single_carrier,
    unit_band_power,
)


def _sc(rate=20e6, rolloff=0.25):
    return SingleCarrier(symbol_rate=rate, rolloff=rolloff)


def _band(grid, band_index=0, waveform=None, modulation="qpsk", amplitude=1.0,
          snr_db=10.0, symbols=None, seed=0):
    waveform = waveform or _sc()
    if symbols is None:
        rng = np.random.default_rng(seed)
        order = make_constellation(modulation).order
        symbols = tuple(int(s) for s in rng.integers(order, size=n_symbols(waveform, grid)))
    return NarrowbandSpec(band_index, waveform, modulation, symbols, amplitude, snr_db)


class TestSymbolCounts:
    def test_wideband_single_carrier_counts(self, wb_grid):
        # 16 MHz and 20 MHz on the 0.4 us frame
        assert wb_grid.subband_width == pytest.approx(50e6)
        assert n_symbols(_sc(16e6), wb_grid) == 6
        assert n_symbols(_sc(20e6), wb_grid) == 8

    def test_wideband_ofdm_counts(self, wb_grid):
        assert n_symbols(Ofdm(8, 2e6), wb_grid) == 8
        assert n_symbols(Ofdm(10, 2e6), wb_grid) == 10

    def test_symbol_rate_above_subband_rejected(self, wb_grid):
        with pytest.raises(ValueError):
            n_symbols(_sc(60e6), wb_grid)

    def test_counts_fit_in_slots(self, wb_grid, small_grid):
        for grid in (wb_grid, small_grid):
            for waveform in (_sc(0.32 * grid.subband_width), Ofdm(10, 0.04 * grid.subband_width)):
                assert n_symbols(waveform, grid) <= grid.n_slots


class TestSingleCarrier:
    def test_zero_symbols_zero_frame(self, wb_grid):
        band = _band(wb_grid, waveform=_sc(), symbols=())
        with pytest.raises(ValueError):
            synth_single_carrier(band, wb_grid)  # count mismatch is an error

    def test_single_pulse_matches_closed_form(self, wb_grid):
        # One unit symbol away from the frame edges: its waveform is the
        # carrier-shifted SRRC pulse, up to the sub-band projection.  The
        # oracle evaluates the closed form directly and checks the
        # matched-filter peak is 1.
        grid = wb_grid
        waveform = _sc(20e6, 0.25)
        sps = 1.0 / (waveform.symbol_rate * grid.nyquist_dt)
        rows = symbol_waveforms(waveform, 0, grid)
        n_symb = rows.shape[0]
        mid = n_symb // 2

        t = np.arange(grid.frame_len)
        start = (grid.frame_len - (n_symb - 1) * sps) / 2.0
        tau = (t - (start + mid * sps)) / sps
        oracle = srrc_pulse(tau, 0.25)
        oracle[np.abs(tau) > 4.0] = 0.0
        oracle = oracle * np.exp(2j * np.pi * (0.5 / grid.decimation) * t)

        synthesized = rows[mid]
        # matched-filter peak against the raw closed-form pulse
        peak = np.vdot(oracle, synthesized) / np.vdot(oracle, oracle)
        assert peak.real == pytest.approx(1.0, abs=2e-3)
        assert abs(peak.imag) < 2e-3
        # projection only sheds the tiny out-of-band tail
        rel = np.linalg.norm(synthesized - oracle) / np.linalg.norm(oracle)
        assert rel < 0.02

    def test_wrong_waveform_type_rejected(self, wb_grid):
        band = _band(wb_grid, waveform=Ofdm(8, 2e6))
        with pytest.raises(TypeError):
            synth_single_carrier(band, wb_grid)


class TestOfdm:
    def test_single_subcarrier_is_pure_tone(self, wb_grid):
        waveform = Ofdm(1, 2e6)
        band = NarrowbandSpec(3, waveform, "qpsk", (0,) * n_symbols(waveform, wb_grid), 1.0, 0.0)
        frame = synth_ofdm(band, wb_grid)
        spectrum = np.abs(np.fft.fft(frame))
        assert np.count_nonzero(spectrum > 1e-6 * spectrum.max()) == 1

    def test_block_dft_recovers_symbols(self, wb_grid):
        # Oracle: correlate each block with each subcarrier tone.
        grid = wb_grid
        waveform = Ofdm(10, 2e6)
        scheme = make_constellation("16qam")
        rng = np.random.default_rng(7)
        symbols = tuple(int(s) for s in rng.integers(16, size=n_symbols(waveform, grid)))
        band = NarrowbandSpec(5, waveform, "16qam", symbols, 1.0, 0.0)
        frame = synth_ofdm(band, grid)

        block = grid.frame_len  # nominal 2 MHz block outlasts the frame
        t = np.arange(block)
        carrier = (5 + 0.5) / grid.decimation
        recovered = []
        for sub in range(10):
            f = carrier + (sub - 5) / block
            tone = np.exp(2j * np.pi * f * t)
            recovered.append(np.vdot(tone, frame) / block)
        np.testing.assert_allclose(np.array(recovered), scheme.points[list(symbols)], atol=1e-9)

    def test_too_wide_rejected(self, wb_grid):
        waveform = Ofdm(30, 2e6)
        band = NarrowbandSpec(0, waveform, "qpsk", (0,) * n_symbols(waveform, wb_grid), 1.0, 0.0)
        with pytest.raises(ValueError):
            synth_ofdm(band, wb_grid)


class TestSceneAssembly:
    def test_empty_scene_zero_frame(self, wb_grid):
        scene = SceneSpec(wb_grid, (), noise_power=0.0, rng_seed=1)
        np.testing.assert_array_equal(synth_scene(scene), np.zeros(wb_grid.frame_len))

    def test_duplicate_bands_rejected(self, wb_grid):
        b = _band(wb_grid, band_index=2)
        with pytest.raises(ValueError):
            SceneSpec(wb_grid, (b, b), noise_power=1.0, rng_seed=1)

    def test_deterministic(self, wb_grid):
        scene = random_scene(wb_grid, rng_seed=99)
        np.testing.assert_array_equal(synth_scene(scene), synth_scene(scene))

    def test_snr_realized_within_quarter_db(self, wb_grid):
        # Monte-Carlo estimate of signal power over realized noise power.
        band = _band(wb_grid, band_index=4, snr_db=10.0, amplitude=1.0)
        amp = amplitude_for_snr(band, wb_grid, noise_power=1.0)
        band = NarrowbandSpec(4, band.waveform, band.modulation, band.symbols, amp, 10.0)
        signal_power = np.mean(np.abs(synth_band(band, wb_grid)) ** 2)
        noise_powers = []
        for draw in range(100):
            scene = SceneSpec(wb_grid, (band,), noise_power=1.0, rng_seed=draw)
            noise_powers.append(np.mean(np.abs(noise_realization(scene)) ** 2))
        measured = 10 * np.log10(signal_power / np.mean(noise_powers))
        assert measured == pytest.approx(10.0, abs=0.25)

    def test_energy_bookkeeping(self, wb_grid):
        # Total power splits into per-band powers plus noise within 1%.
        scene = random_scene(wb_grid, rng_seed=123)
        per_band = sum(
            np.mean(np.abs(synth_band(b, wb_grid)) ** 2) for b in scene.bands
        )
        totals = []
        for draw in range(200):
            shifted = SceneSpec(wb_grid, scene.bands, 1.0, rng_seed=draw)
            totals.append(np.mean(np.abs(synth_scene(shifted)) ** 2))
        assert np.mean(totals) == pytest.approx(per_band + 1.0, rel=0.01)

    def test_multiband_snr_consistent(self, wb_grid):
        scene = random_scene(wb_grid, rng_seed=321)
        total = sum(b.amplitude**2 * unit_band_power(b, wb_grid) for b in scene.bands)
        assert multiband_snr_db(scene) == pytest.approx(10 * np.log10(total))


class TestSpectralConfinement:
    @pytest.mark.parametrize(
        "waveform",
        [
            SingleCarrier(16e6, 0.05),
            SingleCarrier(16e6, 0.25),
            SingleCarrier(20e6, 0.05),
            SingleCarrier(20e6, 0.25),
            Ofdm(8, 2e6),
            Ofdm(10, 2e6),
        ],
    )
    def test_energy_inside_assigned_subband(self, wb_grid, waveform):
        grid = wb_grid
        band = _band(grid, band_index=7, waveform=waveform, modulation="16qam", seed=3)
        frame = synth_band(band, grid)
        spectrum = np.abs(np.fft.fft(frame)) ** 2
        lo = 7 * grid.n_slots
        inside = spectrum[lo : lo + grid.n_slots].sum()
        assert inside / spectrum.sum() > 0.99


class TestRandomScene:
    def test_same_seed_identical(self, wb_grid):
        assert random_scene(wb_grid, 42) == random_scene(wb_grid, 42)

    def test_occupancy_uniform_over_one_two(self, wb_grid):
        # Binomial test at 3 sigma over 10^4 draws.
        n = 10_000
        twos = sum(
            len(random_scene(wb_grid, scene_seed(9, i)).bands) == 2 for i in range(n)
        )
        sigma = np.sqrt(n * 0.25)
        assert abs(twos - n / 2) < 3 * sigma

    def test_menu_matches_wideband_figures(self, wb_grid):
        rates, rolloffs, subcarriers, mods = set(), set(), set(), set()
        for i in range(300):
            scene = random_scene(wb_grid, scene_seed(17, i))
            for band in scene.bands:
                mods.add(band.modulation)
                if isinstance(band.waveform, SingleCarrier):
                    rates.add(band.waveform.symbol_rate)
                    rolloffs.add(band.waveform.rolloff)
                else:
                    subcarriers.add(band.waveform.n_subcarriers)
                    assert band.waveform.subcarrier_spacing == pytest.approx(2e6)
                assert -5.0 <= band.snr_db <= 10.0
        assert rates == {16e6, 20e6}
        assert rolloffs == {0.05, 0.25}
        assert subcarriers == {8, 10}
        assert mods == {"qpsk", "8psk", "8qam", "16qam"}

    def test_carriers_on_original_reference_grid(self, wb_grid):
        # Shifted back to the published reference (monitored span starting
        # at 25 MHz), sub-band centers are 50..800 MHz in 50 MHz steps.
        centers = np.array(
            [wb_grid.subband_center(k) for k in range(wb_grid.n_bands)]
        )
        np.testing.assert_allclose(centers + 25e6, 50e6 * np.arange(1, 17))

    def test_snr_respected_by_amplitude(self, wb_grid):
        scene = random_scene(wb_grid, 1001)
        for band in scene.bands:
            realized = 10 * np.log10(
                band.amplitude**2 * unit_band_power(band, wb_grid) / scene.noise_power
            )
            assert realized == pytest.approx(band.snr_db, abs=0.1)
