"""Constellation tables: normalization, Gray labeling, round trips."""

import numpy as np
import pytest

from cosetlab.modulation import (
    SCHEME_NAMES,
    bits_to_symbols,
    make_constellation,
    nearest_symbols,
    symbols_to_bits,
)


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_unit_average_energy(name):
    scheme = make_constellation(name)
    assert np.mean(np.abs(scheme.points) ** 2) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "name,order", [("qpsk", 4), ("8psk", 8), ("8qam", 8), ("16qam", 16)]
)
def test_orders(name, order):
    scheme = make_constellation(name)
    assert scheme.order == order
    assert scheme.bits.shape == (order, int(np.log2(order)))


def test_qpsk_points_are_diagonal():
    points = make_constellation("qpsk").points
    expected = {(1 + 1j), (-1 + 1j), (-1 - 1j), (1 - 1j)}
    got = {complex(round(p.real * np.sqrt(2)), round(p.imag * np.sqrt(2))) for p in points}
    assert got == expected


def test_8psk_points_on_unit_circle():
    points = make_constellation("8psk").points
    np.testing.assert_allclose(points, np.exp(2j * np.pi * np.arange(8) / 8), atol=1e-12)


def test_16qam_normalizer_from_grid_enumeration():
    # Independent oracle: enumerate the +-1/+-3 grid and compute its rms.
    grid = np.array([i + 1j * q for i in (-3, -1, 1, 3) for q in (-3, -1, 1, 3)])
    normalizer = np.sqrt(np.mean(np.abs(grid) ** 2))
    assert normalizer == pytest.approx(np.sqrt(10.0), abs=1e-12)
    points = make_constellation("16qam").points
    assert np.max(np.abs(points)) == pytest.approx(np.abs(3 + 3j) / normalizer, abs=1e-12)


def test_8qam_is_two_by_four_grid():
    points = make_constellation("8qam").points * np.sqrt(6.0)
    assert sorted(set(np.round(points.real).astype(int))) == [-3, -1, 1, 3]
    assert sorted(set(np.round(points.imag).astype(int))) == [-1, 1]


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_bit_map_is_bijective(name):
    scheme = make_constellation(name)
    keys = {tuple(row) for row in scheme.bits}
    assert len(keys) == scheme.order


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_nearest_neighbors_differ_in_one_bit(name):
    # Exhaustive check: every minimum-distance pair is a single bit flip.
    scheme = make_constellation(name)
    pts = scheme.points
    dist = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(dist, np.inf)
    dmin = dist.min()
    for i, j in zip(*np.nonzero(np.isclose(dist, dmin, rtol=1e-9))):
        flips = int(np.sum(scheme.bits[i] != scheme.bits[j]))
        assert flips == 1, f"{name}: points {i},{j} differ in {flips} bits"


def test_qpsk_index_sequence_bits():
    scheme = make_constellation("qpsk")
    bits = symbols_to_bits([0, 1, 2, 3], scheme)
    assert bits.shape == (8,)
    np.testing.assert_array_equal(bits.reshape(4, 2), scheme.bits)


@pytest.mark.parametrize("name", SCHEME_NAMES)
def test_bits_round_trip(name):
    scheme = make_constellation(name)
    rng = np.random.default_rng(5)
    symbols = rng.integers(scheme.order, size=100)
    recovered = bits_to_symbols(symbols_to_bits(symbols, scheme), scheme)
    np.testing.assert_array_equal(recovered, symbols)


def test_nearest_symbols_identity_on_clean_points():
    scheme = make_constellation("16qam")
    decided = nearest_symbols(scheme.points, scheme)
    np.testing.assert_array_equal(decided, np.arange(scheme.order))


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        make_constellation("64qam")


def test_out_of_range_symbol_rejected():
    with pytest.raises(ValueError):
        symbols_to_bits([4], make_constellation("qpsk"))
