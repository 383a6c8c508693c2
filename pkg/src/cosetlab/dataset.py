"""Binary dataset container.

Layout (all integers little-endian, complex samples interleaved 32-bit
little-endian floats, real part first):

    magic "SUMS" | u16 version
    grid header: f64 bandwidth | u32 decimation | u32 n_channels
                 | u32 * n_channels cosets | u32 n_slots | u32 n_bands
    u64 frame count | u64 generator seed | f64 snr_lo | f64 snr_hi
    frames: u32 payload length, then payload:
        u64 scene seed | f64 noise power | u8 occupied-band count
        per band: u8 band index | u8 waveform tag (0 = single carrier,
                  1 = OFDM) | waveform fields (f64 symbol rate, f64 rolloff
                  | u16 subcarriers, f64 spacing) | u8 modulation index
                  | f64 amplitude | f64 snr_db | u16 symbol count
                  | u16 * count symbol indices
        u8 has_nyquist [ | frame_len complex64 Nyquist frame ]
        n_slots * n_channels complex64 coset matrix, row-major

Frames are regenerable from their scene record alone; the stored coset
matrix equals the float32 cast of multicoset_sample(synth_scene(scene)),
so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .grid import SamplingGrid
from .modulation import SCHEME_NAMES
from .sampling import CosetMatrix, multicoset_sample
from .scene import NarrowbandSpec, Ofdm, SceneSpec, SingleCarrier, random_scene, scene_seed, synth_scene

MAGIC = b"SUMS"
VERSION = 1

_SC_TAG, _OFDM_TAG = 0, 1


@dataclass(frozen=True)
class FrameRecord:
    scene: SceneSpec
    coset: CosetMatrix
    nyquist: np.ndarray | None = None


@dataclass(frozen=True)
class DatasetMeta:
    seed: int
    snr_range: tuple[float, float]
    store_nyquist: bool


def _complex_bytes(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype=np.complex64).tobytes()


def _read_complex(buf: memoryview, offset: int, count: int) -> tuple[np.ndarray, int]:
    nbytes = 8 * count
    arr = np.frombuffer(buf[offset : offset + nbytes], dtype=np.complex64).copy()
    return arr, offset + nbytes


def _pack_scene(scene: SceneSpec) -> bytes:
    parts = [struct.pack("<Qd B", scene.rng_seed, scene.noise_power, len(scene.bands))]
    for band in scene.bands:
        parts.append(struct.pack("<B", band.band_index))
        if isinstance(band.waveform, SingleCarrier):
            parts.append(struct.pack("<Bdd", _SC_TAG, band.waveform.symbol_rate, band.waveform.rolloff))
        elif isinstance(band.waveform, Ofdm):
            parts.append(
                struct.pack("<BHd", _OFDM_TAG, band.waveform.n_subcarriers, band.waveform.subcarrier_spacing)
            )
        else:
            raise TypeError(f"unknown waveform {band.waveform!r}")
        parts.append(
            struct.pack(
                "<BddH",
                SCHEME_NAMES.index(band.modulation),
                band.amplitude,
                band.snr_db,
                len(band.symbols),
            )
        )
        parts.append(struct.pack(f"<{len(band.symbols)}H", *band.symbols))
    return b"".join(parts)


def _unpack_scene(buf: memoryview, offset: int, grid: SamplingGrid) -> tuple[SceneSpec, int]:
    rng_seed, noise_power, n_bands = struct.unpack_from("<QdB", buf, offset)
    offset += struct.calcsize("<QdB")
    bands = []
    for _ in range(n_bands):
        (band_index, tag) = struct.unpack_from("<BB", buf, offset)
        offset += 2
        if tag == _SC_TAG:
            rate, rolloff = struct.unpack_from("<dd", buf, offset)
            offset += 16
            waveform: SingleCarrier | Ofdm = SingleCarrier(rate, rolloff)
        elif tag == _OFDM_TAG:
            n_sub, spacing = struct.unpack_from("<Hd", buf, offset)
            offset += struct.calcsize("<Hd")
            waveform = Ofdm(n_sub, spacing)
        else:
            raise ValueError(f"unknown waveform tag {tag}")
        mod_index, amplitude, snr_db, n_symb = struct.unpack_from("<BddH", buf, offset)
        offset += struct.calcsize("<BddH")
        symbols = struct.unpack_from(f"<{n_symb}H", buf, offset)
        offset += 2 * n_symb
        bands.append(
            NarrowbandSpec(
                band_index=band_index,
                waveform=waveform,
                modulation=SCHEME_NAMES[mod_index],
                symbols=tuple(int(s) for s in symbols),
                amplitude=amplitude,
                snr_db=snr_db,
            )
        )
    return SceneSpec(grid=grid, bands=tuple(bands), noise_power=noise_power, rng_seed=rng_seed), offset


def write_dataset(path, grid: SamplingGrid, records: list[FrameRecord], meta: DatasetMeta):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<dII", grid.bandwidth, grid.decimation, grid.n_channels))
        fh.write(struct.pack(f"<{grid.n_channels}I", *grid.cosets))
        fh.write(struct.pack("<II", grid.n_slots, grid.n_bands))
        fh.write(
            struct.pack(
                "<QQdd", len(records), meta.seed, meta.snr_range[0], meta.snr_range[1]
            )
        )
        for record in records:
            payload = [_pack_scene(record.scene)]
            if record.nyquist is not None:
                payload.append(struct.pack("<B", 1))
                payload.append(_complex_bytes(record.nyquist))
            else:
                payload.append(struct.pack("<B", 0))
            payload.append(_complex_bytes(record.coset.samples))
            blob = b"".join(payload)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


def read_dataset(path) -> tuple[SamplingGrid, list[FrameRecord], DatasetMeta]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError("not a dataset file (bad magic)")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    offset = 6
    bandwidth, decimation, n_channels = struct.unpack_from("<dII", raw, offset)
    offset += struct.calcsize("<dII")
    cosets = struct.unpack_from(f"<{n_channels}I", raw, offset)
    offset += 4 * n_channels
    n_slots, n_bands = struct.unpack_from("<II", raw, offset)
    offset += 8
    count, seed, snr_lo, snr_hi = struct.unpack_from("<QQdd", raw, offset)
    offset += struct.calcsize("<QQdd")
    grid = SamplingGrid(
        bandwidth=bandwidth,
        decimation=decimation,
        cosets=tuple(int(c) for c in cosets),
        n_slots=n_slots,
        n_bands=n_bands,
    )

    buf = memoryview(raw)
    records = []
    store_nyquist = False
    for _ in range(count):
        (length,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        end = offset + length
        scene, offset = _unpack_scene(buf, offset, grid)
        (has_nyquist,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        nyquist = None
        if has_nyquist:
            nyquist, offset = _read_complex(buf, offset, grid.frame_len)
            store_nyquist = True
        flat, offset = _read_complex(buf, offset, grid.frame_len // grid.decimation * grid.n_channels)
        if offset != end:
            raise ValueError("corrupt frame record (length mismatch)")
        coset = CosetMatrix(flat.reshape(grid.n_slots, grid.n_channels), grid)
        records.append(FrameRecord(scene=scene, coset=coset, nyquist=nyquist))
    meta = DatasetMeta(seed=seed, snr_range=(snr_lo, snr_hi), store_nyquist=store_nyquist)
    return grid, records, meta


def make_record(scene: SceneSpec, store_nyquist: bool = False) -> FrameRecord:
    """Synthesize, sample, and cast to the stored float32 precision so that
    regeneration from the scene is bit-exact against the stored samples."""
    frame = synth_scene(scene)
    coset = multicoset_sample(frame, scene.grid)
    return FrameRecord(
        scene=scene,
        coset=CosetMatrix(coset.samples.astype(np.complex64), scene.grid),
        nyquist=frame.astype(np.complex64) if store_nyquist else None,
    )


def build_dataset(
    path,
    grid: SamplingGrid,
    count: int,
    seed: int,
    snr_range: tuple[float, float] = (-5.0, 10.0),
    noise_power: float = 1.0,
    store_nyquist: bool = False,
) -> DatasetMeta:
    """Generate and persist a dataset; frames are independently seeded from
    (seed, index), so any subset or ordering regenerates identically."""
    if count < 1:
        raise ValueError("dataset needs at least one frame")
    records = []
    for index in range(count):
        scene = random_scene(
            grid, scene_seed(seed, index), snr_range=snr_range, noise_power=noise_power
        )
        records.append(make_record(scene, store_nyquist=store_nyquist))
    meta = DatasetMeta(seed=seed, snr_range=snr_range, store_nyquist=store_nyquist)
    write_dataset(path, grid, records, meta)
    return meta
