"""Model checkpoint format.

    magic "SUMW" | u16 version | u32 record count
    record: u16 name length | UTF-8 name | u8 rank | u32 * rank dims
            | 32-bit little-endian float payload

Model hyper-parameters ride along as scalar records under ``config.*``
names (integers stored exactly in float32), so a checkpoint is
self-contained: `load_model` rebuilds the architecture and then loads the
weights."""

from __future__ import annotations

import struct

import numpy as np
import torch

from .network import ModelConfig, SignalAnalyzer

MAGIC = b"SUMW"
VERSION = 1

_CONFIG_FIELDS = (
    "d_model",
    "n_heads",
    "d_ff",
    "n_layers_sense",
    "n_layers_demod",
    "n_slots",
    "n_channels",
    "n_bands",
    "n_mods",
)


def _write_record(fh, name: str, values: np.ndarray):
    data = np.ascontiguousarray(values, dtype="<f4")
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<B", data.ndim))
    fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
    fh.write(data.tobytes())


def save_model(path, model: SignalAnalyzer):
    state = model.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(_CONFIG_FIELDS) + len(state)))
        for field in _CONFIG_FIELDS:
            _write_record(fh, f"config.{field}", np.asarray(getattr(model.config, field)))
        for name, tensor in state.items():
            _write_record(fh, name, tensor.detach().cpu().numpy())


def _read_records(raw: bytes) -> dict[str, np.ndarray]:
    if raw[:4] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (count,) = struct.unpack_from("<I", raw, 6)
    offset = 10
    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", raw, offset)
        offset += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        values = np.frombuffer(raw, dtype="<f4", count=size, offset=offset).copy()
        offset += 4 * size
        records[name] = values.reshape(dims) if rank else values.reshape(())
    return records


def load_model(path) -> SignalAnalyzer:
    with open(path, "rb") as fh:
        records = _read_records(fh.read())
    config_values = {}
    for field in _CONFIG_FIELDS:
        key = f"config.{field}"
        if key not in records:
            raise ValueError(f"checkpoint missing {key}")
        config_values[field] = int(records.pop(key))
    n_mods = config_values.pop("n_mods")
    config = ModelConfig(**config_values)
    if config.n_mods != n_mods:
        raise ValueError("checkpoint modulation count does not match the built-in schemes")
    model = SignalAnalyzer(config)
    state = {name: torch.as_tensor(values) for name, values in records.items()}
    model.load_state_dict(state)
    return model
