"""Binary weight checkpoints ("BCW1" files).

Layout: magic b"BCW1", a 4-byte little-endian unsigned header length L,
L bytes of UTF-8 key=value lines describing the architecture, then every
learnable tensor in PARAM_FIELDS order as raw little-endian float32,
row-major. Adam state is not persisted.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .nn import PARAM_FIELDS, ArchitectureConfig, NetworkParams, weight_shapes

MAGIC = b"BCW1"

_CONFIG_KEYS = (
    "input_height",
    "input_width",
    "conv_filters",
    "conv_kernel",
    "pool",
    "dense1_units",
    "dense2_units",
    "classes",
)


def save_checkpoint(params: NetworkParams, path) -> None:
    path = Path(path)
    header = "".join(f"{key}={getattr(params.config, key)}\n" for key in _CONFIG_KEYS)
    header_bytes = header.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name in PARAM_FIELDS:
            tensor = np.ascontiguousarray(getattr(params, name), dtype="<f4")
            fh.write(tensor.tobytes())


def load_checkpoint(path) -> NetworkParams:
    """Read a checkpoint; weights come back as float64, Adam state zeroed."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a BCW1 checkpoint (bad magic bytes)")
    if len(blob) < 8:
        raise FormatError(f"{path}: truncated checkpoint header")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header_end = 8 + header_len
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated checkpoint header")
    try:
        header = blob[8:header_end].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: checkpoint header is not UTF-8") from exc

    fields = {}
    for line in header.splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed header line {line!r}")
        fields[key.strip()] = value.strip()
    missing = [key for key in _CONFIG_KEYS if key not in fields]
    if missing:
        raise FormatError(f"{path}: header missing keys {missing}")
    try:
        config = ArchitectureConfig(**{key: int(fields[key]) for key in _CONFIG_KEYS})
    except ValueError as exc:
        raise FormatError(f"{path}: invalid architecture in header: {exc}") from exc

    shapes = weight_shapes(config)
    offset = header_end
    tensors = {}
    for name in PARAM_FIELDS:
        count = int(np.prod(shapes[name]))
        nbytes = 4 * count
        if len(blob) < offset + nbytes:
            raise FormatError(f"{path}: truncated tensor data for {name}")
        flat = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        tensors[name] = flat.astype(np.float64).reshape(shapes[name])
        offset += nbytes
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes after tensors")
    for name, tensor in tensors.items():
        if not np.all(np.isfinite(tensor)):
            raise FormatError(f"{path}: non-finite values in {name}")

    params = NetworkParams(config=config, **tensors)
    params.adam_m = {n: np.zeros(shapes[n], dtype=np.float64) for n in PARAM_FIELDS}
    params.adam_v = {n: np.zeros(shapes[n], dtype=np.float64) for n in PARAM_FIELDS}
    return params
