"""Binary model checkpoints.

Byte layout (all integers little-endian):

    magic   4s   "MN2C"
    version u32  (currently 1)
    C, T, z, N          u32 x 4
    margin, w1, w2, w3  f64 x 4
    seed    u64
    n_records u32
    records: u16 name length, utf-8 name, u8 ndim, u32 dims..., f32 data
    crc     u32  CRC32 over every preceding byte

Records cover the trainable parameters and the BN running statistics, in
model order, so a round trip reproduces forward outputs bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import ConfigError, IntegrityError
from .model import Min2Net, Min2NetConfig

MAGIC = b"MN2C"
VERSION = 1


def checkpoint_save(model: Min2Net, path):
    cfg = model.config
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", VERSION)
    buf += struct.pack("<4I", cfg.n_channels, cfg.n_samples,
                       cfg.latent_dim, cfg.n_classes)
    buf += struct.pack("<4d", cfg.margin, *cfg.loss_weights)
    buf += struct.pack("<Q", model.seed)
    arrays = model.state_arrays()
    buf += struct.pack("<I", len(arrays))
    for name, arr in arrays.items():
        nb = name.encode("utf-8")
        buf += struct.pack("<H", len(nb)) + nb
        buf += struct.pack("<B", arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(buf))


def checkpoint_load(path, expected_config: Min2NetConfig | None = None) -> Min2Net:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise IntegrityError(f"{path}: not a MN2C checkpoint")
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise IntegrityError(f"{path}: CRC mismatch (truncated or corrupted)")
    off = 4
    (version,) = struct.unpack_from("<I", raw, off); off += 4
    if version != VERSION:
        raise IntegrityError(f"{path}: unsupported checkpoint version {version}")
    C, T, z, N = struct.unpack_from("<4I", raw, off); off += 16
    margin, w1, w2, w3 = struct.unpack_from("<4d", raw, off); off += 32
    (seed,) = struct.unpack_from("<Q", raw, off); off += 8
    cfg = Min2NetConfig(n_channels=C, n_samples=T, n_classes=N, latent_dim=z,
                        margin=margin, loss_weights=(w1, w2, w3))
    if expected_config is not None:
        for attr in ("n_channels", "n_samples", "latent_dim", "n_classes"):
            got, want = getattr(cfg, attr), getattr(expected_config, attr)
            if got != want:
                raise ConfigError(
                    f"checkpoint {attr}={got} does not match expected {want}")
    (n_records,) = struct.unpack_from("<I", raw, off); off += 4
    arrays = {}
    end = len(raw) - 4
    for _ in range(n_records):
        (name_len,) = struct.unpack_from("<H", raw, off); off += 2
        name = raw[off : off + name_len].decode("utf-8"); off += name_len
        (ndim,) = struct.unpack_from("<B", raw, off); off += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, off); off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        nbytes = 4 * count
        if off + nbytes > end:
            raise IntegrityError(f"{path}: record {name!r} overruns file")
        arrays[name] = np.frombuffer(
            raw, dtype="<f4", count=count, offset=off).reshape(shape).copy()
        off += nbytes
    if off != end:
        raise IntegrityError(f"{path}: {end - off} trailing bytes after records")
    model = Min2Net(cfg, seed=int(seed))
    model.load_state(arrays)
    return model
