"""Minimal GDF 2.x reader, sufficient for BCI Competition IV 2a files.

Only the fields the converter needs are decoded.  Layout assumed
(little-endian throughout):

Fixed header, 256 bytes:
    0    8s   version id, e.g. "GDF 2.20"
    184  u16  header length in 256-byte blocks (fixed + variable header)
    236  i64  number of data records (-1 = unknown, not supported here)
    244  2u32 record duration as a rational (numerator, denominator) seconds
    252  u16  number of channels (NS)

Variable header, 256*NS bytes, field-major (all labels first, then all
transducers, ...):
    offset (from start of variable header)   width/chan  field
    0                                        16s         label
    16*NS                                    80s         transducer
    96*NS                                    6s          physical dimension
    102*NS                                   u16         phys. dimension code
    104*NS                                   f64         physical minimum
    112*NS                                   f64         physical maximum
    120*NS                                   f64         digital minimum
    128*NS                                   f64         digital maximum
    136*NS                                   68s         prefiltering
    204*NS                                   f32         lowpass cutoff
    208*NS                                   f32         highpass cutoff
    212*NS                                   f32         notch
    216*NS                                   u32         samples per record
    220*NS                                   u32         sample type (GDFTYP)
    224*NS                                   3f32        electrode position
    236*NS                                   20s         sensor description

Data records follow the header: for each record, each channel in order
contributes its samples-per-record values in its GDFTYP.  Integer types
are rescaled to physical units with the (phys, dig) ranges; float types
are taken as physical values directly.

Event table (version 2 and up) after the data records:
    u8        mode (1: positions+types; 3: adds channels+durations)
    3 bytes   number of events, 24-bit little-endian
    f32       event sample rate (ignored; positions are in samples)
    u32 * n   positions, 1-based sample indices
    u16 * n   type codes
    (mode 3)  u16 * n channels, u32 * n durations
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import MalformedFileError

GDF_DTYPES = {
    1: np.int8, 2: np.uint8, 3: np.int16, 4: np.uint16,
    5: np.int32, 6: np.uint32, 7: np.int64, 16: np.float32, 17: np.float64,
}


@dataclass
class GdfFile:
    fs: float
    channel_names: list[str]
    samples: np.ndarray  # (n_channels, n_samples) physical units
    events: list[tuple[int, int]]  # (0-based onset sample, type code)


def read_gdf(path) -> GdfFile:
    raw = open(path, "rb").read()
    if len(raw) < 256 or not raw[:3] == b"GDF":
        raise MalformedFileError(f"{path}: not a GDF file")
    version = raw[4:8].decode("ascii", "replace").strip()
    try:
        major = int(float(version))
    except ValueError:
        raise MalformedFileError(f"{path}: unparseable GDF version {version!r}")
    if major < 2:
        raise MalformedFileError(f"{path}: GDF 1.x is not supported")
    (head_blocks,) = struct.unpack_from("<H", raw, 184)
    (n_records,) = struct.unpack_from("<q", raw, 236)
    dur_num, dur_den = struct.unpack_from("<II", raw, 244)
    (ns,) = struct.unpack_from("<H", raw, 252)
    if n_records < 0:
        raise MalformedFileError(f"{path}: unknown record count")
    if ns == 0 or dur_num == 0 or dur_den == 0:
        raise MalformedFileError(f"{path}: degenerate header")
    if head_blocks * 256 < 256 + 256 * ns:
        raise MalformedFileError(f"{path}: header too short for {ns} channels")

    var = 256  # start of the variable header
    labels = [raw[var + 16 * i : var + 16 * (i + 1)]
              .decode("ascii", "replace").strip("\x00 ") for i in range(ns)]
    physmin = np.frombuffer(raw, "<f8", ns, var + 104 * ns)
    physmax = np.frombuffer(raw, "<f8", ns, var + 112 * ns)
    digmin = np.frombuffer(raw, "<f8", ns, var + 120 * ns)
    digmax = np.frombuffer(raw, "<f8", ns, var + 128 * ns)
    spr = np.frombuffer(raw, "<u4", ns, var + 216 * ns)
    gdftyp = np.frombuffer(raw, "<u4", ns, var + 220 * ns)
    for t in gdftyp:
        if int(t) not in GDF_DTYPES:
            raise MalformedFileError(f"{path}: unsupported sample type {t}")
    if len(set(spr.tolist())) != 1:
        raise MalformedFileError(
            f"{path}: per-channel record lengths differ ({sorted(set(spr))})")
    spr = int(spr[0])
    record_dur = dur_num / dur_den
    fs = spr / record_dur

    # data records
    itemsizes = [np.dtype(GDF_DTYPES[int(t)]).itemsize for t in gdftyp]
    rec_bytes = spr * sum(itemsizes)
    data_start = head_blocks * 256
    data_end = data_start + rec_bytes * n_records
    if data_end > len(raw):
        raise MalformedFileError(f"{path}: truncated data section")
    chans = [np.empty(spr * n_records, dtype=np.float64) for _ in range(ns)]
    off = data_start
    for r in range(n_records):
        for c in range(ns):
            block = np.frombuffer(raw, GDF_DTYPES[int(gdftyp[c])], spr, off)
            off += spr * itemsizes[c]
            chans[c][r * spr : (r + 1) * spr] = block
    for c in range(ns):
        if int(gdftyp[c]) < 16:  # integer: rescale to physical units
            span = digmax[c] - digmin[c]
            if span == 0:
                raise MalformedFileError(
                    f"{path}: channel {labels[c]!r} has an empty digital range")
            scale = (physmax[c] - physmin[c]) / span
            chans[c] = (chans[c] - digmin[c]) * scale + physmin[c]

    # event table
    events = []
    if data_end < len(raw):
        ev = raw[data_end:]
        if len(ev) < 8:
            raise MalformedFileError(f"{path}: truncated event table")
        mode = ev[0]
        n_ev = int.from_bytes(ev[1:4], "little")
        need = 8 + n_ev * (6 if mode == 1 else 12)
        if mode not in (1, 3) or len(ev) < need:
            raise MalformedFileError(
                f"{path}: bad event table (mode {mode}, {n_ev} events)")
        positions = np.frombuffer(ev, "<u4", n_ev, 8)
        types = np.frombuffer(ev, "<u2", n_ev, 8 + 4 * n_ev)
        events = [(int(p) - 1, int(t)) for p, t in zip(positions, types)]

    return GdfFile(fs=fs, channel_names=labels,
                   samples=np.vstack(chans) if ns else np.empty((0, 0)),
                   events=events)
