"""Builders for miniature archive files used across the converter tests."""

import struct

import numpy as np
import scipy.io


def build_gdf(path, samples, fs, labels, events, *, gdftyp=16,
              physmin=-100.0, physmax=100.0, digmin=-32768.0,
              digmax=32767.0, version=b"GDF 2.20"):
    """Write a small GDF 2.x file.

    ``samples`` is (n_channels, n_samples) in physical units; one data
    record per second.  ``events`` are (0-based sample, code) pairs.
    """
    samples = np.asarray(samples, dtype=np.float64)
    ns, total = samples.shape
    spr = int(fs)
    if total % spr:
        raise ValueError("sample count must fill whole 1-second records")
    n_records = total // spr

    h1 = bytearray(256)
    h1[0:8] = version.ljust(8)
    struct.pack_into("<H", h1, 184, 1 + ns)  # header blocks
    struct.pack_into("<q", h1, 236, n_records)
    struct.pack_into("<II", h1, 244, 1, 1)  # one-second records
    struct.pack_into("<H", h1, 252, ns)

    h2 = bytearray(256 * ns)
    for c, label in enumerate(labels):
        h2[16 * c : 16 * c + 16] = label.encode("ascii").ljust(16)
    for c in range(ns):
        struct.pack_into("<d", h2, 104 * ns + 8 * c, physmin)
        struct.pack_into("<d", h2, 112 * ns + 8 * c, physmax)
        struct.pack_into("<d", h2, 120 * ns + 8 * c, digmin)
        struct.pack_into("<d", h2, 128 * ns + 8 * c, digmax)
        struct.pack_into("<I", h2, 216 * ns + 4 * c, spr)
        struct.pack_into("<I", h2, 220 * ns + 4 * c, gdftyp)

    if gdftyp == 16:
        stored = samples.astype("<f4")
    elif gdftyp == 17:
        stored = samples.astype("<f8")
    elif gdftyp == 3:
        scale = (physmax - physmin) / (digmax - digmin)
        stored = np.round((samples - physmin) / scale + digmin).astype("<i2")
    else:
        raise ValueError(f"builder does not support gdftyp {gdftyp}")

    body = bytearray()
    for r in range(n_records):
        for c in range(ns):
            body += stored[c, r * spr : (r + 1) * spr].tobytes()

    ev = bytearray()
    ev += bytes([1]) + len(events).to_bytes(3, "little")
    ev += struct.pack("<f", float(fs))
    for onset, _ in events:
        ev += struct.pack("<I", int(onset) + 1)  # 1-based positions
    for _, code in events:
        ev += struct.pack("<H", int(code))

    with open(path, "wb") as fh:
        fh.write(bytes(h1) + bytes(h2) + bytes(body) + bytes(ev))


def build_openbmi_mat(path, phases, fs, channel_names):
    """Classic-MAT OpenBMI session file.

    ``phases`` maps variable name ("EEG_MI_train"/"EEG_MI_test") to a
    (samples (time x channels), 1-based onsets, labels) triple.
    """
    out = {}
    for varname, (x, onsets, labels) in phases.items():
        out[varname] = {
            "x": np.asarray(x, dtype=np.float64),
            "t": np.asarray(onsets, dtype=np.float64).reshape(1, -1),
            "y_dec": np.asarray(labels, dtype=np.float64).reshape(1, -1),
            "fs": float(fs),
            "chan": np.array(channel_names, dtype=object).reshape(1, -1),
        }
    scipy.io.savemat(path, out)


def build_openbmi_mat73(path, phases, fs, channel_names):
    """v7.3 (HDF5) variant of the OpenBMI session file."""
    import h5py

    with h5py.File(path, "w") as fh:
        for varname, (x, onsets, labels) in phases.items():
            grp = fh.create_group(varname)
            # MATLAB stores column-major, so arrays land transposed
            grp.create_dataset("x", data=np.asarray(x, dtype=np.float64).T)
            grp.create_dataset("t", data=np.asarray(onsets,
                                                    dtype=np.float64))
            grp.create_dataset("y_dec", data=np.asarray(labels,
                                                        dtype=np.float64))
            grp.create_dataset("fs", data=np.array([float(fs)]))
            refs = []
            for i, name in enumerate(channel_names):
                chars = np.array([ord(ch) for ch in name], dtype=np.uint16)
                ds = fh.create_dataset(f"#refs#/{varname}_{i}", data=chars)
                refs.append(ds.ref)
            grp.create_dataset(
                "chan", data=np.array(refs, dtype=h5py.ref_dtype))


def build_smrbci_mat(path, runs, fs):
    """SMR-BCI session file: ``runs`` is a list of (X (samples x channels),
    1-based onsets, labels) triples stored as a cell array of structs."""
    cell = np.empty(len(runs), dtype=object)
    for i, (x, onsets, labels) in enumerate(runs):
        cell[i] = {
            "X": np.asarray(x, dtype=np.float64),
            "trial": np.asarray(onsets, dtype=np.float64).reshape(1, -1),
            "y": np.asarray(labels, dtype=np.float64).reshape(1, -1),
            "fs": float(fs),
        }
    scipy.io.savemat(path, {"data": cell})
