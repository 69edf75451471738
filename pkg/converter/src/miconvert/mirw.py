"""Writer/reader for the canonical-raw "MIRW" layout.

This is an independent implementation of the byte format the training
toolkit consumes; the two packages share only the file format, never
code.  Byte layout of a .mirw file (all integers little-endian):

    magic       4s   "MIRW"
    version     u32  (currently 1)
    fs          f64
    n_channels  u32
    n_samples   u64
    n_events    u32
    channels:   per channel u16 name length + utf-8 name
    events:     per event u64 onset sample + u32 code
    samples:    channel-major f32 (n_channels x n_samples)
    crc         u32  CRC32 over every preceding byte

A canonical-raw directory holds one .mirw per (subject, session) named
``subject_SSS_<session>.mirw`` plus a ``manifest.json`` describing the
channel set, the event-code-to-class mapping, and per-file checksums.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConversionError, IntegrityError

MAGIC = b"MIRW"
VERSION = 1
RAW_FORMAT = "mirw-raw"


@dataclass
class Recording:
    """One continuous recording headed for a .mirw file."""

    samples: np.ndarray  # (n_channels, n_samples)
    fs: float
    channel_names: list[str]
    events: list[tuple[int, int]]  # (onset sample, event code)
    subject_id: int
    session: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ConversionError("samples must be (n_channels, n_samples)")
        if self.samples.shape[0] != len(self.channel_names):
            raise ConversionError(
                f"{self.samples.shape[0]} sample rows vs "
                f"{len(self.channel_names)} channel names")
        for onset, _ in self.events:
            if not 0 <= onset < self.samples.shape[1]:
                raise ConversionError(
                    f"event onset {onset} outside recording of "
                    f"{self.samples.shape[1]} samples")


def write_mirw(rec: Recording, path):
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", VERSION)
    buf += struct.pack("<d", rec.fs)
    buf += struct.pack("<I", rec.samples.shape[0])
    buf += struct.pack("<Q", rec.samples.shape[1])
    buf += struct.pack("<I", len(rec.events))
    for name in rec.channel_names:
        nb = name.encode("utf-8")
        buf += struct.pack("<H", len(nb)) + nb
    for onset, code in rec.events:
        buf += struct.pack("<QI", int(onset), int(code))
    buf += np.ascontiguousarray(rec.samples, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(buf))


def read_mirw(path, subject_id=0, session="") -> Recording:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise IntegrityError(f"{path}: not a MIRW recording")
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc:
        raise IntegrityError(f"{path}: CRC mismatch")
    off = 4
    (version,) = struct.unpack_from("<I", raw, off); off += 4
    if version != VERSION:
        raise IntegrityError(f"{path}: unsupported MIRW version {version}")
    (fs,) = struct.unpack_from("<d", raw, off); off += 8
    (n_ch,) = struct.unpack_from("<I", raw, off); off += 4
    (n_samp,) = struct.unpack_from("<Q", raw, off); off += 8
    (n_ev,) = struct.unpack_from("<I", raw, off); off += 4
    names = []
    for _ in range(n_ch):
        (ln,) = struct.unpack_from("<H", raw, off); off += 2
        names.append(raw[off : off + ln].decode("utf-8")); off += ln
    events = []
    for _ in range(n_ev):
        onset, code = struct.unpack_from("<QI", raw, off); off += 12
        events.append((onset, code))
    samples = np.frombuffer(raw, dtype="<f4", count=n_ch * n_samp, offset=off)
    return Recording(samples=samples.reshape(n_ch, n_samp).copy(), fs=fs,
                     channel_names=names, events=events,
                     subject_id=subject_id, session=session)


def write_layout(recordings: list[Recording], out_dir, *, dataset: str,
                 event_map: dict, class_names: list[str],
                 absent_subjects: list[int] | None = None):
    """Write every recording plus the manifest the primary pipeline reads."""
    if not recordings:
        raise ConversionError("no recordings to write")
    names = recordings[0].channel_names
    for rec in recordings:
        if rec.channel_names != names:
            raise ConversionError(
                f"subject {rec.subject_id} session {rec.session!r}: channel "
                f"names differ from the first recording")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects: dict[int, dict] = {}
    for rec in recordings:
        fname = f"subject_{rec.subject_id:03d}_{rec.session}.mirw"
        write_mirw(rec, out / fname)
        entry = subjects.setdefault(
            rec.subject_id, {"id": int(rec.subject_id), "recordings": []})
        entry["recordings"].append({
            "session": rec.session,
            "file": fname,
            "fs": rec.fs,
            "n_samples": int(rec.samples.shape[1]),
            "n_events": len(rec.events),
            "crc32": zlib.crc32((out / fname).read_bytes()) & 0xFFFFFFFF,
        })
    manifest = {
        "format": RAW_FORMAT,
        "format_version": VERSION,
        "dataset": dataset,
        "channel_names": list(names),
        "event_map": {str(k): v for k, v in event_map.items()},
        "class_names": list(class_names),
        "absent_subjects": sorted(absent_subjects or []),
        "subjects": [subjects[k] for k in sorted(subjects)],
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8")


def read_manifest(in_dir) -> dict:
    path = Path(in_dir) / "manifest.json"
    if not path.exists():
        raise IntegrityError(f"{in_dir}: no manifest.json")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("format") != RAW_FORMAT:
        raise IntegrityError(f"{in_dir}: not a canonical-raw manifest")
    return manifest
