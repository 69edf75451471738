"""Canonical epoched-dataset persistence and resting-class balancing.

A dataset directory holds ``manifest.json`` plus one "MIEG" binary per
subject, so LOSO folds can stream single subjects.  Subject file layout
(little-endian): magic "MIEG", version u32, n_trials u32, n_channels u32,
n_samples u32, fs f32, n_trials labels (u8), n_trials session tags (u8),
trial-major f32 samples, trailing CRC32.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, IntegrityError

MAGIC = b"MIEG"
VERSION = 1


@dataclass
class EpochedDataset:
    """Trials x channels x time tensor with per-trial annotations."""

    data: np.ndarray          # (n_trials, C, T) float32 microvolts
    labels: np.ndarray        # (n_trials,) class indices
    subject_ids: np.ndarray   # (n_trials,) integer subject ids
    session_tags: np.ndarray  # (n_trials,) indices into `sessions`
    fs: float
    channel_names: list[str]
    class_names: list[str]
    sessions: list[str] = field(default_factory=lambda: ["offline-1"])
    name: str = "dataset"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.subject_ids = np.asarray(self.subject_ids, dtype=np.int64)
        self.session_tags = np.asarray(self.session_tags, dtype=np.int64)
        n = self.data.shape[0]
        if self.data.ndim != 3:
            raise ConfigError("data must be (n_trials, n_channels, n_samples)")
        for arr, what in ((self.labels, "labels"), (self.subject_ids, "subject_ids"),
                          (self.session_tags, "session_tags")):
            if arr.shape != (n,):
                raise ConfigError(f"{what} length {arr.shape} != {n} trials")
        if self.fs <= 0:
            raise ConfigError("fs must be positive")
        if n and self.labels.size and (
                self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ConfigError("label outside class-name range")
        if self.data.shape[1] != len(self.channel_names):
            raise ConfigError(
                f"{self.data.shape[1]} channels vs {len(self.channel_names)} names")

    @property
    def n_trials(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def n_samples(self):
        return self.data.shape[2]

    def subset(self, indices) -> "EpochedDataset":
        indices = np.asarray(indices)
        return replace(self, data=self.data[indices], labels=self.labels[indices],
                       subject_ids=self.subject_ids[indices],
                       session_tags=self.session_tags[indices])

    def model_input(self):
        """Trials in the network's channels-last layout (B, 1, T, C)."""
        return np.ascontiguousarray(
            self.data.transpose(0, 2, 1)[:, None, :, :])

    def session_mask(self, prefix: str):
        """Boolean trial mask for sessions whose name starts with prefix."""
        wanted = [i for i, s in enumerate(self.sessions) if s.startswith(prefix)]
        return np.isin(self.session_tags, wanted)


def _subject_blob(ds: EpochedDataset, idx) -> bytes:
    n, C, T = len(idx), ds.n_channels, ds.n_samples
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", VERSION)
    buf += struct.pack("<III", n, C, T)
    buf += struct.pack("<f", ds.fs)
    labels = ds.labels[idx]
    tags = ds.session_tags[idx]
    if labels.size and labels.max() > 255 or tags.size and tags.max() > 255:
        raise ConfigError("labels and session tags must fit in u8")
    buf += labels.astype(np.uint8).tobytes()
    buf += tags.astype(np.uint8).tobytes()
    buf += np.ascontiguousarray(ds.data[idx], dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    return bytes(buf)


def write_dataset(ds: EpochedDataset, out_dir):
    """Persist as manifest.json + one binary per subject (lossless f32)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects = []
    for sid in np.unique(ds.subject_ids):
        idx = np.flatnonzero(ds.subject_ids == sid)
        fname = f"subject_{int(sid):03d}.mieg"
        blob = _subject_blob(ds, idx)
        (out / fname).write_bytes(blob)
        subjects.append({
            "id": int(sid),
            "file": fname,
            "trials": int(idx.size),
            "sessions": sorted({ds.sessions[t] for t in ds.session_tags[idx]}),
            "positions": [int(i) for i in idx],
            "crc32": zlib.crc32(blob) & 0xFFFFFFFF,
        })
    manifest = {
        "format_version": VERSION,
        "dataset": ds.name,
        "fs": ds.fs,
        "channel_names": list(ds.channel_names),
        "class_names": list(ds.class_names),
        "sessions": list(ds.sessions),
        "subjects": subjects,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8")


def read_manifest(in_dir) -> dict:
    path = Path(in_dir) / "manifest.json"
    if not path.exists():
        raise IntegrityError(f"{in_dir}: no manifest.json")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != VERSION:
        raise IntegrityError(
            f"{in_dir}: unsupported manifest version "
            f"{manifest.get('format_version')}")
    return manifest


def _read_subject(path, expect_crc=None):
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise IntegrityError(f"{path}: not a MIEG subject file")
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc:
        raise IntegrityError(f"{path}: CRC mismatch (corrupted)")
    if expect_crc is not None and (zlib.crc32(raw) & 0xFFFFFFFF) != expect_crc:
        raise IntegrityError(f"{path}: checksum does not match manifest")
    off = 4
    (version,) = struct.unpack_from("<I", raw, off); off += 4
    if version != VERSION:
        raise IntegrityError(f"{path}: unsupported version {version}")
    n, C, T = struct.unpack_from("<III", raw, off); off += 12
    (fs,) = struct.unpack_from("<f", raw, off); off += 4
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off); off += n
    tags = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off); off += n
    data = np.frombuffer(raw, dtype="<f4", count=n * C * T, offset=off)
    return data.reshape(n, C, T).copy(), labels.astype(np.int64), \
        tags.astype(np.int64), float(fs)


def read_dataset(in_dir) -> EpochedDataset:
    """Inverse of write_dataset; verifies per-file checksums and restores
    the original trial order."""
    manifest = read_manifest(in_dir)
    in_dir = Path(in_dir)
    total = sum(s["trials"] for s in manifest["subjects"])
    C = len(manifest["channel_names"])
    data = labels = sids = tags = None
    fs = float(manifest["fs"])
    for sub in manifest["subjects"]:
        d, l, t, file_fs = _read_subject(in_dir / sub["file"], sub["crc32"])
        if d.shape[0] != sub["trials"]:
            raise IntegrityError(
                f"{sub['file']}: {d.shape[0]} trials, manifest says {sub['trials']}")
        if data is None:
            data = np.zeros((total, C, d.shape[2]), dtype=np.float32)
            labels = np.zeros(total, dtype=np.int64)
            sids = np.zeros(total, dtype=np.int64)
            tags = np.zeros(total, dtype=np.int64)
        pos = np.asarray(sub["positions"])
        data[pos], labels[pos], tags[pos] = d, l, t
        sids[pos] = sub["id"]
    if data is None:
        data = np.zeros((0, C, 0), dtype=np.float32)
        labels = sids = tags = np.zeros(0, dtype=np.int64)
    return EpochedDataset(
        data=data, labels=labels, subject_ids=sids, session_tags=tags,
        fs=fs, channel_names=manifest["channel_names"],
        class_names=manifest["class_names"], sessions=manifest["sessions"],
        name=manifest["dataset"])


def balance_rest(ds: EpochedDataset, seed: int, rest_class: str = "rest"
                 ) -> EpochedDataset:
    """Keep all MI trials and a uniformly sampled half of the rest trials
    (without replacement); deterministic per seed."""
    if rest_class not in ds.class_names:
        raise ConfigError(f"no class named {rest_class!r} in dataset")
    rest_label = ds.class_names.index(rest_class)
    rest_idx = np.flatnonzero(ds.labels == rest_label)
    if rest_idx.size == 0:
        raise ConfigError("dataset has no rest trials")
    rng = np.random.default_rng(seed)
    keep_rest = np.sort(rng.choice(rest_idx, size=rest_idx.size // 2,
                                   replace=False))
    keep = np.sort(np.concatenate(
        [np.flatnonzero(ds.labels != rest_label), keep_rest]))
    return ds.subset(keep)


def concat_datasets(parts: list[EpochedDataset]) -> EpochedDataset:
    """Stack trial blocks that share channels, rate, classes, and sessions."""
    if not parts:
        raise ConfigError("nothing to concatenate")
    head = parts[0]
    for p in parts[1:]:
        if (p.channel_names != head.channel_names or p.fs != head.fs
                or p.class_names != head.class_names
                or p.sessions != head.sessions):
            raise ConfigError("datasets have incompatible metadata")
    return replace(
        head,
        data=np.concatenate([p.data for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        subject_ids=np.concatenate([p.subject_ids for p in parts]),
        session_tags=np.concatenate([p.session_tags for p in parts]))
