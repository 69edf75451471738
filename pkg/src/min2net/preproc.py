"""Signal path from continuous recordings to model-ready epochs:
channel selection, zero-phase band-pass at the native rate, rational
resampling to the target rate, and epoch extraction.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dataio import EpochedDataset
from .errors import ConfigError
from .filters import BiquadCascade, FilterSpec, butter_bandpass, filtfilt, resample
from .rawio import RawRecording


def select_channels(rec: RawRecording, wanted: list[str]) -> RawRecording:
    """Subset and reorder channels to exactly the wanted order."""
    missing = [w for w in wanted if w not in rec.channel_names]
    if missing:
        raise ConfigError(f"channels not in recording: {missing}")
    rows = [rec.channel_names.index(w) for w in wanted]
    return replace(rec, samples=rec.samples[rows], channel_names=list(wanted))


def epoch(rec: RawRecording, window_s: tuple[float, float],
          class_map: dict[int, int], class_names: list[str],
          sessions: list[str] | None = None) -> EpochedDataset:
    """Cut one trial per mapped event, ``window_s`` seconds relative to
    the event onset.  Events with codes outside ``class_map`` are ignored."""
    start_s, end_s = window_s
    if end_s <= start_s:
        raise ConfigError(f"empty epoch window {window_s}")
    n_samp = (end_s - start_s) * rec.fs
    if abs(n_samp - round(n_samp)) > 1e-9:
        raise ConfigError(
            f"window {window_s} s is not an integer number of samples at "
            f"{rec.fs} Hz")
    n_samp = int(round(n_samp))
    trials, labels = [], []
    for onset, code in rec.events:
        if code not in class_map:
            continue
        lo = onset + int(round(start_s * rec.fs))
        hi = lo + n_samp
        if lo < 0 or hi > rec.samples.shape[1]:
            raise ConfigError(
                f"epoch window for event at sample {onset} (code {code}) "
                f"exceeds recording bounds")
        trials.append(rec.samples[:, lo:hi])
        labels.append(class_map[code])
    sessions = sessions if sessions is not None else [rec.session]
    tag = sessions.index(rec.session)
    n = len(trials)
    data = np.stack(trials).astype(np.float32) if n else np.zeros(
        (0, rec.samples.shape[0], n_samp), dtype=np.float32)
    return EpochedDataset(
        data=data, labels=np.asarray(labels, dtype=np.int64),
        subject_ids=np.full(n, rec.subject_id, dtype=np.int64),
        session_tags=np.full(n, tag, dtype=np.int64),
        fs=rec.fs, channel_names=list(rec.channel_names),
        class_names=list(class_names), sessions=list(sessions))


def bandpass_recording(rec: RawRecording, band: FilterSpec) -> RawRecording:
    """Zero-phase band-pass of every channel at the native rate."""
    if band.fs != rec.fs:
        band = FilterSpec(band.order, band.low_hz, band.high_hz, rec.fs)
    cascade = butter_bandpass(band)
    filtered = np.stack([filtfilt(cascade, ch) for ch in rec.samples])
    return replace(rec, samples=filtered.astype(rec.samples.dtype))


def resample_recording(rec: RawRecording, target_fs: float) -> RawRecording:
    """Rational resampling of the continuous signal; event onsets are
    rescaled to the new rate."""
    if target_fs == rec.fs:
        return rec
    out = np.stack([resample(ch, rec.fs, target_fs) for ch in rec.samples])
    ratio = target_fs / rec.fs
    events = [(int(round(onset * ratio)), code) for onset, code in rec.events]
    events = [(min(o, out.shape[1] - 1), c) for o, c in events]
    return replace(rec, samples=out.astype(rec.samples.dtype),
                   fs=float(target_fs), events=events)


def standardize_epochs(ds: EpochedDataset) -> EpochedDataset:
    """Per-trial, per-channel zero mean / unit variance (optional; off by
    default in the pipeline)."""
    mu = ds.data.mean(axis=2, keepdims=True)
    sd = ds.data.std(axis=2, keepdims=True)
    sd[sd == 0] = 1.0
    return replace(ds, data=((ds.data - mu) / sd).astype(np.float32))


def preprocess_pipeline(rec: RawRecording, band: FilterSpec, target_fs: float,
                        channels: list[str] | None, window_s: tuple[float, float],
                        class_map: dict[int, int], class_names: list[str],
                        sessions: list[str] | None = None,
                        standardize: bool = False) -> EpochedDataset:
    """select channels -> band-pass filtfilt at the native rate ->
    resample -> epoch.  Filtering precedes resampling so the upper band
    edge is protected by the anti-alias stage."""
    if channels is not None:
        rec = select_channels(rec, channels)
    rec = bandpass_recording(rec, band)
    rec = resample_recording(rec, target_fs)
    ds = epoch(rec, window_s, class_map, class_names, sessions)
    if standardize:
        ds = standardize_epochs(ds)
    return ds
