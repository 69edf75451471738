"""Synthetic motor-imagery dataset generator for desk-scale validation.

Each trial is 1/f background noise plus a mu-band oscillation whose
amplitude is suppressed on a class-dependent half of the channels,
mimicking contralateral band-power attenuation.  Trials are split evenly
between an offline and an online session so both evaluation schemes run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import EpochedDataset
from .errors import ConfigError

SESSIONS = ["offline-1", "online-1"]


@dataclass
class SynthSpec:
    n_subjects: int = 4
    trials_per_class: int = 40
    n_channels: int = 8
    n_samples: int = 400
    fs: float = 100.0
    mu_hz: float = 11.0
    contrast: float = 0.8          # fraction of mu amplitude suppressed
    noise: float = 0.3             # 1/f background amplitude
    subject_var: float = 0.1       # inter-subject spread of gain/frequency
    n_classes: int = 2             # 2 = left/right, 3 adds a rest class
    seed: int = 0

    def __post_init__(self):
        if min(self.n_subjects, self.trials_per_class, self.n_channels,
               self.n_samples) < 1:
            raise ConfigError("all counts must be positive")
        if not 0.0 <= self.contrast <= 1.0:
            raise ConfigError("contrast must be in [0, 1]")
        if self.noise < 0 or self.subject_var < 0:
            raise ConfigError("noise and subject_var must be >= 0")
        if self.fs <= 0 or self.mu_hz >= self.fs / 2:
            raise ConfigError("mu_hz must sit below Nyquist")
        if self.n_classes not in (2, 3):
            raise ConfigError("n_classes must be 2 or 3")
        if self.trials_per_class % 2 != 0:
            raise ConfigError(
                "trials_per_class must be even (split across two sessions)")


def _pink_noise(rng, n_channels, n_samples, amplitude):
    """1/f-power background noise, unit-free amplitude scale."""
    freqs = np.fft.rfftfreq(n_samples, d=1.0)
    shaping = np.zeros_like(freqs)
    shaping[1:] = 1.0 / np.sqrt(freqs[1:])
    spec = (rng.standard_normal((n_channels, freqs.size))
            + 1j * rng.standard_normal((n_channels, freqs.size))) * shaping
    x = np.fft.irfft(spec, n=n_samples, axis=1)
    sd = x.std(axis=1, keepdims=True)
    sd[sd == 0] = 1.0
    return amplitude * x / sd


def synth_generate(spec: SynthSpec) -> EpochedDataset:
    """Deterministic per seed; class-conditional spectra differ only in the
    mu band on the designated channel halves."""
    half = spec.n_channels // 2
    left_set = np.arange(half)                      # suppressed by class 1
    right_set = np.arange(half, spec.n_channels)    # suppressed by class 0
    class_names = ["left", "right", "rest"][: spec.n_classes]
    per_session = spec.trials_per_class // 2

    seqs = np.random.SeedSequence(spec.seed).spawn(spec.n_subjects)
    data, labels, sids, tags = [], [], [], []
    t = np.arange(spec.n_samples) / spec.fs
    for subject, seq in enumerate(seqs):
        rng = np.random.default_rng(seq)
        mu_hz = spec.mu_hz * (1 + spec.subject_var * rng.standard_normal())
        gain = abs(1 + spec.subject_var * rng.standard_normal())
        for session_tag in range(2):
            for label in range(spec.n_classes):
                for _ in range(per_session):
                    amp = np.full(spec.n_channels, gain)
                    if label == 0:
                        amp[right_set] *= 1 - spec.contrast
                    elif label == 1:
                        amp[left_set] *= 1 - spec.contrast
                    phase = rng.uniform(0, 2 * np.pi, spec.n_channels)
                    osc = amp[:, None] * np.sin(
                        2 * np.pi * mu_hz * t[None, :] + phase[:, None])
                    trial = osc + _pink_noise(
                        rng, spec.n_channels, spec.n_samples, spec.noise)
                    data.append(trial.astype(np.float32))
                    labels.append(label)
                    sids.append(subject)
                    tags.append(session_tag)
    return EpochedDataset(
        data=np.stack(data), labels=np.asarray(labels),
        subject_ids=np.asarray(sids), session_tags=np.asarray(tags),
        fs=spec.fs, channel_names=[f"CH{i}" for i in range(spec.n_channels)],
        class_names=class_names, sessions=list(SESSIONS), name="synthetic")


def band_power(ds: EpochedDataset, low_hz: float, high_hz: float):
    """Per-trial, per-channel spectral power inside [low, high] Hz
    (rectangular FFT estimate; used as an independent oracle in tests)."""
    freqs = np.fft.rfftfreq(ds.n_samples, d=1.0 / ds.fs)
    spec = np.abs(np.fft.rfft(ds.data, axis=2)) ** 2
    mask = (freqs >= low_hz) & (freqs <= high_hz)
    return spec[:, :, mask].sum(axis=2)
