"""Preprocessing pipeline tests: channel selection, epoching, and the
filter-then-resample signal path."""

import numpy as np
import pytest

from min2net.errors import ConfigError
from min2net.filters import FilterSpec
from min2net.preproc import (
    bandpass_recording,
    epoch,
    preprocess_pipeline,
    resample_recording,
    select_channels,
    standardize_epochs,
)
from min2net.rawio import RawRecording


def make_recording(fs=250.0, seconds=60, n_channels=4, n_events=10, seed=0,
                   session="offline-1", subject_id=0):
    rng = np.random.default_rng(seed)
    n = int(fs * seconds)
    samples = rng.standard_normal((n_channels, n)).astype(np.float32)
    step = (n - int(10 * fs)) // max(n_events, 1)
    events = [(int(fs) + i * step, 1 + i % 2) for i in range(n_events)]
    return RawRecording(
        samples=samples, fs=fs,
        channel_names=[f"CH{i}" for i in range(n_channels)],
        events=events, subject_id=subject_id, session=session)


CLASS_MAP = {1: 0, 2: 1}
CLASS_NAMES = ["left", "right"]


class TestSelectChannels:
    def test_subset_and_reorder(self):
        rec = make_recording()
        out = select_channels(rec, ["CH2", "CH0"])
        assert out.channel_names == ["CH2", "CH0"]
        np.testing.assert_array_equal(out.samples[0], rec.samples[2])
        np.testing.assert_array_equal(out.samples[1], rec.samples[0])

    def test_identity_order(self):
        rec = make_recording()
        out = select_channels(rec, rec.channel_names)
        np.testing.assert_array_equal(out.samples, rec.samples)

    def test_missing_channel_named(self):
        with pytest.raises(ConfigError, match="XX"):
            select_channels(make_recording(), ["CH0", "XX"])


class TestEpoch:
    def test_window_sample_count(self):
        rec = make_recording(fs=100.0)
        ds = epoch(rec, (0.0, 4.0), CLASS_MAP, CLASS_NAMES)
        assert ds.n_samples == 400
        assert ds.n_trials == 10

    def test_rest_window(self):
        rec = make_recording(fs=100.0)
        ds = epoch(rec, (4.0, 8.0), {1: 0, 2: 0}, ["rest"])
        assert ds.n_samples == 400
        assert np.all(ds.labels == 0)

    def test_empty_class_map(self):
        ds = epoch(make_recording(), (0.0, 4.0), {}, [])
        assert ds.n_trials == 0

    def test_out_of_bounds_window_rejected(self):
        rec = make_recording(fs=100.0, seconds=5, n_events=1)
        with pytest.raises(ConfigError):
            epoch(rec, (0.0, 100.0), CLASS_MAP, CLASS_NAMES)

    def test_trials_preserve_recording_order(self):
        rec = make_recording(fs=100.0)
        ds = epoch(rec, (0.0, 1.0), CLASS_MAP, CLASS_NAMES)
        np.testing.assert_array_equal(ds.labels, [i % 2 for i in range(10)])

    def test_non_integer_window_rejected(self):
        with pytest.raises(ConfigError):
            epoch(make_recording(fs=250.0), (0.0, 0.001), CLASS_MAP, CLASS_NAMES)


class TestSignalPath:
    def test_bandpass_preserves_shape(self):
        rec = make_recording()
        out = bandpass_recording(rec, FilterSpec(5, 8.0, 30.0, rec.fs))
        assert out.samples.shape == rec.samples.shape
        assert out.fs == rec.fs

    def test_resample_rescales_events(self):
        rec = make_recording(fs=250.0)
        out = resample_recording(rec, 100.0)
        assert out.fs == 100.0
        assert out.samples.shape[1] == rec.samples.shape[1] * 100 // 250
        for (o_new, _), (o_old, _) in zip(out.events, rec.events):
            assert o_new == round(o_old * 100 / 250)

    def test_pipeline_dims(self):
        rec = make_recording(fs=250.0)
        ds = preprocess_pipeline(rec, FilterSpec(5, 8.0, 30.0, 250.0), 100.0,
                                 ["CH0", "CH1"], (0.0, 4.0),
                                 CLASS_MAP, CLASS_NAMES)
        assert ds.data.shape == (10, 2, 400)
        assert ds.fs == 100.0

    def test_pipeline_deterministic(self):
        rec = make_recording(fs=250.0)
        args = (FilterSpec(5, 8.0, 30.0, 250.0), 100.0, None, (0.0, 4.0),
                CLASS_MAP, CLASS_NAMES)
        a = preprocess_pipeline(rec, *args)
        b = preprocess_pipeline(rec, *args)
        np.testing.assert_array_equal(a.data, b.data)

    def test_energy_confined_to_band(self):
        """White noise through the pipeline keeps <= 5% of its power
        outside 8-30 Hz."""
        rec = make_recording(fs=250.0, seconds=120, n_channels=1, seed=3)
        ds = preprocess_pipeline(rec, FilterSpec(5, 8.0, 30.0, 250.0), 100.0,
                                 None, (0.0, 4.0), CLASS_MAP, CLASS_NAMES)
        freqs = np.fft.rfftfreq(ds.n_samples, d=1.0 / ds.fs)
        power = np.abs(np.fft.rfft(ds.data.astype(np.float64), axis=2)) ** 2
        inside = (freqs >= 8.0) & (freqs <= 30.0)
        ratio = power[:, :, ~inside].sum() / power.sum()
        assert ratio <= 0.05

    def test_standardize_epochs(self):
        rec = make_recording(fs=100.0)
        ds = epoch(rec, (0.0, 4.0), CLASS_MAP, CLASS_NAMES)
        out = standardize_epochs(ds)
        np.testing.assert_allclose(out.data.mean(axis=2), 0.0, atol=1e-4)
        np.testing.assert_allclose(out.data.std(axis=2), 1.0, atol=1e-4)

    def test_resample_epoch_commutes(self):
        """Epoching after resampling matches resampling each epoch, for
        windows aligned to both rates."""
        rec = make_recording(fs=250.0, seconds=60)
        band = FilterSpec(5, 8.0, 30.0, 250.0)
        filtered = bandpass_recording(rec, band)
        # only events whose onsets land on the 100 Hz grid compare cleanly
        aligned = [(o, c) for o, c in filtered.events if (o * 2) % 5 == 0]
        filtered.events[:] = aligned
        a = epoch(resample_recording(filtered, 100.0), (0.0, 4.0),
                  CLASS_MAP, CLASS_NAMES)
        from min2net.filters import resample
        b = epoch(filtered, (0.0, 4.0), CLASS_MAP, CLASS_NAMES)
        interior = slice(25, -25)  # isolated epochs lack context at edges
        for i in range(a.n_trials):
            direct = np.stack([resample(ch.astype(float), 250.0, 100.0)
                               for ch in b.data[i]])
            scale = np.abs(a.data[i][:, interior]).max()
            err = np.abs(a.data[i] - direct)[:, interior].max()
            assert err <= 0.01 * scale
