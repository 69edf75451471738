"""Dataset persistence, raw-recording files, synthetic generation, and
rest-class balancing."""

import numpy as np
import pytest

from min2net.dataio import (
    EpochedDataset,
    balance_rest,
    concat_datasets,
    read_dataset,
    write_dataset,
)
from min2net.errors import ConfigError, IntegrityError
from min2net.rawio import (
    RawRecording,
    read_mirw,
    read_raw_layout,
    write_mirw,
    write_raw_layout,
)
from min2net.synth import SynthSpec, band_power, synth_generate


def make_dataset(n_trials=12, C=3, T=100, n_subjects=2, seed=0,
                 channel_names=None):
    rng = np.random.default_rng(seed)
    return EpochedDataset(
        data=rng.standard_normal((n_trials, C, T)).astype(np.float32),
        labels=rng.integers(0, 2, n_trials),
        subject_ids=np.arange(n_trials) % n_subjects,
        session_tags=np.arange(n_trials) % 2,
        fs=100.0,
        channel_names=channel_names or [f"CH{i}" for i in range(C)],
        class_names=["left", "right"],
        sessions=["offline-1", "online-1"])


class TestDatasetRoundTrip:
    def test_bit_identical(self, tmp_path):
        ds = make_dataset()
        write_dataset(ds, tmp_path)
        back = read_dataset(tmp_path)
        np.testing.assert_array_equal(back.data, ds.data)
        np.testing.assert_array_equal(back.labels, ds.labels)
        np.testing.assert_array_equal(back.subject_ids, ds.subject_ids)
        np.testing.assert_array_equal(back.session_tags, ds.session_tags)
        assert back.channel_names == ds.channel_names
        assert back.fs == ds.fs

    def test_non_ascii_channel_names(self, tmp_path):
        ds = make_dataset(channel_names=["Fpz", "Cz-µ", "Oz-β"])
        write_dataset(ds, tmp_path)
        assert read_dataset(tmp_path).channel_names == ["Fpz", "Cz-µ", "Oz-β"]

    def test_tampered_file_detected(self, tmp_path):
        write_dataset(make_dataset(), tmp_path)
        victim = sorted(tmp_path.glob("*.mieg"))[0]
        raw = bytearray(victim.read_bytes())
        raw[40] ^= 0x01
        victim.write_bytes(bytes(raw))
        with pytest.raises(IntegrityError, match=victim.name):
            read_dataset(tmp_path)

    def test_empty_dataset(self, tmp_path):
        ds = EpochedDataset(
            data=np.zeros((0, 3, 100), dtype=np.float32),
            labels=np.zeros(0, dtype=np.int64),
            subject_ids=np.zeros(0, dtype=np.int64),
            session_tags=np.zeros(0, dtype=np.int64),
            fs=100.0, channel_names=["A", "B", "C"],
            class_names=["left", "right"])
        write_dataset(ds, tmp_path)
        assert read_dataset(tmp_path).n_trials == 0

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(IntegrityError):
            read_dataset(tmp_path)

    def test_inconsistent_dims_rejected(self):
        with pytest.raises(ConfigError):
            make_dataset().__class__(
                data=np.zeros((4, 2, 10), dtype=np.float32),
                labels=np.zeros(3, dtype=np.int64),
                subject_ids=np.zeros(4, dtype=np.int64),
                session_tags=np.zeros(4, dtype=np.int64),
                fs=100.0, channel_names=["A", "B"], class_names=["x", "y"])


class TestEpochedDataset:
    def test_model_input_layout(self):
        ds = make_dataset()
        x = ds.model_input()
        assert x.shape == (ds.n_trials, 1, ds.n_samples, ds.n_channels)
        np.testing.assert_array_equal(x[0, 0, :, 1], ds.data[0, 1])

    def test_subset(self):
        ds = make_dataset()
        sub = ds.subset([2, 5, 7])
        assert sub.n_trials == 3
        np.testing.assert_array_equal(sub.labels, ds.labels[[2, 5, 7]])

    def test_session_mask(self):
        ds = make_dataset()
        offline = ds.session_mask("offline")
        np.testing.assert_array_equal(offline, ds.session_tags == 0)

    def test_concat(self):
        a, b = make_dataset(seed=1), make_dataset(seed=2)
        both = concat_datasets([a, b])
        assert both.n_trials == a.n_trials + b.n_trials
        np.testing.assert_array_equal(both.data[: a.n_trials], a.data)


class TestRawRecording:
    def test_mirw_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        rec = RawRecording(
            samples=rng.standard_normal((3, 500)).astype(np.float32),
            fs=250.0, channel_names=["C3", "Cz", "C4"],
            events=[(10, 1), (200, 2)], subject_id=4, session="online-1")
        path = tmp_path / "rec.mirw"
        write_mirw(rec, path)
        back = read_mirw(path, subject_id=4, session="online-1")
        np.testing.assert_array_equal(back.samples, rec.samples)
        assert back.channel_names == rec.channel_names
        assert back.events == rec.events
        assert back.fs == 250.0

    def test_corrupted_mirw_detected(self, tmp_path):
        rec = RawRecording(np.zeros((1, 100), dtype=np.float32), 100.0,
                           ["A"], [])
        path = tmp_path / "rec.mirw"
        write_mirw(rec, path)
        raw = bytearray(path.read_bytes())
        raw[30] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(IntegrityError):
            read_mirw(path)

    def test_raw_layout_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        recs = [RawRecording(rng.standard_normal((2, 300)).astype(np.float32),
                             100.0, ["A", "B"], [(5, 1)], subject_id=s,
                             session=sess)
                for s in (0, 1) for sess in ("offline-1", "online-1")]
        write_raw_layout(recs, tmp_path, dataset="t",
                         event_map={1: "left"}, class_names=["left"])
        back = list(read_raw_layout(tmp_path))
        assert [(r.subject_id, r.session) for r in back] == \
            [(r.subject_id, r.session) for r in recs]

    def test_event_outside_recording_rejected(self):
        with pytest.raises(ConfigError):
            RawRecording(np.zeros((1, 10), dtype=np.float32), 100.0, ["A"],
                         [(50, 1)])


class TestSynthGenerate:
    def test_determinism(self):
        spec = SynthSpec(n_subjects=2, trials_per_class=4, seed=7)
        a, b = synth_generate(spec), synth_generate(spec)
        np.testing.assert_array_equal(a.data, b.data)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_shapes_and_sessions(self):
        ds = synth_generate(SynthSpec(n_subjects=3, trials_per_class=8,
                                      n_channels=6, n_samples=200))
        assert ds.data.shape == (3 * 8 * 2, 6, 200)
        assert set(np.unique(ds.session_tags)) == {0, 1}
        assert ds.sessions == ["offline-1", "online-1"]

    def test_zero_contrast_classes_indistinguishable(self):
        ds = synth_generate(SynthSpec(n_subjects=2, trials_per_class=40,
                                      contrast=0.0, seed=3))
        bp = band_power(ds, 8.0, 14.0).mean(axis=1)
        gap = abs(bp[ds.labels == 0].mean() - bp[ds.labels == 1].mean())
        spread = bp.std()
        assert gap < 0.5 * spread

    def test_high_contrast_band_power_rule(self):
        """Threshold on the designated channels separates >= 95% of trials."""
        ds = synth_generate(SynthSpec(n_subjects=4, trials_per_class=40,
                                      contrast=0.8, noise=0.3, seed=5))
        half = ds.n_channels // 2
        bp = band_power(ds, 8.0, 14.0)
        # class 0 suppresses the second half, class 1 the first half
        score = bp[:, half:].mean(axis=1) - bp[:, :half].mean(axis=1)
        pred = (score > 0).astype(int)
        assert (pred == ds.labels).mean() >= 0.95

    def test_three_class_rest(self):
        ds = synth_generate(SynthSpec(n_subjects=2, trials_per_class=4,
                                      n_classes=3))
        assert ds.class_names == ["left", "right", "rest"]
        assert set(np.unique(ds.labels)) == {0, 1, 2}

    def test_odd_trials_per_class_rejected(self):
        with pytest.raises(ConfigError):
            SynthSpec(trials_per_class=5)


class TestBalanceRest:
    def _with_rest(self, n_rest=100, n_mi=100):
        rng = np.random.default_rng(0)
        labels = np.array([0] * (n_mi // 2) + [1] * (n_mi // 2) + [2] * n_rest)
        n = len(labels)
        return EpochedDataset(
            data=rng.standard_normal((n, 2, 50)).astype(np.float32),
            labels=labels, subject_ids=np.zeros(n, dtype=np.int64),
            session_tags=np.zeros(n, dtype=np.int64), fs=100.0,
            channel_names=["A", "B"], class_names=["left", "right", "rest"])

    def test_counts(self):
        out = balance_rest(self._with_rest(), seed=0)
        assert int((out.labels == 2).sum()) == 50
        assert int((out.labels != 2).sum()) == 100

    def test_subset_without_duplication(self):
        ds = self._with_rest()
        out = balance_rest(ds, seed=1)
        rest_rows = out.data[out.labels == 2]
        src_rows = {r.tobytes() for r in ds.data[ds.labels == 2]}
        row_bytes = [r.tobytes() for r in rest_rows]
        assert len(set(row_bytes)) == len(row_bytes)
        assert all(r in src_rows for r in row_bytes)

    def test_seed_changes_subset_not_counts(self):
        ds = self._with_rest()
        a = balance_rest(ds, seed=0)
        b = balance_rest(ds, seed=99)
        assert a.n_trials == b.n_trials
        assert not np.array_equal(a.data, b.data)

    def test_no_rest_rejected(self):
        ds = make_dataset()
        with pytest.raises(ConfigError):
            balance_rest(ds, seed=0)
