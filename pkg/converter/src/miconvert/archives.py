"""Dataset-specific knowledge: file naming, loaders, event-code maps.

Three public archives are supported.  Event-code-to-class mappings come
from each dataset's official documentation:

* OpenBMI (Korea University): per-subject MATLAB files
  ``sess{SS}_subj{NN}_EEG_MI.mat`` holding ``EEG_MI_train`` (offline
  phase) and ``EEG_MI_test`` (online feedback phase) structs with fields
  ``x`` (time x channels), ``t`` (1-based stimulus onsets), ``y_dec``
  (1 = right hand, 2 = left hand), ``chan`` (channel labels) and ``fs``.
  Both classic and v7.3 (HDF5) MAT files are handled.

* BCI Competition IV 2a (Graz): GDF files ``A{NN}T.gdf`` (training day)
  and ``A{NN}E.gdf`` (evaluation day).  MI cue codes: 769 left hand,
  770 right hand, 771 feet, 772 tongue.  The raw event table is kept in
  full; only the left/right codes are entered in the class map.

* SMR-BCI (Graz, two-class hand/feet): MATLAB files ``S{NN}T.mat``
  (100 trials, no feedback) and ``S{NN}E.mat`` (60 trials, with
  feedback), each holding ``data`` as a cell array of run structs with
  fields ``X`` (samples x channels), ``trial`` (1-based onsets), ``y``
  (1 = right hand, 2 = feet) and ``fs``.  Runs are concatenated into
  one continuous recording per session.

Conversion is raw-fidelity: native sampling rate, full channel set, no
filtering.  All selection happens downstream in the preprocessing step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import h5py
import numpy as np
import scipy.io

from .errors import ConversionError, MalformedFileError
from .gdf import read_gdf
from .mirw import Recording


@dataclass
class DatasetSpec:
    kind: str
    n_subjects: int
    fs: float
    n_channels: int
    mi_trials_per_subject: int  # class-mapped events across all sessions
    event_map: dict  # raw code -> class name
    class_names: list
    sessions: list  # (session name, source tag) in conversion order
    required_channels: list = field(default_factory=list)


OPENBMI = DatasetSpec(
    kind="openbmi", n_subjects=54, fs=1000.0, n_channels=62,
    mi_trials_per_subject=400,
    event_map={1: "right", 2: "left"},
    class_names=["left", "right"],
    sessions=[("offline-1", ("sess01", "EEG_MI_train")),
              ("online-1", ("sess01", "EEG_MI_test")),
              ("offline-2", ("sess02", "EEG_MI_train")),
              ("online-2", ("sess02", "EEG_MI_test"))],
    required_channels=["FC5", "FC3", "FC1", "FC2", "FC4", "FC6",
                       "C5", "C3", "C1", "Cz", "C2", "C4", "C6",
                       "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6"])

BCIC2A = DatasetSpec(
    kind="bcic2a", n_subjects=9, fs=250.0, n_channels=25,  # 22 EEG + 3 EOG
    mi_trials_per_subject=144,  # left+right across both days
    event_map={769: "left", 770: "right"},
    class_names=["left", "right"],
    sessions=[("offline-1", "T"), ("online-1", "E")])

SMRBCI = DatasetSpec(
    kind="smrbci", n_subjects=14, fs=512.0, n_channels=15,
    mi_trials_per_subject=160,  # 100 without + 60 with feedback
    event_map={1: "right_hand", 2: "feet"},
    class_names=["right_hand", "feet"],
    sessions=[("offline-1", "T"), ("online-1", "E")])

DATASETS = {spec.kind: spec for spec in (OPENBMI, BCIC2A, SMRBCI)}


@dataclass
class ArchiveDescriptor:
    """What to convert: which archive, where it lives, which slice."""

    kind: str
    source: Path
    subjects: list | None = None  # 1-based subject numbers; None = all
    sessions: list | None = None  # session names; None = all

    def __post_init__(self):
        if self.kind not in DATASETS:
            raise ConversionError(
                f"unknown dataset kind {self.kind!r}; "
                f"choose from {sorted(DATASETS)}")
        self.source = Path(self.source)
        spec = DATASETS[self.kind]
        if self.subjects is None:
            self.subjects = list(range(1, spec.n_subjects + 1))
        for s in self.subjects:
            if not 1 <= s <= spec.n_subjects:
                raise ConversionError(
                    f"subject {s} outside 1..{spec.n_subjects} for {self.kind}")
        known = [name for name, _ in spec.sessions]
        if self.sessions is None:
            self.sessions = known
        for name in self.sessions:
            if name not in known:
                raise ConversionError(
                    f"unknown session {name!r}; choose from {known}")

    @property
    def spec(self) -> DatasetSpec:
        return DATASETS[self.kind]


# ---------------------------------------------------------------------------
# MAT helpers (classic and v7.3)

def _load_mat(path):
    """Load a MAT file as a dict of variables, whichever container it uses."""
    if h5py.is_hdf5(path):  # v7.3 container
        return h5py.File(path, "r")
    try:
        return scipy.io.loadmat(path, struct_as_record=False, squeeze_me=True)
    except (NotImplementedError, ValueError, OSError) as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc


def _h5_string(fh, obj):
    """Decode a MATLAB char array (possibly behind an object reference)."""
    if isinstance(obj, h5py.Reference):
        obj = fh[obj]
    arr = np.asarray(obj).ravel()
    return "".join(chr(int(c)) for c in arr)


def _h5_array(fh, obj):
    if isinstance(obj, h5py.Reference):
        obj = fh[obj]
    return np.asarray(obj)


# ---------------------------------------------------------------------------
# OpenBMI

def _openbmi_struct(container, path, varname):
    if isinstance(container, h5py.File):
        if varname not in container:
            raise MalformedFileError(f"{path}: missing variable {varname!r}")
        grp = container[varname]
        x = _h5_array(container, grp["x"]).astype(np.float64)
        # MATLAB column-major storage arrives transposed: (channels, time)
        if x.shape[0] > x.shape[1]:
            x = x.T
        onsets = _h5_array(container, grp["t"]).ravel().astype(np.int64)
        labels = _h5_array(container, grp["y_dec"]).ravel().astype(np.int64)
        fs = float(np.asarray(grp["fs"]).ravel()[0])
        chan = [_h5_string(container, ref)
                for ref in np.asarray(grp["chan"]).ravel()]
        return x, onsets, labels, fs, chan
    if varname not in container:
        raise MalformedFileError(f"{path}: missing variable {varname!r}")
    st = container[varname]
    try:
        x = np.asarray(st.x, dtype=np.float64)
        if x.shape[0] > x.shape[1]:
            x = x.T  # stored (time, channels)
        onsets = np.atleast_1d(st.t).astype(np.int64)
        labels = np.atleast_1d(st.y_dec).astype(np.int64)
        fs = float(np.ravel(st.fs)[0])
        chan = [str(c) for c in np.atleast_1d(st.chan)]
    except AttributeError as exc:
        raise MalformedFileError(f"{path}: {varname} lacks field {exc}")
    return x, onsets, labels, fs, chan


def load_openbmi_session(source: Path, subject: int, session_name: str,
                         source_tag) -> Recording:
    sess_dir, varname = source_tag
    path = source / f"{sess_dir}_subj{subject:02d}_EEG_MI.mat"
    if not path.exists():
        raise FileNotFoundError(path)
    container = _load_mat(path)
    try:
        x, onsets, labels, fs, chan = _openbmi_struct(container, path, varname)
    finally:
        if isinstance(container, h5py.File):
            container.close()
    if len(onsets) != len(labels):
        raise MalformedFileError(
            f"{path}: {len(onsets)} onsets vs {len(labels)} labels")
    events = [(int(t) - 1, int(y)) for t, y in zip(onsets, labels)]
    return Recording(samples=x, fs=fs, channel_names=chan, events=events,
                     subject_id=subject, session=session_name)


# ---------------------------------------------------------------------------
# BCI Competition IV 2a

def load_bcic2a_session(source: Path, subject: int, session_name: str,
                        source_tag) -> Recording:
    path = source / f"A{subject:02d}{source_tag}.gdf"
    if not path.exists():
        raise FileNotFoundError(path)
    gdf = read_gdf(path)
    return Recording(samples=gdf.samples, fs=gdf.fs,
                     channel_names=gdf.channel_names, events=gdf.events,
                     subject_id=subject, session=session_name)


# ---------------------------------------------------------------------------
# SMR-BCI

def load_smrbci_session(source: Path, subject: int, session_name: str,
                        source_tag) -> Recording:
    path = source / f"S{subject:02d}{source_tag}.mat"
    if not path.exists():
        raise FileNotFoundError(path)
    container = _load_mat(path)
    if isinstance(container, h5py.File):
        container.close()
        raise MalformedFileError(
            f"{path}: v7.3 SMR-BCI files are not part of the archive")
    if "data" not in container:
        raise MalformedFileError(f"{path}: missing variable 'data'")
    runs = np.atleast_1d(container["data"])
    chunks, events, fs = [], [], None
    offset = 0
    for run in runs:
        try:
            x = np.asarray(run.X, dtype=np.float64)
            onsets = np.atleast_1d(run.trial).astype(np.int64)
            labels = np.atleast_1d(run.y).astype(np.int64)
            run_fs = float(np.ravel(run.fs)[0])
        except AttributeError as exc:
            raise MalformedFileError(f"{path}: run lacks field {exc}")
        if x.ndim != 2:
            raise MalformedFileError(f"{path}: run X must be 2-D")
        if x.shape[0] < x.shape[1]:
            x = x.T  # want (samples, channels)
        if fs is None:
            fs = run_fs
        elif run_fs != fs:
            raise MalformedFileError(f"{path}: runs disagree on fs")
        chunks.append(x)
        events.extend((int(t) - 1 + offset, int(y))
                      for t, y in zip(onsets, labels))
        offset += x.shape[0]
    samples = np.concatenate(chunks, axis=0).T  # (channels, samples)
    names = [f"EEG-{i + 1:02d}" for i in range(samples.shape[0])]
    return Recording(samples=samples, fs=fs, channel_names=names,
                     events=events, subject_id=subject, session=session_name)


LOADERS = {
    "openbmi": load_openbmi_session,
    "bcic2a": load_bcic2a_session,
    "smrbci": load_smrbci_session,
}
