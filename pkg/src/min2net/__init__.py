"""MIN2Net-style motor-imagery EEG toolkit: numpy network kernels, the
multi-task model, signal preprocessing, dataset I/O, and evaluation
protocols."""

from .checkpoint import checkpoint_load, checkpoint_save
from .dataio import EpochedDataset, balance_rest, concat_datasets, read_dataset, write_dataset
from .errors import (
    BatchCompositionError,
    ConfigError,
    IntegrityError,
    ShapeError,
    TrainingDiverged,
)
from .filters import FilterSpec, butter_bandpass, filtfilt, resample
from .harness import (
    Metrics,
    TrainConfig,
    TrainHistory,
    evaluate,
    export_latents,
    loso_split,
    run_experiment,
    stratified_kfold,
    train,
)
from .model import Min2Net, Min2NetConfig, build
from .preproc import preprocess_pipeline
from .rawio import RawRecording, read_mirw, read_raw_layout, write_mirw, write_raw_layout
from .synth import SynthSpec, synth_generate

__version__ = "1.0.0"

__all__ = [
    "BatchCompositionError",
    "ConfigError",
    "EpochedDataset",
    "FilterSpec",
    "IntegrityError",
    "Metrics",
    "Min2Net",
    "Min2NetConfig",
    "RawRecording",
    "ShapeError",
    "SynthSpec",
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "balance_rest",
    "build",
    "butter_bandpass",
    "checkpoint_load",
    "checkpoint_save",
    "concat_datasets",
    "evaluate",
    "export_latents",
    "filtfilt",
    "loso_split",
    "preprocess_pipeline",
    "read_dataset",
    "read_mirw",
    "read_raw_layout",
    "resample",
    "run_experiment",
    "stratified_kfold",
    "synth_generate",
    "train",
    "write_dataset",
    "write_mirw",
    "write_raw_layout",
]
