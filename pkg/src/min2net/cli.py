"""Command-line front end: synth, preprocess, run, export-latents.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration.  The env
var MIN2NET_SEED overrides any configured seed; flags override config
files; the fully resolved configuration is echoed into the output
directory for provenance.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .checkpoint import checkpoint_load
from .dataio import concat_datasets, read_dataset, write_dataset
from .errors import ConfigError, IntegrityError
from .filters import FilterSpec
from .harness import TrainConfig, export_latents, run_experiment
from .model import Min2NetConfig
from .preproc import preprocess_pipeline
from .rawio import read_raw_layout, read_raw_manifest
from .synth import SynthSpec, synth_generate


def _load_toml(path, allowed, what):
    """Parse a flat TOML document, rejecting unknown keys."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown {what} keys {unknown}; "
                          f"allowed: {sorted(allowed)}")
    return doc


def _field_names(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _seed_override(seed):
    env = os.environ.get("MIN2NET_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"MIN2NET_SEED={env!r} is not an integer")


def _echo_config(out_dir, resolved):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True, default=str))
    print("resolved config:")
    for line in json.dumps(resolved, indent=2, sort_keys=True,
                           default=str).splitlines():
        print("  " + line)


def _parse_pair(text, flag, cast=float):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects low:high, got {text!r}")
    try:
        return cast(parts[0]), cast(parts[1])
    except ValueError:
        raise ConfigError(f"{flag} expects numbers, got {text!r}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    fields = _field_names(SynthSpec)
    doc = _load_toml(args.spec, fields, "synth") if args.spec else {}
    doc["seed"] = _seed_override(doc.get("seed", SynthSpec.seed))
    spec = SynthSpec(**doc)
    ds = synth_generate(spec)
    write_dataset(ds, args.out)
    _echo_config(args.out, dataclasses.asdict(spec))
    counts = {name: int((ds.labels == i).sum())
              for i, name in enumerate(ds.class_names)}
    print(f"wrote {ds.n_trials} trials ({ds.n_channels} ch x "
          f"{ds.n_samples} samples @ {ds.fs:g} Hz), "
          f"{spec.n_subjects} subjects, classes {counts} -> {args.out}")
    return 0


def cmd_preprocess(args) -> int:
    low, high = _parse_pair(args.band, "--band")
    window = _parse_pair(args.window, "--window")
    manifest = read_raw_manifest(args.input)
    channels = None
    if args.channels:
        channels = [ln.strip() for ln in
                    Path(args.channels).read_text().splitlines() if ln.strip()]
    event_map = {int(k): v for k, v in manifest["event_map"].items()}
    class_names = list(manifest["class_names"])
    class_map = {code: class_names.index(name)
                 for code, name in event_map.items()}
    sessions = sorted({item["session"]
                       for sub in manifest["subjects"]
                       for item in sub["recordings"]})
    parts = []
    for rec in read_raw_layout(args.input):
        band = FilterSpec(args.order, low, high, rec.fs)
        parts.append(preprocess_pipeline(
            rec, band, args.fs, channels, window, class_map, class_names,
            sessions=sessions))
        print(f"subject {rec.subject_id:3d} session {rec.session}: "
              f"{parts[-1].n_trials} trials")
    ds = concat_datasets(parts)
    ds.name = manifest["dataset"]
    write_dataset(ds, args.out)
    _echo_config(args.out, {
        "input": args.input, "band": [low, high], "order": args.order,
        "target_fs": args.fs, "window": list(window),
        "channels": channels, "out": args.out,
    })
    print(f"wrote {ds.n_trials} trials ({ds.n_channels} ch x "
          f"{ds.n_samples} samples @ {ds.fs:g} Hz) -> {args.out}")
    return 0


RUN_TOP_KEYS = {"scheme", "seed", "k", "jobs", "augment", "model", "train"}


def cmd_run(args) -> int:
    doc = {}
    if args.config:
        doc = _load_toml(args.config, RUN_TOP_KEYS, "run")
        for section, cls in (("model", Min2NetConfig), ("train", TrainConfig)):
            unknown = sorted(set(doc.get(section, {})) - _field_names(cls))
            if unknown:
                raise ConfigError(
                    f"{args.config}: unknown [{section}] keys {unknown}")
    ds = read_dataset(args.data)
    scheme = args.scheme or doc.get("scheme")
    if scheme is None:
        raise ConfigError("--scheme (or config key 'scheme') is required")
    train_kw = dict(doc.get("train", {}))
    train_kw["seed"] = _seed_override(
        args.seed if args.seed is not None else train_kw.get("seed", 0))
    train_config = TrainConfig(**train_kw)
    model_kw = dict(doc.get("model", {}))
    model_kw.setdefault("n_channels", ds.n_channels)
    model_kw.setdefault("n_samples", ds.n_samples)
    model_kw.setdefault("n_classes", len(ds.class_names))
    if "loss_weights" in model_kw:
        model_kw["loss_weights"] = tuple(model_kw["loss_weights"])
    model_config = Min2NetConfig(**model_kw)
    augment = ([a for a in args.augment.split(",") if a] if args.augment
               else list(doc.get("augment", [])))
    k = args.k if args.k is not None else int(doc.get("k", 5))
    jobs = args.jobs if args.jobs is not None else int(doc.get("jobs", 1))
    _echo_config(args.out, {
        "data": args.data, "scheme": scheme, "k": k, "jobs": jobs,
        "augment": augment,
        "model": dataclasses.asdict(model_config),
        "train": dataclasses.asdict(train_config),
    })
    result = run_experiment(
        ds, scheme, train_config, model_config, args.out, k=k,
        augment=augment, jobs=jobs, save_checkpoints=args.save_checkpoints)
    agg = result.aggregate()
    print(f"{scheme}: {agg['n_folds']} folds"
          + (f" ({agg['n_failed']} failed)" if agg["n_failed"] else ""))
    for key, label in (("accuracy_over_folds", "accuracy (over folds)"),
                       ("macro_f1_over_folds", "macro-F1 (over folds)"),
                       ("accuracy_over_subjects", "accuracy (over subjects)")):
        s = agg[key]
        print(f"  {label}: {100 * s['mean']:.2f} +/- {100 * s['sd']:.2f}")
    print(f"results -> {args.out}/results.csv")
    return 0


def cmd_export_latents(args) -> int:
    ds = read_dataset(args.data)
    model = checkpoint_load(args.checkpoint)
    cfg = model.config
    if cfg.n_channels != ds.n_channels or cfg.n_samples != ds.n_samples:
        raise ConfigError(
            f"checkpoint expects {cfg.n_channels} ch x {cfg.n_samples} "
            f"samples, dataset has {ds.n_channels} ch x {ds.n_samples}")
    export_latents(model, ds, args.out)
    print(f"wrote {ds.n_trials} latent rows (dim {cfg.latent_dim}) "
          f"-> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="min2net",
        description="Motor-imagery EEG classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", default=None,
                   help="TOML file of generator settings (default: built-ins)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess",
                       help="canonical-raw recordings -> epoched dataset")
    p.add_argument("--in", dest="input", required=True,
                   help="canonical-raw directory (manifest.json + .mirw)")
    p.add_argument("--band", default="8:30",
                   help="band-pass edges in Hz as low:high (default 8:30)")
    p.add_argument("--order", type=int, default=5,
                   help="Butterworth order (default 5)")
    p.add_argument("--fs", type=float, default=100.0,
                   help="target sampling rate in Hz (default 100)")
    p.add_argument("--window", default="0:4",
                   help="epoch window in seconds after onset (default 0:4)")
    p.add_argument("--channels", default=None,
                   help="file with one channel name per line (default: all)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("run", help="train and evaluate on a dataset")
    p.add_argument("--data", required=True, help="epoched dataset directory")
    p.add_argument("--scheme", choices=["dependent", "independent"],
                   default=None, help="evaluation scheme")
    p.add_argument("--config", default=None,
                   help="TOML file with [model]/[train] sections")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--augment", default=None,
                   help="comma list: jitter,scale,magwarp,timewarp,permute")
    p.add_argument("--seed", type=int, default=None,
                   help="base seed (overrides config)")
    p.add_argument("--k", type=int, default=None,
                   help="inner folds per subject (default 5)")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel fold workers (default 1)")
    p.add_argument("--save-checkpoints", action="store_true",
                   help="write one .mn2c checkpoint per fold")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export-latents",
                       help="encode a dataset with a trained checkpoint")
    p.add_argument("--checkpoint", required=True, help=".mn2c checkpoint")
    p.add_argument("--data", required=True, help="epoched dataset directory")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_export_latents)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
