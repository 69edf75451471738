"""Training loop (Adam + reduce-on-plateau + early stopping) and the
subject-dependent / subject-independent evaluation frameworks.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AUGMENTATIONS
from .dataio import EpochedDataset
from .errors import BatchCompositionError, ConfigError, TrainingDiverged
from .model import Min2Net, Min2NetConfig, build
from .nn import Adam


# ---------------------------------------------------------------------------
# configs and records

@dataclass
class TrainConfig:
    lr_start: float = 1e-3
    lr_floor: float = 1e-4
    lr_decay_factor: float = 0.5
    plateau_patience: int = 5
    earlystop_patience: int = 20
    batch_size: int = 10
    max_epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.lr_start <= 0 or self.lr_floor <= 0:
            raise ConfigError("learning rates must be positive")
        if self.lr_floor > self.lr_start:
            raise ConfigError("lr_floor must be <= lr_start")
        if not 0 < self.lr_decay_factor < 1:
            raise ConfigError("lr_decay_factor must be in (0, 1)")
        if self.plateau_patience < 1 or self.earlystop_patience < 1:
            raise ConfigError("patiences must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (triplet mining)")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")


LOSS_KEYS = ("mse", "triplet", "ce", "total")


@dataclass
class TrainHistory:
    """Per-epoch loss records; learning rate is non-increasing."""

    train: dict = field(default_factory=lambda: {k: [] for k in LOSS_KEYS})
    val: dict = field(default_factory=lambda: {k: [] for k in LOSS_KEYS})
    lr: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0

    def write_csv(self, path):
        """Fig-7-style per-epoch curves.  Wall time stays out of the file
        so reruns are byte-identical."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "lr"]
                       + [f"train_{k}" for k in LOSS_KEYS]
                       + [f"val_{k}" for k in LOSS_KEYS])
            for e in range(self.epochs_run):
                w.writerow([e + 1, f"{self.lr[e]:.10g}"]
                           + [f"{self.train[k][e]:.8g}" for k in LOSS_KEYS]
                           + [f"{self.val[k][e]:.8g}" for k in LOSS_KEYS])


# ---------------------------------------------------------------------------
# schedule monitors

class ImprovementMonitor:
    """Counts consecutive epochs without a strict decrease of the monitored
    value.  The first observation sets the baseline and counts as one
    non-improving epoch."""

    def __init__(self):
        self.best = None
        self.wait = 0

    def observe(self, value) -> bool:
        if self.best is None:
            self.best = value
            self.wait = 1
            return False
        if value < self.best:
            self.best = value
            self.wait = 0
            return True
        self.wait += 1
        return False


class PlateauScheduler:
    """Reduce-on-plateau: multiply the LR by ``factor`` after ``patience``
    epochs without validation improvement, never below ``floor``."""

    def __init__(self, lr_start, factor, patience, floor):
        self.lr = lr_start
        self.factor = factor
        self.patience = patience
        self.floor = floor
        self._monitor = ImprovementMonitor()

    def observe(self, val_loss):
        self._monitor.observe(val_loss)
        if self._monitor.wait >= self.patience:
            self.lr = max(self.lr * self.factor, self.floor)
            self._monitor.wait = 0
        return self.lr


class EarlyStopper:
    def __init__(self, patience):
        self.patience = patience
        self._monitor = ImprovementMonitor()

    def observe(self, val_loss) -> bool:
        self._monitor.observe(val_loss)
        return self._monitor.wait >= self.patience


# ---------------------------------------------------------------------------
# splits

def stratified_kfold(labels, k, seed):
    """k (train-idx, val-idx) pairs partitioning the index set with
    per-class counts across folds differing by at most one."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    classes = np.unique(labels)
    fold_members = [[] for _ in range(k)]
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise ConfigError(
                f"class {c} has {idx.size} members, fewer than k={k}")
        rng.shuffle(idx)
        for f, chunk in enumerate(np.array_split(idx, k)):
            fold_members[f].extend(chunk)
    folds = []
    all_idx = np.arange(labels.size)
    for f in range(k):
        val = np.sort(np.asarray(fold_members[f], dtype=int))
        train = np.setdiff1d(all_idx, val)
        folds.append((train, val))
    return folds


def loso_split(ds: EpochedDataset, test_session_prefix: str | None = None):
    """One fold per subject: train on every trial of the other subjects,
    test on the held-out subject's designated session."""
    subjects = np.unique(ds.subject_ids)
    if subjects.size < 2:
        raise ConfigError("leave-one-subject-out needs >= 2 subjects")
    test_mask = (ds.session_mask(test_session_prefix)
                 if test_session_prefix else np.ones(ds.n_trials, bool))
    folds = []
    for sid in subjects:
        mine = ds.subject_ids == sid
        test = np.flatnonzero(mine & test_mask)
        if test.size == 0:
            raise ConfigError(
                f"subject {sid} has no trials in the test-session filter")
        train = np.flatnonzero(~mine)
        folds.append((int(sid), train, test))
    return folds


# ---------------------------------------------------------------------------
# batching

def stratified_batches(labels, batch_size, rng):
    """Class-proportional interleaved batches so every batch supports
    triplet mining; a trailing degenerate batch is merged backwards."""
    labels = np.asarray(labels)
    keys = np.empty(labels.size)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(idx.size)
        keys[idx[perm]] = (np.arange(idx.size) + rng.uniform()) / idx.size
    order = np.argsort(keys, kind="stable")
    batches = [order[i : i + batch_size]
               for i in range(0, order.size, batch_size)]
    def valid(b):
        _, counts = np.unique(labels[b], return_counts=True)
        return counts.size >= 2 and counts.max() >= 2
    while len(batches) > 1 and not valid(batches[-1]):
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    if not batches or not valid(batches[0]):
        raise BatchCompositionError(
            "training set cannot form a batch with two classes")
    return batches


# ---------------------------------------------------------------------------
# training and evaluation

def _eval_losses(model, x, y):
    """Validation losses in infer mode (running BN statistics).

    A validation split too small to mine triplets (no class with two
    members) is scored with the triplet component at zero rather than
    rejected; training batches stay strict via the stratified sampler.
    """
    try:
        return model.loss_and_grad(x, y, train=False, with_grad=False)
    except BatchCompositionError:
        from .losses import cross_entropy_loss, mse_loss, total_loss
        z = model.encode(x, train=False)
        x_hat = model.decode(z, train=False)
        l_mse, _ = mse_loss(x, x_hat,
                            elementwise=model.config.mse_elementwise)
        l_ce, _ = cross_entropy_loss(y, model.classify(z))
        return {"mse": l_mse, "triplet": 0.0, "ce": l_ce,
                "total": total_loss(l_mse, 0.0, l_ce,
                                    model.config.loss_weights)}


def train(model: Min2Net, train_set, val_set, config: TrainConfig):
    """Optimize the joint loss; returns the history and leaves the model
    holding the best-validation-loss parameters."""
    tx, ty = train_set
    vx, vy = val_set
    opt = Adam(model.params, learning_rate=config.lr_start)
    sched = PlateauScheduler(config.lr_start, config.lr_decay_factor,
                             config.plateau_patience, config.lr_floor)
    stopper = EarlyStopper(config.earlystop_patience)
    history = TrainHistory()
    rng = np.random.default_rng(config.seed)
    best_val = np.inf
    best_state = model.clone_state()
    n = len(ty)
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        opt.learning_rate = sched.lr
        sums = {k: 0.0 for k in LOSS_KEYS}
        for batch in stratified_batches(ty, config.batch_size, rng):
            model.zero_grad()
            losses = model.loss_and_grad(tx[batch], ty[batch], train=True)
            if not np.isfinite(losses["total"]):
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch}",
                    params=best_state, history=history)
            opt.step()
            for k in LOSS_KEYS:
                sums[k] += losses[k] * batch.size
        val_losses = _eval_losses(model, vx, vy)
        if not np.isfinite(val_losses["total"]):
            raise TrainingDiverged(
                f"non-finite validation loss at epoch {epoch}",
                params=best_state, history=history)
        for k in LOSS_KEYS:
            history.train[k].append(sums[k] / n)
            history.val[k].append(val_losses[k])
        history.lr.append(opt.learning_rate)
        history.wall_time.append(time.perf_counter() - t0)
        history.epochs_run = epoch
        if val_losses["total"] < best_val:
            best_val = val_losses["total"]
            best_state = model.clone_state()
            history.best_epoch = epoch
        stop = stopper.observe(val_losses["total"])
        sched.observe(val_losses["total"])
        if stop:
            break
    model.load_state(best_state)
    return history


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray          # (N, N) integer counts, rows = true
    precision: list
    recall: list
    f1: list
    macro_f1: float


def evaluate(model: Min2Net, x, y) -> Metrics:
    if len(y) == 0:
        raise ConfigError("test set is empty")
    pred = model.predict(x)
    return compute_metrics(y, pred, model.config.n_classes)


def compute_metrics(y_true, y_pred, n_classes) -> Metrics:
    """Exact counting metrics; the confusion matrix holds integer counts."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    accuracy = cm.trace() / cm.sum()
    precision, recall, f1 = [], [], []
    for c in range(n_classes):
        tp = cm[c, c]
        p = tp / cm[:, c].sum() if cm[:, c].sum() else 0.0
        r = tp / cm[c, :].sum() if cm[c, :].sum() else 0.0
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(2 * p * r / (p + r)) if (p + r) else 0.0)
    return Metrics(accuracy=float(accuracy), confusion=cm,
                   precision=precision, recall=recall, f1=f1,
                   macro_f1=float(np.mean(f1)))


# ---------------------------------------------------------------------------
# experiment orchestration

@dataclass
class FoldResult:
    subject: int
    fold: int
    metrics: Metrics | None
    epochs_run: int = 0
    best_epoch: int = 0
    failed: str | None = None


@dataclass
class ExperimentResult:
    scheme: str
    n_classes: int
    folds: list
    histories: dict  # (subject, fold) -> TrainHistory

    def aggregate(self):
        ok = [f for f in self.folds if f.metrics is not None]
        acc = np.array([f.metrics.accuracy for f in ok])
        f1 = np.array([f.metrics.macro_f1 for f in ok])
        by_subject = {}
        for f in ok:
            by_subject.setdefault(f.subject, []).append(f.metrics.accuracy)
        subj_means = np.array([np.mean(v) for v in by_subject.values()])
        def stats(a):
            return {"mean": float(a.mean()) if a.size else float("nan"),
                    "sd": float(a.std(ddof=1)) if a.size > 1 else 0.0}
        return {
            "n_folds": len(ok),
            "n_failed": len(self.folds) - len(ok),
            "accuracy_over_folds": stats(acc),
            "macro_f1_over_folds": stats(f1),
            "accuracy_over_subjects": stats(subj_means),
        }


def _fold_seed(base_seed, subject, fold):
    # stable per (subject, fold), independent of execution order
    return int(np.random.SeedSequence(
        entropy=base_seed, spawn_key=(subject, fold)).generate_state(1)[0])


def _augment_training(ds, indices, augment, seed):
    """One augmented copy per original per enabled transform, appended to
    the training split only."""
    pool = ds.subset(indices)
    parts = [pool]
    for i, name in enumerate(augment):
        if name not in AUGMENTATIONS:
            raise ConfigError(f"unknown augmentation {name!r}; "
                              f"choose from {sorted(AUGMENTATIONS)}")
        parts.append(AUGMENTATIONS[name](pool, seed + 1000 + i))
    data = np.concatenate([p.data for p in parts])
    labels = np.concatenate([p.labels for p in parts])
    return data, labels


def _run_fold(args):
    (subject, fold, model_config, train_config, seed, ckpt_dir,
     train_x, train_y, val_x, val_y, test_x, test_y) = args
    model = build(model_config, seed=seed)
    cfg = TrainConfig(**{**train_config.__dict__, "seed": seed})
    try:
        history = train(model, (train_x, train_y), (val_x, val_y), cfg)
        metrics = evaluate(model, test_x, test_y)
        if ckpt_dir is not None:
            from .checkpoint import checkpoint_save
            checkpoint_save(model,
                            Path(ckpt_dir) / f"model_{subject}_{fold}.mn2c")
        return FoldResult(subject, fold, metrics, history.epochs_run,
                          history.best_epoch), history
    except TrainingDiverged as exc:
        return FoldResult(subject, fold, None,
                          failed=str(exc)), exc.history or TrainHistory()


def run_experiment(ds: EpochedDataset, scheme: str,
                   train_config: TrainConfig, model_config: Min2NetConfig,
                   out_dir=None, *, k=5,
                   train_session_prefix: str = "offline",
                   test_session_prefix: str = "online",
                   augment=(), jobs: int = 1,
                   save_checkpoints: bool = False) -> ExperimentResult:
    """Run the full evaluation protocol.

    dependent: per subject, stratified k-fold over the training session,
    test on the held-out session.  independent: LOSO outer loop with an
    inner stratified k-fold over the pooled training subjects.  Either way
    each subject contributes k trained models.
    """
    if scheme not in ("dependent", "independent"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    x_all = ds.model_input()
    specs = []
    if scheme == "independent":
        for sid, train_idx, test_idx in loso_split(ds, test_session_prefix):
            inner = stratified_kfold(ds.labels[train_idx], k,
                                     _fold_seed(train_config.seed, sid, 999))
            for fold, (tr, va) in enumerate(inner):
                specs.append((sid, fold, train_idx[tr], train_idx[va], test_idx))
    else:
        train_mask = ds.session_mask(train_session_prefix)
        test_mask = ds.session_mask(test_session_prefix)
        for sid in np.unique(ds.subject_ids):
            mine = ds.subject_ids == sid
            pool = np.flatnonzero(mine & train_mask)
            test_idx = np.flatnonzero(mine & test_mask)
            if pool.size == 0 or test_idx.size == 0:
                raise ConfigError(
                    f"subject {sid}: dependent scheme needs both a training "
                    f"session ({train_session_prefix}*) and a test session "
                    f"({test_session_prefix}*)")
            inner = stratified_kfold(ds.labels[pool], k,
                                     _fold_seed(train_config.seed, int(sid), 999))
            for fold, (tr, va) in enumerate(inner):
                specs.append((int(sid), fold, pool[tr], pool[va], test_idx))

    ckpt_dir = None
    if save_checkpoints:
        if out_dir is None:
            raise ConfigError("save_checkpoints requires out_dir")
        ckpt_dir = Path(out_dir)
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    def materialize(spec):
        sid, fold, tr_idx, va_idx, te_idx = spec
        seed = _fold_seed(train_config.seed, sid, fold)
        if augment:
            tr_data, tr_y = _augment_training(ds, tr_idx, augment, seed)
            tr_x = np.ascontiguousarray(
                tr_data.transpose(0, 2, 1)[:, None, :, :])
        else:
            tr_x, tr_y = x_all[tr_idx], ds.labels[tr_idx]
        return (sid, fold, model_config, train_config, seed, ckpt_dir,
                tr_x, tr_y, x_all[va_idx], ds.labels[va_idx],
                x_all[te_idx], ds.labels[te_idx])

    tasks = [materialize(s) for s in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_run_fold, tasks))
    else:
        outcomes = [_run_fold(t) for t in tasks]

    folds = [o[0] for o in outcomes]
    histories = {(o[0].subject, o[0].fold): o[1] for o in outcomes}
    result = ExperimentResult(scheme=scheme,
                              n_classes=model_config.n_classes,
                              folds=folds, histories=histories)
    if out_dir is not None:
        write_results(result, out_dir)
    return result


def write_results(result: ExperimentResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = result.n_classes
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "subject", "fold", "accuracy", "macro_f1"]
                   + [f"f1_class_{c}" for c in range(n)]
                   + ["epochs_run", "best_epoch", "failed"])
        for f in result.folds:
            if f.metrics is None:
                w.writerow([result.scheme, f.subject, f.fold, "", ""]
                           + [""] * n + [f.epochs_run, f.best_epoch, f.failed])
            else:
                w.writerow([result.scheme, f.subject, f.fold,
                            f"{f.metrics.accuracy:.6f}",
                            f"{f.metrics.macro_f1:.6f}"]
                           + [f"{v:.6f}" for v in f.metrics.f1]
                           + [f.epochs_run, f.best_epoch, ""])
    payload = {
        "scheme": result.scheme,
        "aggregate": result.aggregate(),
        "folds": [
            {
                "subject": f.subject, "fold": f.fold,
                "failed": f.failed, "epochs_run": f.epochs_run,
                "best_epoch": f.best_epoch,
                **({"accuracy": f.metrics.accuracy,
                    "macro_f1": f.metrics.macro_f1,
                    "precision": f.metrics.precision,
                    "recall": f.metrics.recall,
                    "f1": f.metrics.f1,
                    "confusion": f.metrics.confusion.tolist()}
                   if f.metrics is not None else {}),
            }
            for f in result.folds
        ],
    }
    (out / "results.json").write_text(json.dumps(payload, indent=2))
    for (subject, fold), hist in result.histories.items():
        hist.write_csv(out / f"history_{subject}_{fold}.csv")


def export_latents(model: Min2Net, ds: EpochedDataset, path,
                   batch_size: int = 256):
    """One CSV row per trial: subject, trial, label, z1..z_latent
    (infer-mode encoding)."""
    x = ds.model_input()
    zdim = model.config.latent_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "trial", "label"]
                   + [f"z{i + 1}" for i in range(zdim)])
        for i in range(0, ds.n_trials, batch_size):
            z = model.encode(x[i : i + batch_size], train=False)
            for j, row in enumerate(z):
                t = i + j
                w.writerow([int(ds.subject_ids[t]), t, int(ds.labels[t])]
                           + [f"{v:.7g}" for v in row])
