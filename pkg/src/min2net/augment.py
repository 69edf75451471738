"""Time-series augmentations for training-pool expansion: jittering,
scaling, magnitude warping, time warping, and segment permutation.

Every transform preserves (n_trials, C, T), labels, subject ids, session
tags, and fs, and is deterministic per seed.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy.interpolate import CubicSpline

from .dataio import EpochedDataset
from .errors import ConfigError


def _out(ds, data):
    return replace(ds, data=data.astype(np.float32))


def augment_jitter(ds: EpochedDataset, sigma: float, seed: int) -> EpochedDataset:
    """Additive Gaussian noise, stdev = sigma x the per-trial, per-channel
    signal stdev."""
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0:
        return _out(ds, ds.data.copy())
    rng = np.random.default_rng(seed)
    scale = ds.data.std(axis=2, keepdims=True)
    noise = rng.standard_normal(ds.data.shape) * (sigma * scale)
    return _out(ds, ds.data + noise)


def augment_scale(ds: EpochedDataset, sigma: float, seed: int) -> EpochedDataset:
    """One multiplicative factor ~ N(1, sigma^2) per trial."""
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0:
        return _out(ds, ds.data.copy())
    rng = np.random.default_rng(seed)
    factors = 1.0 + sigma * rng.standard_normal(ds.n_trials)
    return _out(ds, ds.data * factors[:, None, None])


def _smooth_curve(rng, sigma, knots, n_samples):
    """Cubic spline through `knots` values ~ N(1, sigma^2) at evenly
    spaced positions, evaluated at every sample."""
    x = np.linspace(0, n_samples - 1, knots)
    y = 1.0 + sigma * rng.standard_normal(knots)
    return CubicSpline(x, y)(np.arange(n_samples))


def augment_magwarp(ds: EpochedDataset, sigma: float, knots: int,
                    seed: int) -> EpochedDataset:
    """Smooth per-trial amplitude envelope applied to all channels."""
    if sigma < 0 or knots < 2:
        raise ConfigError("need sigma >= 0 and knots >= 2")
    if sigma == 0:
        return _out(ds, ds.data.copy())
    rng = np.random.default_rng(seed)
    out = np.empty_like(ds.data)
    for i in range(ds.n_trials):
        env = _smooth_curve(rng, sigma, knots, ds.n_samples)
        out[i] = ds.data[i] * env[None, :]
    return _out(ds, out)


def augment_timewarp(ds: EpochedDataset, sigma: float, knots: int,
                     seed: int) -> EpochedDataset:
    """Smooth monotone time re-parameterization from knot speeds
    ~ N(1, sigma^2), resampled back to length T with fixed endpoints."""
    if sigma < 0 or knots < 2:
        raise ConfigError("need sigma >= 0 and knots >= 2")
    if sigma == 0:
        return _out(ds, ds.data.copy())
    rng = np.random.default_rng(seed)
    T = ds.n_samples
    grid = np.arange(T)
    out = np.empty_like(ds.data)
    for i in range(ds.n_trials):
        speeds = np.maximum(_smooth_curve(rng, sigma, knots, T), 0.05)
        tau = np.concatenate([[0.0], np.cumsum(speeds[:-1])])
        tau *= (T - 1) / tau[-1]  # endpoints land exactly on 0 and T-1
        for c in range(ds.n_channels):
            out[i, c] = np.interp(tau, grid, ds.data[i, c])
    return _out(ds, out)


def augment_permute(ds: EpochedDataset, n_segments: int,
                    seed: int) -> EpochedDataset:
    """Split the time axis into equal blocks and apply one random block
    permutation per trial, jointly across channels."""
    if n_segments < 1 or ds.n_samples % n_segments != 0:
        raise ConfigError(
            f"n_segments {n_segments} must divide n_samples {ds.n_samples}")
    rng = np.random.default_rng(seed)
    seg = ds.n_samples // n_segments
    out = np.empty_like(ds.data)
    for i in range(ds.n_trials):
        order = rng.permutation(n_segments)
        blocks = ds.data[i].reshape(ds.n_channels, n_segments, seg)
        out[i] = blocks[:, order, :].reshape(ds.n_channels, ds.n_samples)
    return _out(ds, out)


AUGMENTATIONS = {
    "jitter": lambda ds, seed, sigma=0.1, knots=4, segments=4:
        augment_jitter(ds, sigma, seed),
    "scale": lambda ds, seed, sigma=0.1, knots=4, segments=4:
        augment_scale(ds, sigma, seed),
    "magwarp": lambda ds, seed, sigma=0.1, knots=4, segments=4:
        augment_magwarp(ds, sigma, knots, seed),
    "timewarp": lambda ds, seed, sigma=0.1, knots=4, segments=4:
        augment_timewarp(ds, sigma, knots, seed),
    "permute": lambda ds, seed, sigma=0.1, knots=4, segments=4:
        augment_permute(ds, segments, seed),
}
