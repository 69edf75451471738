"""The three training losses and online semi-hard triplet mining.

Each loss returns ``(value, grad)`` where the gradient is with respect to
the prediction argument, already including the batch-mean factor.
"""

from __future__ import annotations

import numpy as np

from .errors import BatchCompositionError, ShapeError

LOG_FLOOR = 1e-12


def mse_loss(x, x_hat, elementwise=False):
    """Reconstruction error.

    Default reduction: per trial, mean over channels of the squared error
    summed along the time axis; then mean over the batch.  With
    ``elementwise=True`` the plain element mean is used instead.
    """
    x = np.asarray(x)
    x_hat = np.asarray(x_hat)
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    r = x_hat - x
    if elementwise:
        loss = float(np.mean(r * r))
        grad = 2.0 * r / r.size
    else:
        B, C = x.shape[0], x.shape[-1]
        loss = float(np.sum(r * r) / (B * C))
        grad = 2.0 * r / (B * C)
    return loss, grad


def cross_entropy_loss(y, y_hat):
    """Mean negative log probability of the true class.

    ``y_hat`` rows must already be probability vectors (post-softmax);
    probabilities are floored at 1e-12 before the log.
    """
    y_hat = np.asarray(y_hat)
    y = np.asarray(y)
    if y_hat.ndim != 2 or y.shape != (y_hat.shape[0],):
        raise ShapeError(f"labels {y.shape} do not match predictions {y_hat.shape}")
    n_classes = y_hat.shape[1]
    if np.any((y < 0) | (y >= n_classes)):
        bad = y[(y < 0) | (y >= n_classes)][0]
        raise ValueError(f"label {bad} outside 0..{n_classes - 1}")
    B = y_hat.shape[0]
    p = np.maximum(y_hat[np.arange(B), y], LOG_FLOOR)
    loss = float(-np.log(p).mean())
    grad = np.zeros_like(y_hat)
    grad[np.arange(B), y] = -1.0 / (p * B)
    return loss, grad


def _pairwise_sq_dists(z):
    sq = np.sum(z * z, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.maximum(d, 0.0, out=d)
    return d


def mine_triplets(z, labels):
    """Enumerate all ordered same-label (anchor, positive) pairs and attach
    each one's semi-hard negative.

    Semi-hard: the negative with the smallest squared distance to the anchor
    among those farther than the positive; if no such negative exists, the
    farthest negative is used so the pair still contributes.  Ties break on
    the lowest index, so the result is deterministic given the latents.
    """
    z = np.asarray(z)
    labels = np.asarray(labels)
    if z.ndim != 2 or labels.shape != (z.shape[0],):
        raise ShapeError(f"latents {z.shape} do not match labels {labels.shape}")
    B = z.shape[0]
    same = labels[:, None] == labels[None, :]
    has_pos = (same.sum(axis=1) > 1).any()
    if len(np.unique(labels)) < 2 or not has_pos:
        raise BatchCompositionError(
            "triplet mining needs >= 2 classes and a class with >= 2 samples")
    d = _pairwise_sq_dists(z)
    triplets = []
    for a in range(B):
        neg = np.flatnonzero(~same[a])
        if neg.size == 0:
            continue
        d_an = d[a, neg]
        for p in np.flatnonzero(same[a]):
            if p == a:
                continue
            d_ap = d[a, p]
            harder = d_an > d_ap
            if harder.any():
                cand = neg[harder]
                n = cand[np.argmin(d_an[harder])]
            else:
                n = neg[np.argmax(d_an)]
            triplets.append((a, p, int(n)))
    if not triplets:
        raise BatchCompositionError("no valid anchor-positive pair in batch")
    return triplets


def triplet_semihard_loss(z, labels, margin):
    """Semi-hard triplet loss, mean over anchor-positive pairs.

    Per triplet: 0.5 * max(0, ||z_a - z_p||^2 - ||z_a - z_n||^2 + margin).
    The mined selection is held fixed during differentiation.
    """
    z = np.asarray(z)
    triplets = mine_triplets(z, labels)
    n_pairs = len(triplets)
    loss = 0.0
    grad = np.zeros_like(z)
    for a, p, n in triplets:
        ap = z[a] - z[p]
        an = z[a] - z[n]
        h = float(ap @ ap - an @ an) + margin
        if h > 0:
            loss += 0.5 * h
            grad[a] += (ap - an) / n_pairs
            grad[p] += -ap / n_pairs
            grad[n] += an / n_pairs
    return loss / n_pairs, grad


def total_loss(mse, triplet, ce, weights):
    """Weighted sum of the three loss components."""
    w1, w2, w3 = weights
    return w1 * mse + w2 * triplet + w3 * ce
