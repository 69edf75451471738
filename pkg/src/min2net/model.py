"""The MIN2Net graph: encoder, latent, decoder, metric-learning head, and
softmax classifier, trained jointly on a weighted sum of reconstruction,
triplet, and cross-entropy losses.

Layout is channels-last throughout: trials enter as (B, 1, T, C).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .losses import cross_entropy_loss, mse_loss, total_loss, triplet_semihard_loss
from .nn import AvgPoolTime, BatchNorm, ConvTime, ConvTransposeTime, Dense, Elu, Softmax

FLAT_WIDTH = 250  # 25 time steps x 10 channels after the encoder pools


@dataclass
class Min2NetConfig:
    """Architecture hyperparameters.

    ``latent_dim`` defaults to ``n_channels`` for binary classification and
    256 for three classes; other class counts must set it explicitly.
    """

    n_channels: int
    n_samples: int
    n_classes: int = 2
    latent_dim: int | None = None
    margin: float = 1.0
    loss_weights: tuple[float, float, float] = (0.5, 0.5, 1.0)
    mse_elementwise: bool = False

    def __post_init__(self):
        if self.n_channels < 1:
            raise ConfigError("n_channels must be positive")
        if self.n_samples < 100 or self.n_samples % 100 != 0:
            raise ConfigError(
                f"n_samples must be a positive multiple of 100, got {self.n_samples}")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")
        if self.latent_dim is None:
            if self.n_classes == 2:
                self.latent_dim = self.n_channels
            elif self.n_classes == 3:
                self.latent_dim = 256
            else:
                raise ConfigError(
                    "latent_dim has no default for n_classes > 3; set it explicitly")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be positive")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        w = tuple(float(v) for v in self.loss_weights)
        if len(w) != 3 or any(v < 0 for v in w) or all(v == 0 for v in w):
            raise ConfigError(
                "loss_weights must be three non-negative values, not all zero")
        self.loss_weights = w


class Min2Net:
    """Model instance: all trainable parameters plus BN running statistics.

    Single-writer: training and BN-updating inference must come from one
    logical thread.  Frozen-parameter inference in infer mode is read-only.
    """

    def __init__(self, config: Min2NetConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.seed = seed
        self.dtype = np.dtype(dtype)
        C, T, z, N = (config.n_channels, config.n_samples,
                      config.latent_dim, config.n_classes)
        rng = np.random.default_rng(seed)
        kw = dict(rng=rng, dtype=self.dtype)
        self.conv1 = ConvTime(C, C, 64, name="enc.conv1", **kw)
        self.elu1 = Elu()
        self.bn1 = BatchNorm(C, name="enc.bn1", dtype=self.dtype)
        self.pool1 = AvgPoolTime(T // 100)
        self.conv2 = ConvTime(C, 10, 32, name="enc.conv2", **kw)
        self.elu2 = Elu()
        self.bn2 = BatchNorm(10, name="enc.bn2", dtype=self.dtype)
        self.pool2 = AvgPoolTime(4)
        self.enc_fc = Dense(FLAT_WIDTH, z, name="enc.latent", **kw)
        self.dec_fc = Dense(z, FLAT_WIDTH, name="dec.fc", **kw)
        self.deconv1 = ConvTransposeTime(10, 10, 64, 4, name="dec.deconv1", **kw)
        self.elu3 = Elu()
        self.deconv2 = ConvTransposeTime(10, C, 32, T // 100, name="dec.deconv2", **kw)
        self.elu4 = Elu()
        self.clf_fc = Dense(z, N, name="clf.fc", **kw)
        self.softmax = Softmax()
        self._layers = [
            self.conv1, self.bn1, self.conv2, self.bn2, self.enc_fc,
            self.dec_fc, self.deconv1, self.deconv2, self.clf_fc,
        ]

    # -- parameters -------------------------------------------------------

    @property
    def params(self):
        out = []
        for layer in self._layers:
            out.extend(layer.params)
        return out

    def count_params(self) -> int:
        return sum(p.size for p in self.params)

    def zero_grad(self):
        for layer in self._layers:
            layer.zero_grad()

    def astype(self, dtype):
        """Cast all parameters and running statistics (64-bit mode is used
        for gradient checking)."""
        self.dtype = np.dtype(dtype)
        for p in self.params:
            p.astype(self.dtype)
        for bn in (self.bn1, self.bn2):
            bn.running_mean = bn.running_mean.astype(self.dtype)
            bn.running_var = bn.running_var.astype(self.dtype)
        return self

    def state_arrays(self):
        """All persisted arrays by name: trainable parameters plus the BN
        running statistics (checkpoint contents)."""
        out = {p.name: p.value for p in self.params}
        out["enc.bn1.running_mean"] = self.bn1.running_mean
        out["enc.bn1.running_var"] = self.bn1.running_var
        out["enc.bn2.running_mean"] = self.bn2.running_mean
        out["enc.bn2.running_var"] = self.bn2.running_var
        return out

    def load_state(self, arrays):
        mine = self.state_arrays()
        if set(arrays) != set(mine):
            missing = set(mine) ^ set(arrays)
            raise ConfigError(f"checkpoint parameter set mismatch: {sorted(missing)}")
        for p in self.params:
            src = arrays[p.name]
            if src.shape != p.value.shape:
                raise ConfigError(
                    f"{p.name}: checkpoint shape {src.shape} != model {p.value.shape}")
            p.value = src.astype(self.dtype)
            p.grad = np.zeros_like(p.value)
        self.bn1.running_mean = arrays["enc.bn1.running_mean"].astype(self.dtype)
        self.bn1.running_var = arrays["enc.bn1.running_var"].astype(self.dtype)
        self.bn2.running_mean = arrays["enc.bn2.running_mean"].astype(self.dtype)
        self.bn2.running_var = arrays["enc.bn2.running_var"].astype(self.dtype)

    def clone_state(self):
        return {k: v.copy() for k, v in self.state_arrays().items()}

    # -- forward ----------------------------------------------------------

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        C, T = self.config.n_channels, self.config.n_samples
        if x.ndim != 4 or x.shape[1:] != (1, T, C):
            raise ShapeError(
                f"input must be (B, 1, {T}, {C}), got {x.shape}")
        return x

    def encode(self, x, train: bool = True):
        x = self._check_input(x)
        h = self.pool1.forward(self.bn1.forward(
            self.elu1.forward(self.conv1.forward(x, train)), train), train)
        self.encoder_shapes = [x.shape[1:], h.shape[1:]]
        h = self.pool2.forward(self.bn2.forward(
            self.elu2.forward(self.conv2.forward(h, train)), train), train)
        self.encoder_shapes.append(h.shape[1:])
        flat = h[:, 0].reshape(h.shape[0], -1)
        return self.enc_fc.forward(flat, train)

    def decode(self, z, train: bool = True):
        z = np.asarray(z, dtype=self.dtype)
        if z.ndim != 2 or z.shape[1] != self.config.latent_dim:
            raise ShapeError(
                f"latent must be (B, {self.config.latent_dim}), got {z.shape}")
        d = self.dec_fc.forward(z, train)
        h = d.reshape(d.shape[0], 1, FLAT_WIDTH // 10, 10)
        h = self.elu3.forward(self.deconv1.forward(h, train))
        return self.elu4.forward(self.deconv2.forward(h, train))

    def classify(self, z):
        z = np.asarray(z, dtype=self.dtype)
        if z.ndim != 2 or z.shape[1] != self.config.latent_dim:
            raise ShapeError(
                f"latent must be (B, {self.config.latent_dim}), got {z.shape}")
        return self.softmax.forward(self.clf_fc.forward(z))

    def predict(self, x, batch_size: int = 256):
        """Infer-mode class predictions (argmax of classify(encode(x)))."""
        x = self._check_input(x)
        out = []
        for i in range(0, x.shape[0], batch_size):
            z = self.encode(x[i : i + batch_size], train=False)
            out.append(np.argmax(self.classify(z), axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=int)

    def shape_trace(self, batch_size: int = 2):
        """Per-layer output shapes (without the batch axis) for a dummy
        forward pass, in architecture order."""
        cfg = self.config
        x = np.zeros((batch_size, 1, cfg.n_samples, cfg.n_channels), dtype=self.dtype)
        trace = [("input", x.shape[1:])]
        h = self.conv1.forward(x, train=False)
        trace.append(("enc.conv1", h.shape[1:]))
        h = self.bn1.forward(self.elu1.forward(h), train=False)
        trace.append(("enc.bn1", h.shape[1:]))
        h = self.pool1.forward(h)
        trace.append(("enc.pool1", h.shape[1:]))
        h = self.conv2.forward(h, train=False)
        trace.append(("enc.conv2", h.shape[1:]))
        h = self.bn2.forward(self.elu2.forward(h), train=False)
        trace.append(("enc.bn2", h.shape[1:]))
        h = self.pool2.forward(h)
        trace.append(("enc.pool2", h.shape[1:]))
        flat = h[:, 0].reshape(batch_size, -1)
        trace.append(("enc.flatten", flat.shape[1:]))
        z = self.enc_fc.forward(flat, train=False)
        trace.append(("enc.latent", z.shape[1:]))
        d = self.dec_fc.forward(z, train=False)
        trace.append(("dec.fc", d.shape[1:]))
        h = d.reshape(batch_size, 1, FLAT_WIDTH // 10, 10)
        trace.append(("dec.reshape", h.shape[1:]))
        h = self.elu3.forward(self.deconv1.forward(h, train=False))
        trace.append(("dec.deconv1", h.shape[1:]))
        h = self.elu4.forward(self.deconv2.forward(h, train=False))
        trace.append(("dec.deconv2", h.shape[1:]))
        p = self.classify(z)
        trace.append(("clf.fc", p.shape[1:]))
        return trace

    # -- joint loss and backward -----------------------------------------

    def loss_and_grad(self, x, y, train: bool = True, with_grad: bool = True):
        """Forward all three heads, compute the weighted total loss, and
        (optionally) backpropagate into the parameter gradients.

        Returns a dict with ``mse``, ``triplet``, ``ce``, ``total``.
        """
        cfg = self.config
        x = self._check_input(x)
        z = self.encode(x, train)
        x_hat = self.decode(z, train)
        probs = self.classify(z)
        l_mse, d_xhat = mse_loss(x, x_hat, elementwise=cfg.mse_elementwise)
        l_tri, d_z_tri = triplet_semihard_loss(z, y, cfg.margin)
        l_ce, d_probs = cross_entropy_loss(y, probs)
        w1, w2, w3 = cfg.loss_weights
        out = {
            "mse": l_mse, "triplet": l_tri, "ce": l_ce,
            "total": total_loss(l_mse, l_tri, l_ce, cfg.loss_weights),
        }
        if not with_grad:
            return out
        # classifier head
        d_logits = self.softmax.backward(w3 * d_probs)
        dz = self.clf_fc.backward(d_logits)
        # decoder head
        dh = self.deconv2.backward(self.elu4.backward(w1 * d_xhat))
        dh = self.deconv1.backward(self.elu3.backward(dh))
        dz = dz + self.dec_fc.backward(dh[:, 0].reshape(dh.shape[0], -1))
        # metric-learning head
        dz = dz + w2 * d_z_tri
        # encoder
        dflat = self.enc_fc.backward(dz)
        B = dflat.shape[0]
        dh = dflat.reshape(B, 1, FLAT_WIDTH // 10, 10)
        dh = self.conv2.backward(self.elu2.backward(
            self.bn2.backward(self.pool2.backward(dh))))
        self.conv1.backward(self.elu1.backward(
            self.bn1.backward(self.pool1.backward(dh))))
        return out


def build(config: Min2NetConfig, seed: int = 0, dtype=np.float32) -> Min2Net:
    """Allocate and deterministically initialize a model from a seed."""
    return Min2Net(config, seed=seed, dtype=dtype)
