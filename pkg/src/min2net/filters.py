"""Butterworth band-pass design, zero-phase filtering, and rational
resampling.

The design path is implemented here from the analog prototype (bilinear
transform with frequency pre-warping, second-order sections); only the raw
IIR recursion and the polyphase inner loop are delegated to scipy.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import lfilter, upfirdn

from .errors import ConfigError


@dataclass(frozen=True)
class FilterSpec:
    order: int
    low_hz: float
    high_hz: float
    fs: float

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("filter order must be >= 1")
        if not (0 < self.low_hz < self.high_hz):
            raise ConfigError(
                f"need 0 < low < high, got {self.low_hz}..{self.high_hz}")
        if self.high_hz >= self.fs / 2:
            raise ConfigError(
                f"high edge {self.high_hz} Hz >= Nyquist {self.fs / 2} Hz")


@dataclass
class BiquadCascade:
    """Second-order sections; each row is (b0, b1, b2, a1, a2) with a0
    normalized to 1."""

    sections: np.ndarray  # (n_sections, 5)

    @property
    def n_sections(self):
        return self.sections.shape[0]

    @property
    def poles(self):
        out = []
        for b0, b1, b2, a1, a2 in self.sections:
            out.extend(np.roots([1.0, a1, a2]))
        return np.asarray(out)

    @property
    def is_stable(self):
        return bool(np.all(np.abs(self.poles) < 1.0))

    def transfer_function(self):
        """Expand the cascade into a single (b, a) polynomial pair."""
        b = np.array([1.0])
        a = np.array([1.0])
        for b0, b1, b2, a1, a2 in self.sections:
            b = np.convolve(b, [b0, b1, b2])
            a = np.convolve(a, [1.0, a1, a2])
        return b, a

    def response(self, freqs_hz, fs):
        """Complex frequency response at the given frequencies."""
        w = 2 * np.pi * np.asarray(freqs_hz, dtype=float) / fs
        z1 = np.exp(-1j * w)
        h = np.ones_like(z1)
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 * z1 + b2 * z1**2) / (1 + a1 * z1 + a2 * z1**2)
        return h


def _pair_conjugates(poles):
    """Group poles into conjugate (or real) pairs for section building."""
    poles = np.asarray(poles)
    complex_p = sorted(poles[poles.imag > 1e-12], key=lambda p: (abs(p), p.real))
    real_p = sorted(poles[np.abs(poles.imag) <= 1e-12].real)
    pairs = [(p, np.conj(p)) for p in complex_p]
    pairs += [(real_p[i], real_p[i + 1]) for i in range(0, len(real_p), 2)]
    return pairs


def butter_bandpass(spec: FilterSpec) -> BiquadCascade:
    """Design an order-n Butterworth band-pass as n biquad sections.

    Analog prototype -> low-pass-to-band-pass transform -> bilinear map
    with edge pre-warping.  Each section carries one zero at z=+1 and one
    at z=-1 (the images of s=0 and s=inf).
    """
    n, fs = spec.order, spec.fs
    # analog prototype: n poles on the unit circle, left half plane
    k = np.arange(1, n + 1)
    proto = np.exp(1j * np.pi * (2 * k + n - 1) / (2 * n))
    # pre-warped band edges for the bilinear map
    fs2 = 2.0 * fs
    w1 = fs2 * np.tan(np.pi * spec.low_hz / fs)
    w2 = fs2 * np.tan(np.pi * spec.high_hz / fs)
    bw, w0 = w2 - w1, np.sqrt(w1 * w2)
    # low-pass -> band-pass: each prototype pole splits into two
    half = proto * bw / 2.0
    disc = np.sqrt(half**2 - w0**2)
    p_analog = np.concatenate([half + disc, half - disc])
    gain = bw**n  # n zeros at s=0, n at infinity
    # bilinear transform
    p_digital = (fs2 + p_analog) / (fs2 - p_analog)
    gain = gain * np.real(np.prod(fs2 - np.zeros(n)) / np.prod(fs2 - p_analog))
    pairs = _pair_conjugates(p_digital)
    if 2 * len(pairs) != 2 * n:
        raise ConfigError("internal: pole pairing failed")
    sections = np.zeros((n, 5))
    for i, (p1, p2) in enumerate(pairs):
        a1 = -float(np.real(p1 + p2))
        a2 = float(np.real(p1 * p2))
        g = float(np.real(gain)) if i == 0 else 1.0
        # zeros at +1 and -1: b(z) = g * (1 - z^-2)
        sections[i] = (g, 0.0, -g, a1, a2)
    cascade = BiquadCascade(sections)
    if not cascade.is_stable:
        raise ConfigError("designed filter is unstable (band too extreme)")
    return cascade


def _section_zi(b0, b1, b2, a1, a2):
    """Steady-state filter state for a unit-step input (direct form II
    transposed), so edge transients start from equilibrium."""
    den = 1.0 + a1 + a2
    z1 = (b1 + b2 - (a1 + a2) * b0) / den
    y = b0 + z1
    z2 = b2 - a2 * y
    return np.array([z1, z2])


def sosfilt(cascade: BiquadCascade, x, zi_scale=None):
    """Single forward pass through the cascade.

    ``zi_scale``: if given, each section starts from its steady-state
    response to a constant input of that section's first sample (the
    standard filtfilt initialization).
    """
    y = np.asarray(x, dtype=float)
    for b0, b1, b2, a1, a2 in cascade.sections:
        b, a = [b0, b1, b2], [1.0, a1, a2]
        if zi_scale is None:
            y = lfilter(b, a, y)
        else:
            zi = _section_zi(b0, b1, b2, a1, a2) * y[0]
            y, _ = lfilter(b, a, y, zi=zi)
    return y


def filtfilt(cascade: BiquadCascade, x):
    """Zero-phase two-pass filtering with odd-reflection padding.

    Pad length is three times the cascade's pole count; the effective
    magnitude response is |H|^2.  The forward-backward and
    backward-forward passes are averaged, which makes the operator commute
    with time reversal exactly (not just up to residual edge transients).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConfigError("filtfilt expects a 1-D signal")
    pad = 3 * (2 * cascade.n_sections)
    if x.size <= pad:
        raise ConfigError(
            f"signal length {x.size} too short for padding {pad}")
    ext = np.concatenate([
        2 * x[0] - x[pad:0:-1],
        x,
        2 * x[-1] - x[-2 : -pad - 2 : -1],
    ])
    fwd_bwd = sosfilt(cascade, sosfilt(cascade, ext,
                                       zi_scale=True)[::-1],
                      zi_scale=True)[::-1]
    bwd_fwd = sosfilt(cascade, sosfilt(cascade, ext[::-1],
                                       zi_scale=True)[::-1],
                      zi_scale=True)
    y = 0.5 * (fwd_bwd + bwd_fwd)
    return y[pad : pad + x.size]


def _rational_ratio(fs_in, fs_out, max_den=4096):
    try:
        frac = Fraction(fs_out).limit_denominator(10**6) / Fraction(
            fs_in).limit_denominator(10**6)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid sampling rates {fs_in} -> {fs_out}") from exc
    if frac <= 0:
        raise ConfigError("sampling rates must be positive")
    if frac.numerator > max_den or frac.denominator > max_den:
        raise ConfigError(
            f"rate ratio {fs_out}/{fs_in} not representable as a small "
            f"rational (got {frac.numerator}/{frac.denominator})")
    return frac.numerator, frac.denominator


def resample_kernel(up, down, half_scale=10, beta=8.0):
    """Windowed-sinc anti-alias kernel at the upsampled rate, gain ``up``,
    with each polyphase branch normalized to unit DC gain."""
    half = int(np.ceil(half_scale * max(up, down) / down)) * down
    n = np.arange(-half, half + 1)
    cutoff = 1.0 / max(up, down)
    h = up * cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half + 1, beta)
    # unit DC gain per branch: a constant input maps to the same constant
    for phase in range(up):
        h[phase::up] /= h[phase::up].sum()
    return h, half


def resample(x, fs_in, fs_out):
    """Polyphase rational resampling with delay compensation.

    Output length is ceil(len * L / M) for fs_out/fs_in = L/M in lowest
    terms; interior samples stay time-aligned with the input.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConfigError("resample expects a 1-D signal")
    up, down = _rational_ratio(fs_in, fs_out)
    n_out = int(-(-x.size * up // down))  # ceil
    if up == down:
        return x.copy()
    h, half = resample_kernel(up, down)
    y_full = upfirdn(h, x, up=up, down=down)
    offset = half // down  # half is a multiple of down by construction
    out = y_full[offset : offset + n_out]
    if out.size < n_out:
        out = np.pad(out, (0, n_out - out.size))
    return out
