"""Filter-bank images and summary statistics for window channels.

A channel slice becomes a 2D time-frequency grid in four steps:
pre-emphasis, overlapping Hamming-tapered frames, power spectrum via FFT,
triangular filters with log compression and per-column mean removal.
Filters are spaced linearly over [0, rate/2]; the signals here live at
4-64 Hz, so no perceptual frequency warping is applied.

The "mixed features" vector summarizes all six raw channels with simple
window statistics (mean, std, min, max, range, slope per second).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

FB_LOG_FLOOR = 1e-10

# fixed channel order used everywhere downstream
CHANNEL_ORDER = ("ACC_x", "ACC_y", "ACC_z", "EDA", "BVP", "TEMP")
MIXED_DIM = 6 * len(CHANNEL_ORDER)


@dataclass(frozen=True)
class FilterBankConfig:
    pre_emphasis_alpha: float = 0.97
    frame_len_s: float = 8.0
    frame_shift_s: float = 2.0
    nfft: int | None = None          # None: next power of two >= frame samples
    n_filters: int | None = None     # None: min(16, nfft // 2)
    mean_normalize: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.pre_emphasis_alpha < 1.0:
            raise ConfigError("pre_emphasis_alpha must be in [0, 1)")
        if self.frame_len_s <= 0 or self.frame_shift_s <= 0:
            raise ConfigError("frame length and shift must be positive")

    def resolve(self, rate: float) -> tuple[int, int]:
        """Concrete (nfft, n_filters) for a channel at the given rate."""
        frame_n = int(round(self.frame_len_s * rate))
        nfft = self.nfft if self.nfft is not None else _next_pow2(frame_n)
        if nfft < frame_n:
            raise ConfigError(f"nfft={nfft} shorter than frame ({frame_n} samples)")
        nfil = self.n_filters if self.n_filters is not None else min(16, nfft // 2)
        if not 1 <= nfil <= nfft // 2:
            raise ConfigError(f"n_filters={nfil} outside 1..{nfft // 2}")
        return nfft, nfil


@dataclass(frozen=True)
class FilterBankImage:
    values: np.ndarray   # (frames, n_filters)
    channel: str


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def pre_emphasis(x: np.ndarray, alpha: float) -> np.ndarray:
    """y[0] = x[0]; y[n] = x[n] - alpha * x[n-1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 1:
        raise ConfigError("pre_emphasis needs at least one sample")
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - alpha * x[:-1]
    return y


def frame_and_window(
    x: np.ndarray, rate: float, frame_len_s: float, frame_shift_s: float
) -> np.ndarray:
    """Overlapping frames with a Hamming taper, shape (n_frames, frame_n).

    Frame count follows floor((len/rate - frame_len)/shift) + 1; a signal
    shorter than one frame is an error.
    """
    x = np.asarray(x, dtype=np.float64)
    frame_n = int(round(frame_len_s * rate))
    shift_n = int(round(frame_shift_s * rate))
    if shift_n < 1:
        raise ConfigError("frame shift below one sample at this rate")
    if x.size < frame_n:
        raise ConfigError(
            f"signal of {x.size} samples shorter than one frame ({frame_n})"
        )
    n_frames = (x.size - frame_n) // shift_n + 1
    idx = shift_n * np.arange(n_frames)[:, None] + np.arange(frame_n)[None, :]
    taper = 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(frame_n) / (frame_n - 1))
    return x[idx] * taper[None, :]


def power_spectrum(frame: np.ndarray, nfft: int) -> np.ndarray:
    """P[k] = |DFT(frame, nfft)[k]|^2 / nfft for k = 0..nfft/2.

    Accepts a single frame or a stack of frames (last axis = samples).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if nfft < 1 or (nfft & (nfft - 1)) != 0:
        raise ConfigError(f"nfft={nfft} is not a power of two")
    if frame.shape[-1] > nfft:
        raise ConfigError("frame longer than nfft")
    spec = np.fft.rfft(frame, n=nfft, axis=-1)
    return (spec.real**2 + spec.imag**2) / nfft


def triangular_filterbank(nfft: int, n_filters: int, rate: float) -> np.ndarray:
    """Triangle weights, shape (n_filters, nfft//2 + 1).

    Centers sit at n_filters + 2 points spaced linearly over [0, rate/2],
    mapped to fractional bins b = f * nfft / rate; filter i rises over
    [b[i-1], b[i]] and falls over [b[i], b[i+1]], sampled at integer bins.
    """
    if n_filters > nfft // 2:
        raise ConfigError(f"n_filters={n_filters} exceeds nfft/2={nfft // 2}")
    pts = np.linspace(0.0, rate / 2.0, n_filters + 2)
    bins = pts * nfft / rate            # fractional bin positions
    k = np.arange(nfft // 2 + 1, dtype=np.float64)
    fb = np.zeros((n_filters, k.size))
    for i in range(n_filters):
        lo, mid, hi = bins[i], bins[i + 1], bins[i + 2]
        rising = (k - lo) / (mid - lo)
        falling = (hi - k) / (hi - mid)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def compute_filterbank(
    x: np.ndarray, rate: float, cfg: FilterBankConfig, channel: str = ""
) -> FilterBankImage:
    """Full recipe for one window channel -> (frames, n_filters) image."""
    cfg.validate()
    nfft, nfil = cfg.resolve(rate)
    y = pre_emphasis(x, cfg.pre_emphasis_alpha)
    frames = frame_and_window(y, rate, cfg.frame_len_s, cfg.frame_shift_s)
    power = power_spectrum(frames, nfft)
    fb = triangular_filterbank(nfft, nfil, rate)
    energies = np.log(power @ fb.T + FB_LOG_FLOOR)
    if cfg.mean_normalize:
        energies = energies - energies.mean(axis=0, keepdims=True)
    return FilterBankImage(values=energies, channel=channel)


def mixed_features(channels: dict) -> np.ndarray:
    """36-entry statistics vector over the six channels in fixed order.

    Per channel: mean, std, min, max, range, least-squares slope against
    time in seconds. `channels` maps name -> (rate_hz, samples).
    """
    out = np.empty(MIXED_DIM)
    for ci, name in enumerate(CHANNEL_ORDER):
        if name not in channels:
            raise ConfigError(f"mixed_features: missing channel {name}")
        rate, x = channels[name]
        x = np.asarray(x, dtype=np.float64)
        t = np.arange(x.size) / rate
        tc = t - t.mean()
        denom = np.dot(tc, tc)
        slope = float(np.dot(tc, x - x.mean()) / denom) if denom > 0 else 0.0
        lo, hi = float(x.min()), float(x.max())
        out[6 * ci : 6 * ci + 6] = (
            float(x.mean()), float(x.std()), lo, hi, hi - lo, slope,
        )
    return out
