"""Recordings, condition mapping, sliding windows, LOSO folds, synthetic data.

On-disk input is the neutral converted format: per-subject directory with
manifest.json, one little-endian f32 file per channel, and a 700 Hz u8
protocol label track. Protocol codes: 1 = baseline, 2 = stress,
3 = amusement; everything else (transient, meditation, ...) is ignored.
"""

import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import io
from .errors import ConfigError, DataError

LABEL_RATE_HZ = 700
IGNORE = 255  # sentinel class for windows that must be dropped

PROTOCOL_BASELINE = 1
PROTOCOL_STRESS = 2
PROTOCOL_AMUSEMENT = 3

CHANNEL_RATES = {
    "ACC_x": 32.0,
    "ACC_y": 32.0,
    "ACC_z": 32.0,
    "EDA": 4.0,
    "BVP": 64.0,
    "TEMP": 4.0,
}

REAL_SUBJECT_IDS = tuple(list(range(2, 12)) + list(range(13, 18)))


class TaskMode(Enum):
    THREE_STATE = "three"   # baseline / stress / amusement
    BINARY = "binary"       # non-stress (baseline + amusement) / stress

    @property
    def n_classes(self) -> int:
        return 3 if self is TaskMode.THREE_STATE else 2

    @property
    def class_names(self) -> tuple:
        if self is TaskMode.THREE_STATE:
            return ("baseline", "stress", "amusement")
        return ("non_stress", "stress")


@dataclass(frozen=True)
class WindowConfig:
    window_len_s: float = 60.0
    shift_s: float = 0.25
    label_rule: str = "strict-homogeneous"

    def validate(self) -> None:
        if self.window_len_s <= 0 or self.shift_s <= 0:
            raise ConfigError("window length and shift must be positive")
        if self.shift_s > self.window_len_s:
            raise ConfigError("shift must not exceed window length")
        if self.label_rule != "strict-homogeneous":
            raise ConfigError(f"unknown label rule {self.label_rule!r}")


@dataclass(frozen=True)
class RawRecording:
    subject_id: int
    channels: dict            # name -> (rate_hz, float64 samples)
    labels: np.ndarray        # 700 Hz u8 protocol codes

    @property
    def duration_s(self) -> float:
        durs = [n.size / r for r, n in self.channels.values()]
        durs.append(self.labels.size / LABEL_RATE_HZ)
        return min(durs)


@dataclass(frozen=True)
class Window:
    subject_id: int
    start_time_s: float
    channels: dict            # name -> (rate_hz, samples)
    class_label: int


@dataclass(frozen=True)
class Fold:
    held_out_subject_id: int
    train_subject_ids: tuple


def load_subject(subject_dir: str, interp_nan: bool = False) -> RawRecording:
    """Read one converted subject directory; fails rather than repairing.

    With interp_nan, interior NaNs are linearly interpolated and counted;
    leading/trailing NaNs are still fatal.
    """
    manifest = io.read_manifest(os.path.join(subject_dir, "manifest.json"))
    declared = {c["name"]: c for c in manifest.get("channels", [])}
    for name in CHANNEL_RATES:
        if name not in declared:
            raise DataError(f"{subject_dir}: manifest missing channel {name}")
    channels = {}
    for name, rate in CHANNEL_RATES.items():
        ent = declared[name]
        if float(ent["sample_rate_hz"]) != rate:
            raise DataError(
                f"{subject_dir}: {name} declared at {ent['sample_rate_hz']} Hz, "
                f"expected {rate}"
            )
        arr = io.read_array(
            os.path.join(subject_dir, ent["file"]), ent["dtype"], int(ent["n_samples"])
        ).astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            if not interp_nan:
                raise DataError(
                    f"{subject_dir}: {name} has non-finite value at index {bad[0]}"
                )
            good = np.flatnonzero(np.isfinite(arr))
            if good.size == 0 or bad[0] < good[0] or bad[-1] > good[-1]:
                raise DataError(
                    f"{subject_dir}: {name} has non-interior NaNs, cannot interpolate"
                )
            arr[bad] = np.interp(bad, good, arr[good])
        channels[name] = (rate, arr)
    lab_ent = manifest["label"]
    labels = io.read_array(
        os.path.join(subject_dir, lab_ent["file"]), lab_ent["dtype"],
        int(lab_ent["n_samples"]),
    )
    rec = RawRecording(
        subject_id=int(manifest["subject_id"]), channels=channels, labels=labels
    )
    durs = [n.size / r for r, n in channels.values()]
    if max(durs) - min(durs) > 1.0:
        raise DataError(f"{subject_dir}: channel durations differ by more than 1 s")
    label_dur = labels.size / LABEL_RATE_HZ
    if not (min(durs) - 1.0 <= label_dur <= max(durs) + 1.0):
        raise DataError(
            f"{subject_dir}: label track covers {label_dur:.1f} s, channels "
            f"cover {min(durs):.1f}-{max(durs):.1f} s"
        )
    return rec


def map_conditions(labels: np.ndarray, mode: TaskMode) -> np.ndarray:
    """Protocol codes -> task class indices; unknown codes -> IGNORE."""
    labels = np.asarray(labels)
    out = np.full(labels.shape, IGNORE, dtype=np.uint8)
    if mode is TaskMode.THREE_STATE:
        out[labels == PROTOCOL_BASELINE] = 0
        out[labels == PROTOCOL_STRESS] = 1
        out[labels == PROTOCOL_AMUSEMENT] = 2
    else:
        out[labels == PROTOCOL_BASELINE] = 0
        out[labels == PROTOCOL_STRESS] = 1
        out[labels == PROTOCOL_AMUSEMENT] = 0
    return out


def segment_windows(
    rec: RawRecording, cfg: WindowConfig, mode: TaskMode
) -> list:
    """Sliding windows at t = k * shift, kept only when every 700 Hz label
    sample in the span carries the same non-ignore class.

    Channel slice boundaries are round(t * rate) .. round((t + len) * rate),
    so counts stay exact on the rate grids used here.
    """
    cfg.validate()
    classes = map_conditions(rec.labels, mode)
    duration = rec.duration_s
    windows = []
    if duration < cfg.window_len_s:
        return windows

    # homogeneity via run boundaries: window [a, b) is uniform iff the next
    # class change after a happens at or beyond b
    change = np.flatnonzero(np.diff(classes)) + 1
    bounds = np.concatenate(([0], change, [classes.size]))
    next_change = np.empty(classes.size, dtype=np.int64)
    for s, e in zip(bounds[:-1], bounds[1:]):
        next_change[s:e] = e

    n_steps = int(math.floor((duration - cfg.window_len_s) / cfg.shift_s)) + 1
    for k in range(n_steps):
        t = k * cfg.shift_s
        a = int(round(t * LABEL_RATE_HZ))
        b = int(round((t + cfg.window_len_s) * LABEL_RATE_HZ))
        if b > classes.size:
            break
        cls = classes[a]
        if cls == IGNORE or next_change[a] < b:
            continue
        slices = {}
        for name, (rate, x) in rec.channels.items():
            i0 = int(round(t * rate))
            i1 = int(round((t + cfg.window_len_s) * rate))
            slices[name] = (rate, x[i0:i1])
        windows.append(
            Window(
                subject_id=rec.subject_id,
                start_time_s=t,
                channels=slices,
                class_label=int(cls),
            )
        )
    return windows


def segment_all(
    recs: list, cfg: WindowConfig, mode: TaskMode
) -> list:
    """Windows for several recordings, ordered by (subject_id, start_time)."""
    out = []
    for rec in sorted(recs, key=lambda r: r.subject_id):
        out.extend(segment_windows(rec, cfg, mode))
    return out


def loso_folds(subject_ids) -> list:
    """One fold per subject, ascending by held-out id."""
    ids = list(subject_ids)
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate subject ids")
    if len(ids) < 2:
        raise ConfigError("leave-one-subject-out needs at least 2 subjects")
    ids = sorted(ids)
    return [
        Fold(held_out_subject_id=s, train_subject_ids=tuple(t for t in ids if t != s))
        for s in ids
    ]


# synthetic data: per-class carrier frequencies in Hz. All are multiples of
# 1/8 Hz, the DFT bin spacing shared by every channel at the default 8 s
# frame, so frame spectra do not depend on where a frame lands on the
# carrier; classes sit several triangle filters apart at each rate
_SYNTH_FREQS = {
    "ACC_x": (2.0, 5.0, 8.0),
    "ACC_y": (2.5, 5.5, 8.5),
    "ACC_z": (3.0, 6.0, 9.0),
    "EDA": (0.375, 0.875, 1.5),
    "BVP": (4.0, 10.0, 16.0),
    "TEMP": (0.5, 1.0, 1.625),
}


def synth_class_freq(channel: str, cls: int) -> float:
    return _SYNTH_FREQS[channel][cls]


_SYNTH_OFFSET = {"TEMP": 33.0}
_SYNTH_NOISE = 0.2
# slow amplitude envelope so frames inside one window differ; a purely
# stationary carrier would be cancelled by per-window mean normalization.
# Phases are deterministic: random per-subject phases would hand the
# classifier a subject signature through spectral leakage
_SYNTH_ENV_PERIOD_S = 16.0
_SYNTH_ENV_DEPTH = 0.6


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 5
    duration_s: float = 300.0
    block_len_s: float = 100.0
    seed: int = 0
    first_subject_id: int = 2
    freq_jitter: float = 0.02


def synth_dataset(cfg: SynthConfig) -> list:
    """Deterministic synthetic recordings with class-dependent spectra.

    Conditions cycle baseline -> stress -> amusement in fixed blocks; each
    (channel, class) pair carries a sinusoid at its assigned frequency with
    additive noise, the frequency jittered slightly per subject.
    """
    if cfg.n_subjects < 2:
        raise ConfigError("synthetic dataset needs at least 2 subjects")
    recs = []
    protocol = (PROTOCOL_BASELINE, PROTOCOL_STRESS, PROTOCOL_AMUSEMENT)
    for si in range(cfg.n_subjects):
        sid = cfg.first_subject_id + si
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, sid, 0x5EED])
        )
        jitter = 1.0 + rng.uniform(-cfg.freq_jitter, cfg.freq_jitter)
        n_blocks = int(math.ceil(cfg.duration_s / cfg.block_len_s))
        labels = np.zeros(int(round(cfg.duration_s * LABEL_RATE_HZ)), dtype=np.uint8)
        for b in range(n_blocks):
            a = int(round(b * cfg.block_len_s * LABEL_RATE_HZ))
            z = min(int(round((b + 1) * cfg.block_len_s * LABEL_RATE_HZ)), labels.size)
            labels[a:z] = protocol[b % 3]
        channels = {}
        for name, rate in CHANNEL_RATES.items():
            n = int(round(cfg.duration_s * rate))
            t = np.arange(n) / rate
            block_idx = np.minimum(
                (t / cfg.block_len_s).astype(np.int64), n_blocks - 1
            )
            cls = block_idx % 3
            base = np.array([synth_class_freq(name, c) for c in range(3)])
            freqs = base[cls] * jitter
            env = 1.0 - _SYNTH_ENV_DEPTH * 0.5 * (
                1.0 + np.sin(2 * np.pi * t / _SYNTH_ENV_PERIOD_S)
            )
            x = env * np.sin(2 * np.pi * freqs * t)
            x += _SYNTH_NOISE * rng.standard_normal(n)
            x += _SYNTH_OFFSET.get(name, 0.0)
            channels[name] = (float(rate), x)
        recs.append(RawRecording(subject_id=sid, channels=channels, labels=labels))
    return recs


def write_recording(rec: RawRecording, out_dir: str) -> None:
    """Persist a recording in the neutral converted format."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for name in sorted(rec.channels):
        rate, x = rec.channels[name]
        fname = f"{name}.bin"
        n = io.write_array(os.path.join(out_dir, fname), x, "f32le")
        entries.append(
            {"name": name, "sample_rate_hz": rate, "file": fname,
             "n_samples": n, "dtype": "f32le"}
        )
    n = io.write_array(os.path.join(out_dir, "label.bin"), rec.labels, "u8")
    io.write_manifest(
        os.path.join(out_dir, "manifest.json"),
        {
            "subject_id": rec.subject_id,
            "channels": entries,
            "label": {"file": "label.bin", "sample_rate_hz": LABEL_RATE_HZ,
                      "n_samples": n, "dtype": "u8"},
        },
    )


def load_dataset(data_dir: str, interp_nan: bool = False) -> list:
    """Load every subject directory (any dir containing manifest.json)."""
    recs = []
    for entry in sorted(os.listdir(data_dir)):
        sub = os.path.join(data_dir, entry)
        if os.path.isdir(sub) and os.path.isfile(os.path.join(sub, "manifest.json")):
            recs.append(load_subject(sub, interp_nan=interp_nan))
    if not recs:
        raise DataError(f"no subject directories under {data_dir}")
    return sorted(recs, key=lambda r: r.subject_id)
