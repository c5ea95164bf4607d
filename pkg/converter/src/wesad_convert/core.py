"""Conversion and verification of one subject archive.

The upstream archives are python pickles with the layout
data['signal']['wrist'][<sensor>] and data['label']; wrist sensors are
ACC (n, 3), BVP, EDA, TEMP (n, 1). Only wrist channels and the label
track are converted; chest-device signals are ignored.
"""

import json
import os
import pickle
import re

import numpy as np

# wrist-device sampling rates
CHANNEL_RATES = {
    "ACC_x": 32,
    "ACC_y": 32,
    "ACC_z": 32,
    "EDA": 4,
    "BVP": 64,
    "TEMP": 4,
}
CHANNEL_ORDER = ("ACC_x", "ACC_y", "ACC_z", "EDA", "BVP", "TEMP")
LABEL_RATE = 700

# two participants were dropped upstream for device malfunction
VALID_SUBJECT_IDS = frozenset(list(range(2, 12)) + list(range(13, 18)))

TEMP_RANGE_C = (20.0, 45.0)
MAX_LABEL_VALUE = 7
MAX_DURATION_SPREAD_S = 1.0


class ConvertError(Exception):
    pass


def _subject_id(data: dict, archive_path: str) -> int:
    raw = data.get("subject")
    if isinstance(raw, bytes):
        raw = raw.decode("latin1")
    if raw is None:
        raw = os.path.basename(archive_path)
    m = re.search(r"(\d+)", str(raw))
    if not m:
        raise ConvertError(f"cannot determine subject id from {raw!r}")
    sid = int(m.group(1))
    if sid not in VALID_SUBJECT_IDS:
        raise ConvertError(
            f"subject id {sid} outside the usable set "
            f"{sorted(VALID_SUBJECT_IDS)}"
        )
    return sid


def _flat_channel(wrist: dict, key: str, column: int | None = None) -> np.ndarray:
    if key not in wrist:
        raise ConvertError(f"missing channel {key}")
    arr = np.asarray(wrist[key], dtype=np.float64)
    if column is not None:
        if arr.ndim != 2 or arr.shape[1] <= column:
            raise ConvertError(f"channel {key} lacks axis column {column}")
        arr = arr[:, column]
    else:
        arr = arr.reshape(-1)
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise ConvertError(f"channel {key} has a non-finite sample at index {bad[0]}")
    return arr


def load_archive(archive_path: str) -> dict:
    try:
        with open(archive_path, "rb") as f:
            data = pickle.load(f, encoding="latin1")
    except OSError as e:
        raise ConvertError(f"cannot read archive {archive_path}: {e}") from e
    except Exception as e:
        raise ConvertError(f"cannot unpickle archive {archive_path}: {e}") from e
    if not isinstance(data, dict) or "signal" not in data:
        raise ConvertError(f"{archive_path}: not a subject archive")
    return data


def convert_subject(archive_path: str, out_dir: str) -> dict:
    """Write channel binaries, the label track, and manifest.json.

    Returns the manifest. Re-running over the same archive produces
    byte-identical output.
    """
    data = load_archive(archive_path)
    wrist = data.get("signal", {}).get("wrist")
    if not isinstance(wrist, dict):
        raise ConvertError(f"{archive_path}: no wrist-device signals")
    sid = _subject_id(data, archive_path)

    channels = {
        "ACC_x": _flat_channel(wrist, "ACC", 0),
        "ACC_y": _flat_channel(wrist, "ACC", 1),
        "ACC_z": _flat_channel(wrist, "ACC", 2),
        "EDA": _flat_channel(wrist, "EDA"),
        "BVP": _flat_channel(wrist, "BVP"),
        "TEMP": _flat_channel(wrist, "TEMP"),
    }
    if "label" not in data:
        raise ConvertError(f"{archive_path}: missing label track")
    labels = np.asarray(data["label"]).reshape(-1)
    if labels.size == 0:
        raise ConvertError(f"{archive_path}: empty label track")
    if labels.min() < 0 or labels.max() > 255:
        raise ConvertError(f"{archive_path}: label values outside u8 range")
    labels = labels.astype(np.uint8)

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for name in CHANNEL_ORDER:
        arr = channels[name].astype("<f4")
        fname = f"{name}.bin"
        with open(os.path.join(out_dir, fname), "wb") as f:
            f.write(arr.tobytes())
        entries.append(
            {
                "name": name,
                "sample_rate_hz": CHANNEL_RATES[name],
                "file": fname,
                "n_samples": int(arr.size),
                "dtype": "f32le",
            }
        )
    with open(os.path.join(out_dir, "label.bin"), "wb") as f:
        f.write(labels.tobytes())
    manifest = {
        "subject_id": sid,
        "channels": entries,
        "label": {
            "file": "label.bin",
            "sample_rate_hz": LABEL_RATE,
            "n_samples": int(labels.size),
            "dtype": "u8",
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


class VerificationReport:
    def __init__(self):
        self.checks = []

    def add(self, name: str, ok: bool, detail: str = ""):
        self.checks.append({"name": name, "ok": bool(ok), "detail": detail})

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c["ok"]]

    def lines(self):
        for c in self.checks:
            mark = "ok  " if c["ok"] else "FAIL"
            suffix = f" ({c['detail']})" if c["detail"] else ""
            yield f"{mark} {c['name']}{suffix}"


_ELEMENT_SIZE = {"f32le": 4, "u8": 1}
_NUMPY_DTYPE = {"f32le": "<f4", "u8": "u1"}


def verify(out_dir: str) -> VerificationReport:
    """Check file lengths, value ranges, and channel duration agreement."""
    rep = VerificationReport()
    man_path = os.path.join(out_dir, "manifest.json")
    try:
        with open(man_path) as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        rep.add("manifest readable", False, str(e))
        return rep
    rep.add("manifest readable", True)

    declared = {c["name"] for c in manifest.get("channels", [])}
    missing = set(CHANNEL_ORDER) - declared
    rep.add("all channels declared", not missing,
            f"missing {sorted(missing)}" if missing else "")

    durations = {}
    for ent in manifest.get("channels", []) + [dict(manifest["label"], name="label")]:
        name = ent["name"]
        path = os.path.join(out_dir, ent["file"])
        size = _ELEMENT_SIZE[ent["dtype"]]
        want = ent["n_samples"] * size
        try:
            have = os.path.getsize(path)
        except OSError:
            rep.add(f"{name} file exists", False, ent["file"])
            continue
        rep.add(
            f"{name} length", have == want,
            f"{have} bytes, expected {want}" if have != want else "",
        )
        if have == want:
            durations[name] = ent["n_samples"] / ent["sample_rate_hz"]
            if name == "TEMP":
                temp = np.fromfile(path, dtype=_NUMPY_DTYPE[ent["dtype"]])
                lo, hi = TEMP_RANGE_C
                bad = np.flatnonzero((temp < lo) | (temp > hi))
                rep.add(
                    "TEMP within 20-45 C", bad.size == 0,
                    f"{bad.size} samples out of range" if bad.size else "",
                )
            if name == "label":
                lab = np.fromfile(path, dtype=_NUMPY_DTYPE[ent["dtype"]])
                bad = np.flatnonzero(lab > MAX_LABEL_VALUE)
                rep.add(
                    "labels within protocol range", bad.size == 0,
                    f"value {int(lab[bad[0]])} at index {int(bad[0])}"
                    if bad.size else "",
                )

    chan_durs = [d for n, d in durations.items() if n != "label"]
    if chan_durs:
        spread = max(chan_durs) - min(chan_durs)
        rep.add(
            "channel durations agree within 1 s",
            spread <= MAX_DURATION_SPREAD_S,
            f"spread {spread:.2f} s",
        )
        if "label" in durations:
            mean_dur = sum(chan_durs) / len(chan_durs)
            diff = abs(durations["label"] - mean_dur)
            rep.add(
                "label duration matches channels within 1 s",
                diff <= MAX_DURATION_SPREAD_S,
                f"difference {diff:.2f} s",
            )
    return rep
