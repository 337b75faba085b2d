"""Reading and writing frames, eye-tracking CSV, scan paths, maps and configs.

All text formats are UTF-8 with LF line endings; floats are written with
``repr`` so they round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .bias import BiasModel, GazeShift
from .errors import ConfigError, DataError, FormatError, InputError, ParameterError
from .saliency import ImageFrame, SaliencyMap
from .stable import AlphaStableParams
from .walker import GazeRecord, RegimeMotor, RegimeMotorParams, ScanPath, WalkerConfig, \
    default_motors

FIXATION_HEADER = ("observer", "stimulus", "t_ms", "x", "y", "duration_ms")
SCANPATH_KEYS = ("t_ms", "x", "y", "regime", "event", "dwell_ms")
SHIFT_HEADER = ("dx", "dy", "l", "theta", "duration")


# ---------------------------------------------------------------------------
# frames


def _read_image(path: Path) -> ImageFrame:
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=float) / 65535.0
                return ImageFrame(np.clip(arr, 0.0, 1.0))
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            return ImageFrame.from_uint8(np.asarray(im))
    except OSError as exc:
        raise InputError(f"{path}: cannot read image ({exc})") from exc


def load_frames(path, pattern: str = "*.png", tick_ms: float = 10.0) -> list[ImageFrame]:
    """Load a single image or a directory of frames in lexicographic name order.

    Frame i gets timestamp i * tick_ms.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: no such file or directory")
    files = sorted(path.glob(pattern)) if path.is_dir() else [path]
    if not files:
        raise InputError(f"{path}: no files match {pattern!r}")
    frames = []
    for i, f in enumerate(files):
        fr = _read_image(f)
        if frames and (fr.height, fr.width) != (frames[0].height, frames[0].width):
            raise DataError(f"{f.name}: size {fr.width}x{fr.height} differs from "
                            f"{frames[0].width}x{frames[0].height}")
        fr.timestamp = i * tick_ms
        frames.append(fr)
    return frames


# ---------------------------------------------------------------------------
# human fixations


@dataclass(frozen=True)
class FixationRecord:
    observer: str
    stimulus: str
    t_ms: float
    x: float
    y: float
    duration_ms: float


def load_fixations_csv(path, bounds=None) -> tuple[list[FixationRecord], int]:
    """Parse the fixation CSV; returns (records, number of dropped rows).

    Rows with negative coordinates, or coordinates beyond ``bounds`` (a
    (width, height) pair or a dict stimulus -> (width, height)), are dropped.
    """
    path = Path(path)
    records, dropped = [], 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FIXATION_HEADER:
            raise FormatError(f"expected header {','.join(FIXATION_HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(FIXATION_HEADER):
                raise FormatError(f"expected {len(FIXATION_HEADER)} fields, got {len(row)}", lineno)
            try:
                t, x, y, dur = (float(v) for v in row[2:])
            except ValueError as exc:
                raise FormatError(f"unparsable number ({exc})", lineno) from None
            if not all(math.isfinite(v) for v in (t, x, y, dur)):
                raise FormatError("non-finite value", lineno)
            if dur < 0:
                raise FormatError("duration_ms must be >= 0", lineno)
            rec = FixationRecord(row[0], row[1], t, x, y, dur)
            if not _in_bounds(rec, bounds):
                dropped += 1
                continue
            records.append(rec)
    return records, dropped


def _in_bounds(rec: FixationRecord, bounds) -> bool:
    if rec.x < 0 or rec.y < 0:
        return False
    if bounds is None:
        return True
    wh = bounds.get(rec.stimulus) if isinstance(bounds, dict) else bounds
    if wh is None:
        return True
    return rec.x <= wh[0] - 1 and rec.y <= wh[1] - 1


def write_fixations_csv(path, records: Sequence[FixationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIXATION_HEADER)
        for r in records:
            w.writerow([r.observer, r.stimulus]
                      + [repr(float(v)) for v in (r.t_ms, r.x, r.y, r.duration_ms)])


# ---------------------------------------------------------------------------
# scan paths


def write_scanpath_jsonl(path, scanpath: ScanPath) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in scanpath.records:
            fh.write(json.dumps({"t_ms": r.t_ms, "x": r.x, "y": r.y, "regime": r.regime,
                                 "event": r.event, "dwell_ms": r.dwell_ms}) + "\n")


def read_scanpath_jsonl(path) -> ScanPath:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(d, dict):
                raise FormatError("record must be a JSON object", lineno)
            missing = [k for k in SCANPATH_KEYS if k not in d]
            if missing:
                raise FormatError(f"missing keys {missing}", lineno)
            try:
                records.append(GazeRecord(float(d["t_ms"]), float(d["x"]), float(d["y"]),
                                          int(d["regime"]), str(d["event"]), float(d["dwell_ms"])))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"bad field value ({exc})", lineno) from None
    return ScanPath(records)


# ---------------------------------------------------------------------------
# saliency maps


def write_salmap(path, smap: SaliencyMap) -> None:
    """Text grid: ``SALMAP v1 <width> <height> <normalization>`` then rows of floats."""
    h, w = smap.values.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"SALMAP v1 {w} {h} {smap.normalization}\n")
        for row in smap.values:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_salmap(path) -> SaliencyMap:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 5 or head[:2] != ["SALMAP", "v1"]:
            raise FormatError("expected 'SALMAP v1 <width> <height> <normalization>'", 1)
        try:
            w, h = int(head[2]), int(head[3])
        except ValueError:
            raise FormatError("width and height must be integers", 1) from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = [float(v) for v in line.split()]
            except ValueError:
                raise FormatError("unparsable float", lineno) from None
            if len(row) != w:
                raise FormatError(f"expected {w} values, got {len(row)}", lineno)
            rows.append(row)
    if len(rows) != h:
        raise FormatError(f"expected {h} rows, got {len(rows)}")
    values = np.array(rows, dtype=float).reshape(h, w)
    return SaliencyMap(values, head[4])


def write_preview_png(path, smap: SaliencyMap) -> None:
    """16-bit grayscale preview, peak scaled to 65535."""
    img = np.round(smap.max_normalized() * 65535).astype(np.uint16)
    Image.fromarray(img).save(path)


# ---------------------------------------------------------------------------
# shifts and bias models


def write_shifts_csv(path, shifts: Sequence[GazeShift]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHIFT_HEADER)
        for s in shifts:
            w.writerow([repr(float(v)) for v in (s.dx, s.dy, s.l, s.theta, s.duration)])


def read_shifts_csv(path) -> list[GazeShift]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SHIFT_HEADER:
            raise FormatError(f"expected header {','.join(SHIFT_HEADER)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dx, dy, l, theta, dur = (float(v) for v in row)
                out.append(GazeShift(dx, dy, l, theta, dur))
            except (ValueError, ParameterError) as exc:
                raise FormatError(str(exc), lineno) from None
    return out


def save_bias_model(path, model: BiasModel) -> None:
    Path(path).write_text(model.to_json() + "\n", encoding="utf-8")


def load_bias_model(path) -> BiasModel:
    try:
        return BiasModel.from_json(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError) as exc:
        raise FormatError(f"{path}: malformed bias model ({exc})") from None


# ---------------------------------------------------------------------------
# configuration

# key -> (type, check, bound text); checks run before the dataclasses see the values
_CONFIG_KEYS = {
    "n_candidates": (int, lambda v: v >= 1, "n_candidates >= 1"),
    "temperature": (float, lambda v: v > 0, "temperature > 0"),
    "tick_ms": (float, lambda v: v > 0, "tick_ms > 0"),
    "tau": (float, lambda v: v > 0, "tau > 0"),
    "regimes": (int, lambda v: v in (2, 3), "regimes in {2, 3}"),
    "boundary": (str, lambda v: v in ("resample", "clamp"), "boundary in {resample, clamp}"),
    "seed": (int, lambda v: v >= 0, "seed >= 0"),
    "max_ticks": (int, lambda v: v >= 1, "max_ticks >= 1"),
    "learning_rate": (float, lambda v: v >= 0, "learning_rate >= 0"),
    "fixation_threshold_px": (float, lambda v: v >= 0, "fixation_threshold_px >= 0"),
    "foveation": (bool, lambda v: True, ""),
    "px_per_degree": (float, lambda v: v > 0, "px_per_degree > 0"),
    "fovea_span_deg": (float, lambda v: v > 0, "fovea_span_deg > 0"),
    "peripheral_floor": (float, lambda v: 0 <= v <= 1, "0 <= peripheral_floor <= 1"),
    "saliency": (str, lambda v: v in ("itti", "selfinfo", "surprise"),
                 "saliency in {itti, selfinfo, surprise}"),
    "frame_ms": (float, lambda v: v > 0, "frame_ms > 0"),
}
_REGIME_KEYS = {
    "alpha": (lambda v: 0 < v <= 2, "0 < alpha <= 2"),
    "beta": (lambda v: -1 <= v <= 1, "-1 <= beta <= 1"),
    "gamma": (lambda v: v > 0, "gamma > 0"),
    "delta": (lambda v: math.isfinite(v), "delta finite"),
    "drift": (lambda v: v >= 0, "drift >= 0"),
    "hazard": (lambda v: 0 < v <= 1, "0 < hazard <= 1"),
    "count": (lambda v: v > 0, "count > 0"),
}
_RUN_KEYS = ("saliency", "frame_ms")


@dataclass
class RunConfig:
    walker: WalkerConfig
    motor: RegimeMotorParams
    saliency: str = "itti"
    frame_ms: float | None = None

    def to_dict(self) -> dict:
        d = {f.name: getattr(self.walker, f.name) for f in fields(self.walker)}
        d["counts"] = list(d["counts"])
        d["motor"] = [{"alpha": m.stable.alpha, "beta": m.stable.beta, "gamma": m.stable.gamma,
                       "delta": m.stable.delta, "drift": m.drift, "hazard": m.hazard}
                      for m in self.motor.regimes]
        d["saliency"] = self.saliency
        d["frame_ms"] = self.frame_ms
        return d


def _convert(key: str, kind, text: str):
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError(text)
            return v
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}", key) from None


def parse_config(text: str, require_seed: bool = False) -> RunConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    top, per_regime = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _CONFIG_KEYS:
            kind, check, bound = _CONFIG_KEYS[key]
            v = _convert(key, kind, value)
            if not check(v):
                raise ConfigError(f"{key}={value} violates {bound}", key)
            top[key] = v
            continue
        head, _, sub = key.partition(".")
        if head.startswith("regime") and head[6:].isdigit() and sub in _REGIME_KEYS:
            check, bound = _REGIME_KEYS[sub]
            v = _convert(key, float, value)
            if not check(v):
                raise ConfigError(f"{key}={value} violates {bound}", key)
            per_regime.setdefault(int(head[6:]), {})[sub] = v
            continue
        raise ConfigError(f"unknown config key {key!r}", key)

    if require_seed and "seed" not in top:
        raise ConfigError("missing required key 'seed'", "seed")
    n = top.get("regimes", 3)
    for k in per_regime:
        if k >= n:
            raise ConfigError(f"regime{k} given but regimes = {n}", f"regime{k}")
    motors = list(default_motors(n))
    counts = list(WalkerConfig(regimes=n).counts)
    for k, over in per_regime.items():
        m = motors[k]
        s = m.stable
        stable = AlphaStableParams(over.get("alpha", s.alpha), over.get("beta", s.beta),
                                   over.get("gamma", s.gamma), over.get("delta", s.delta))
        motors[k] = RegimeMotor(stable, over.get("drift", m.drift), over.get("hazard", m.hazard))
        if "count" in over:
            counts[k] = over["count"]
    run = {k: top.pop(k) for k in _RUN_KEYS if k in top}
    try:
        walker = WalkerConfig(counts=tuple(counts), **top)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(walker, RegimeMotorParams(tuple(motors)), run.get("saliency", "itti"),
                     run.get("frame_ms"))


def load_config(path, require_seed: bool = False) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    return parse_config(path.read_text(encoding="utf-8"), require_seed)
