"""Scan-path statistics: event segmentation, CCDF tails, KS, NSS/AUC."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import kolmogorov

from .errors import DataError, DegenerateMapError, EstimationError, InputError, ParameterError
from .saliency import SaliencyMap

DEFAULT_VELOCITY_DEG_S = 30.0
MIN_FIXATION_MS = 80.0
MIN_TAIL_POINTS = 20
TAIL_CUTOFFS = (0.75, 0.90)
TAIL_TOLERANCE = 0.25
MODE_BOUNDS_DEG = (2.0, 8.0)
MODE_NAMES = ("pursuit", "small", "large")


def deg_to_px_per_s(deg_per_s: float, px_per_degree: float) -> float:
    """Convert an angular velocity threshold to pixels per second."""
    return deg_per_s * px_per_degree


@dataclass
class GazeSamples:
    t_ms: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.t_ms = np.asarray(self.t_ms, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (self.t_ms.shape == self.x.shape == self.y.shape) or self.t_ms.ndim != 1:
            raise DataError("t, x, y must be 1-D arrays of equal length")
        if self.t_ms.size > 1:
            dt = np.diff(self.t_ms)
            if np.any(dt <= 0):
                raise DataError("timestamps must be strictly increasing")
            period = float(np.median(dt))
            if np.any(np.abs(dt - period) > period):
                raise DataError("sampling is not uniform within one sample period")

    def __len__(self):
        return self.t_ms.size

    @property
    def period_ms(self) -> float:
        return float(np.median(np.diff(self.t_ms)))

    @property
    def rate_hz(self) -> float:
        return 1000.0 / self.period_ms


@dataclass(frozen=True)
class GazeEvent:
    kind: str  # "fixation" or "saccade"
    start: int  # first sample index
    stop: int  # last sample index (inclusive)
    t_start_ms: float
    t_end_ms: float
    x: float
    y: float
    l: float = 0.0
    theta: float = 0.0

    @property
    def duration_ms(self) -> float:
        return self.t_end_ms - self.t_start_ms


def _runs(mask: np.ndarray) -> list[tuple[bool, int, int]]:
    """(value, start, stop inclusive) for maximal constant runs."""
    edges = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    starts = np.concatenate([[0], edges])
    stops = np.concatenate([edges - 1, [mask.size - 1]])
    return [(bool(mask[s]), int(s), int(e)) for s, e in zip(starts, stops)]


def segment_events(samples: GazeSamples, velocity_threshold: float,
                   min_fixation_ms: float = MIN_FIXATION_MS) -> list[GazeEvent]:
    """I-VT segmentation into fixations and saccades.

    Sample i is fast when |p_i - p_(i-1)| / dt exceeds the threshold (px/s);
    sample 0 inherits the label of sample 1. Slow runs shorter than
    ``min_fixation_ms`` are folded into the surrounding saccade, unless the
    whole trace is slow. Events partition the sample indices.
    """
    n = len(samples)
    if n < 3:
        raise DataError("need at least 3 samples")
    if not velocity_threshold > 0:
        raise ParameterError("velocity threshold must be > 0")
    t, x, y = samples.t_ms, samples.x, samples.y
    period = samples.period_ms
    v = np.hypot(np.diff(x), np.diff(y)) / (np.diff(t) / 1000.0)
    fast = np.concatenate([[v[0] > velocity_threshold], v > velocity_threshold])
    if fast.any():
        for val, s, e in _runs(fast):
            if not val and (e - s + 1) * period < min_fixation_ms:
                fast[s:e + 1] = True
    if fast.all() and not (v > velocity_threshold).any():
        fast[:] = False

    events = []
    for val, s, e in _runs(fast):
        ts, te = float(t[s]), float(t[e]) + period
        if val:
            a = max(s - 1, 0)
            dx, dy = x[e] - x[a], y[e] - y[a]
            events.append(GazeEvent("saccade", s, e, ts, te, float(x[e]), float(y[e]),
                                    float(math.hypot(dx, dy)), float(math.atan2(dy, dx))))
        else:
            events.append(GazeEvent("fixation", s, e, ts, te,
                                    float(x[s:e + 1].mean()), float(y[s:e + 1].mean())))
    return events


@dataclass
class CcdfCurve:
    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x.shape != self.values.shape or self.x.ndim != 1:
            raise ParameterError("support and values must be matching vectors")
        if np.any(np.diff(self.x) <= 0):
            raise ParameterError("support must be strictly increasing")
        if np.any((self.values < 0) | (self.values > 1)) or np.any(np.diff(self.values) > 0):
            raise ParameterError("CCDF values must be nonincreasing in [0, 1]")

    def __len__(self):
        return self.x.size


def ccdf(values: Iterable[float]) -> CcdfCurve:
    """Empirical P(X > x) at the sorted unique sample values."""
    v = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                           dtype=float).ravel())
    if v.size == 0:
        raise InputError("ccdf needs at least one value")
    if v[0] < 0:
        raise InputError("ccdf expects nonnegative values")
    u = np.unique(v)
    return CcdfCurve(u, 1.0 - np.searchsorted(v, u, side="right") / v.size)


def tail_exponent(curve: CcdfCurve | Sequence[float] | np.ndarray,
                  cutoff_quantile: float = TAIL_CUTOFFS[0]) -> float:
    """Negated least-squares slope of log F̄ against log x over the upper tail.

    Tail points are those with 0 < F̄(x) <= 1 - cutoff_quantile, i.e. the
    support above the ``cutoff_quantile`` quantile.
    """
    if not isinstance(curve, CcdfCurve):
        curve = ccdf(curve)
    if not 0 <= cutoff_quantile < 1:
        raise ParameterError("cutoff quantile must lie in [0, 1)")
    keep = (curve.values > 0) & (curve.values <= 1 - cutoff_quantile + 1e-12) & (curve.x > 0)
    if keep.sum() < MIN_TAIL_POINTS:
        raise EstimationError(f"only {int(keep.sum())} tail points above the cutoff, "
                              f"need {MIN_TAIL_POINTS}")
    slope = np.polyfit(np.log(curve.x[keep]), np.log(curve.values[keep]), 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class TailReport:
    exponent: float
    cutoffs: tuple[float, ...]
    exponents: tuple[float, ...]
    power_law: bool

    @property
    def label(self) -> str:
        return "power-law" if self.power_law else "non-power-law"

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "cutoffs": list(self.cutoffs),
                "exponents": list(self.exponents), "label": self.label}


def tail_stability(curve, cutoffs: Sequence[float] = TAIL_CUTOFFS,
                   tolerance: float = TAIL_TOLERANCE) -> TailReport:
    """Fit the tail at two cutoffs; flag non-power-law when the slopes differ
    by more than ``tolerance`` relative to the smaller one."""
    if not isinstance(curve, CcdfCurve):
        curve = ccdf(curve)
    ex = tuple(tail_exponent(curve, q) for q in cutoffs)
    lo, hi = min(ex), max(ex)
    stable = lo > 0 and (hi - lo) / lo <= tolerance
    return TailReport(ex[0], tuple(cutoffs), ex, stable)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InputError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    p = float(kolmogorov((en + 0.12 + 0.11 / en) * d))
    return d, min(max(p, 0.0), 1.0)


def _values_at(smap, points) -> np.ndarray:
    values = smap.values if isinstance(smap, SaliencyMap) else np.asarray(smap, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    h, w = values.shape
    j = np.rint(pts[:, 0]).astype(int)
    i = np.rint(pts[:, 1]).astype(int)
    ok = (i >= 0) & (i < h) & (j >= 0) & (j < w)
    if not ok.any():
        raise InputError("no fixation lies inside the map")
    return values, values[i[ok], j[ok]]


def nss(smap, fixations) -> float:
    """Mean z-scored map value at the fixations (x, y)."""
    values, at = _values_at(smap, fixations)
    sd = values.std()
    # a constant map can carry a tiny nonzero std from rounding in the mean
    if np.ptp(values) == 0 or not sd > 0:
        raise DegenerateMapError("NSS is undefined on a zero-variance map")
    return float(((at - values.mean()) / sd).mean())


def auc(smap, fixations) -> float:
    """Exact ROC area: fixated values against every pixel, ties counted half."""
    values, at = _values_at(smap, fixations)
    neg = np.sort(values.ravel())
    below = np.searchsorted(neg, at, side="left")
    ties = np.searchsorted(neg, at, side="right") - below
    return float(((below + 0.5 * ties) / neg.size).mean())


def fixation_metrics(smap, fixations) -> tuple[float, float]:
    """(NSS, AUC); NSS is NaN when the map has zero variance."""
    try:
        n = nss(smap, fixations)
    except DegenerateMapError:
        n = float("nan")
    return n, auc(smap, fixations)


def direction_histogram(shifts, bins: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Bin centres and frequencies of shift directions.

    Bins are centred on multiples of 2*pi/bins, so the cardinal directions
    each fall in the middle of a bin. ``shifts`` may be GazeShift objects or
    raw angles.
    """
    if bins < 4 or bins % 4:
        raise ParameterError("bins must be >= 4 and divisible by 4")
    theta = np.array([getattr(s, "theta", s) for s in shifts], dtype=float)
    width = 2 * np.pi / bins
    idx = np.floor(np.mod(theta + width / 2, 2 * np.pi) / width).astype(int) % bins
    counts = np.bincount(idx, minlength=bins).astype(float)
    total = counts.sum()
    centres = np.arange(bins) * width
    return centres, counts / total if total else counts


def split_modes(amplitudes, px_per_degree: float,
                bounds_deg: Sequence[float] = MODE_BOUNDS_DEG) -> dict[str, np.ndarray]:
    """Split amplitudes (px) into pursuit / small / large groups at degree bounds."""
    a = np.asarray(amplitudes, dtype=float)
    lo, hi = (b * px_per_degree for b in bounds_deg)
    return {"pursuit": a[a < lo], "small": a[(a >= lo) & (a <= hi)], "large": a[a > hi]}
