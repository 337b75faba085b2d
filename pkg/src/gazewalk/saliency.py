"""Early-vision saliency: feature pyramids, center-surround conspicuity,
self-information and Bayesian surprise.

Everything here is a pure function of its inputs except the belief model
used by surprise, which is threaded explicitly through
``bayesian_surprise_step``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.special import digamma

from .errors import DataError, DimensionError, ParameterError, SupportError

CHANNELS = ("intensity", "rg", "by", "ori_0", "ori_45", "ori_90", "ori_135")
ORIENTATIONS = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
DEFAULT_WEIGHTS = (1.0, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25)
MAX_HIST_CELLS = 4096
MIN_LEVEL_SIZE = 8
NOISE_FLOOR = 1e-10

# value ranges of the quantized channels (intensity, rg, by)
_CHANNEL_RANGES = ((0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))


@dataclass
class ImageFrame:
    """A raster frame with values in [0, 1], stored as (height, width, channels)."""

    data: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DataError(f"frame must be HxW, HxWx1 or HxWx3, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("frame contains non-finite values")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise DataError("frame values must lie in [0, 1]")
        self.data = data

    @classmethod
    def from_uint8(cls, array, timestamp: float = 0.0) -> "ImageFrame":
        return cls(np.asarray(array, dtype=float) / 255.0, timestamp)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class FeatureStack:
    """Per-channel dyadic pyramids; ``pyramids[name][0]`` is full resolution."""

    pyramids: dict[str, list[np.ndarray]]

    @property
    def levels(self) -> int:
        return len(self.pyramids["intensity"])

    @property
    def shape(self) -> tuple[int, int]:
        return self.pyramids["intensity"][0].shape


@dataclass
class SaliencyMap:
    """Nonnegative scalar field over the image grid.

    ``normalization`` is ``"sum"`` (a probability map), ``"max"`` (peak 1)
    or ``"raw"`` (unnormalized scores, e.g. surprise in nats).
    """

    values: np.ndarray
    normalization: str = "sum"
    degenerate: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError("saliency map must be 2-D")
        if not np.all(np.isfinite(values)) or (values.size and values.min() < 0):
            raise DataError("saliency values must be finite and nonnegative")
        if self.normalization not in ("sum", "max", "raw"):
            raise ParameterError(f"unknown normalization {self.normalization!r}")
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def uniform(cls, height: int, width: int) -> "SaliencyMap":
        return cls(np.full((height, width), 1.0 / (height * width)), "sum", degenerate=True)

    @classmethod
    def from_scores(cls, scores: np.ndarray) -> "SaliencyMap":
        """Sum-normalize ``scores``; an all-zero field becomes the uniform map."""
        scores = np.asarray(scores, dtype=float)
        total = scores.sum()
        if not total > 0:
            return cls.uniform(*scores.shape)
        return cls(scores / total, "sum")

    def sum_normalized(self) -> "SaliencyMap":
        if self.normalization == "sum":
            return self
        return SaliencyMap.from_scores(self.values)

    def max_normalized(self) -> np.ndarray:
        peak = self.values.max()
        if peak <= 0:
            return np.ones_like(self.values)
        return self.values / peak


# ---------------------------------------------------------------------------
# feature front end


def _opponency(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    red = np.maximum(r - (g + b) / 2, 0)
    green = np.maximum(g - (r + b) / 2, 0)
    blue = np.maximum(b - (r + g) / 2, 0)
    yellow = np.maximum((r + g) / 2 - np.abs(r - g) / 2 - b, 0)
    return red - green, blue - yellow


def _gabor_kernel(theta: float, sigma: float = 2.0, wavelength: float = 5.0,
                  aspect: float = 0.5, radius: int = 5) -> np.ndarray:
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1].astype(float)
    xr = x * math.cos(theta) + y * math.sin(theta)
    yr = -x * math.sin(theta) + y * math.cos(theta)
    envelope = np.exp(-(xr ** 2 + (aspect * yr) ** 2) / (2 * sigma ** 2))
    even = envelope * np.cos(2 * math.pi * xr / wavelength)
    even -= envelope * (even.sum() / envelope.sum())  # zero DC response
    odd = envelope * np.sin(2 * math.pi * xr / wavelength)
    norm = np.abs(even).sum()
    return (even + 1j * odd) / norm


_GABORS = [_gabor_kernel(t) for t in ORIENTATIONS]


def _downsample(a: np.ndarray) -> np.ndarray:
    return ndimage.gaussian_filter(a, sigma=1.0, mode="reflect")[::2, ::2]


def _orientation_energy(level: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    re = ndimage.convolve(level, kernel.real, mode="reflect")
    im = ndimage.convolve(level, kernel.imag, mode="reflect")
    return np.hypot(re, im)


def max_levels(width: int, height: int) -> int:
    """Largest pyramid depth allowed for a frame of this size."""
    side = min(width, height)
    levels = 0
    while side / 2 ** levels >= MIN_LEVEL_SIZE:
        levels += 1
    return levels


def build_feature_stack(frame: ImageFrame, levels: int) -> FeatureStack:
    if levels < 1:
        raise ParameterError("levels must be >= 1")
    if min(frame.width, frame.height) / 2 ** (levels - 1) < MIN_LEVEL_SIZE:
        raise DimensionError(
            f"{frame.width}x{frame.height} frame too small for {levels} pyramid levels"
        )
    data = frame.data
    if frame.channels == 3:
        intensity = data.mean(axis=2)
        rg, by = _opponency(data)
    else:
        intensity = data[..., 0].copy()
        rg = np.zeros_like(intensity)
        by = np.zeros_like(intensity)

    pyramids: dict[str, list[np.ndarray]] = {"intensity": [intensity], "rg": [rg], "by": [by]}
    for _ in range(levels - 1):
        for name in ("intensity", "rg", "by"):
            pyramids[name].append(_downsample(pyramids[name][-1]))
    for name, kernel in zip(CHANNELS[3:], _GABORS):
        pyramids[name] = [_orientation_energy(lv, kernel) for lv in pyramids["intensity"]]
    return FeatureStack(pyramids)


def resize_bilinear(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling with pixel-center alignment and edge clamping."""
    if a.shape == tuple(shape):
        return a
    h, w = a.shape
    H, W = shape
    ys = np.clip((np.arange(H) + 0.5) * h / H - 0.5, 0, h - 1)
    xs = np.clip((np.arange(W) + 0.5) * w / W - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = a[y0][:, x0] * (1 - fx) + a[y0][:, x1] * fx
    bottom = a[y1][:, x0] * (1 - fx) + a[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def center_surround_conspicuity(stack: FeatureStack, center_levels: Sequence[int],
                                delta_levels: Sequence[int]) -> list[np.ndarray]:
    """One across-scale difference map per channel, in ``CHANNELS`` order."""
    centers = sorted(set(center_levels))
    deltas = sorted(set(delta_levels))
    if not centers or not deltas:
        raise ParameterError("center and delta level sets must be nonempty")
    if min(deltas) < 1 or min(centers) < 0:
        raise ParameterError("center levels must be >= 0 and deltas >= 1")
    if max(centers) + max(deltas) >= stack.levels:
        raise ParameterError(
            f"level {max(centers) + max(deltas)} requested but stack has {stack.levels}"
        )
    shape = stack.shape
    maps = []
    for name in CHANNELS:
        pyr = stack.pyramids[name]
        up = {lv: resize_bilinear(pyr[lv], shape)
              for lv in set(centers) | {c + d for c in centers for d in deltas}}
        acc = np.zeros(shape)
        for c in centers:
            for d in deltas:
                acc += np.abs(up[c] - up[c + d])
        maps.append(acc)
    return maps


def _promote(m: np.ndarray) -> np.ndarray:
    peak = m.max()
    # maps holding only rounding noise must not be stretched into signal
    if not peak > NOISE_FLOOR:
        return np.zeros_like(m)
    r = m / peak
    is_peak = (r == ndimage.maximum_filter(r, size=3, mode="nearest")) & (r > 0) & (r < 1)
    mean_other = r[is_peak].mean() if is_peak.any() else 0.0
    return r * (1.0 - mean_other) ** 2


def normalize_and_combine(maps: Sequence[np.ndarray],
                          weights: Sequence[float] | None = None) -> SaliencyMap:
    """Max-rescale each map, weight it by its peak promotion, sum, sum-normalize.

    Maps whose weight is zero are skipped entirely. An all-zero result maps
    to the uniform distribution with ``degenerate=True``.
    """
    if not maps:
        raise ParameterError("no maps to combine")
    if weights is None:
        weights = [1.0] * len(maps)
    if len(weights) != len(maps):
        raise ParameterError("one weight per map required")
    if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise ParameterError("weights must be nonnegative with at least one > 0")
    shape = np.shape(maps[0])
    if any(np.shape(m) != shape for m in maps):
        raise DimensionError("all maps must share dimensions")
    combined = None
    for m, w in zip(maps, weights):
        if w == 0:
            continue
        term = w * _promote(np.asarray(m, dtype=float))
        combined = term if combined is None else combined + term
    return SaliencyMap.from_scores(combined)


def itti_saliency(frame: ImageFrame, levels: int | None = None,
                  center_levels: Sequence[int] = (0, 1, 2),
                  delta_levels: Sequence[int] = (2, 3),
                  weights: Sequence[float] = DEFAULT_WEIGHTS) -> SaliencyMap:
    """Feature stack -> conspicuity -> combined map, with level sets trimmed
    to what the frame size allows."""
    if levels is None:
        levels = min(5, max_levels(frame.width, frame.height))
    stack = build_feature_stack(frame, levels)
    deltas = [d for d in delta_levels if d < levels] or [1]
    centers = [c for c in center_levels if c + max(deltas) < levels] or [0]
    maps = center_surround_conspicuity(stack, centers, deltas)
    return normalize_and_combine(maps, weights)


# ---------------------------------------------------------------------------
# information-theoretic saliency


def quantize_features(stack: FeatureStack, bins: int, level: int = 0) -> tuple[np.ndarray, int]:
    """Joint bin index of (intensity, rg, by) per pixel, and the number of cells.

    Per-channel bins are reduced so the joint histogram stays within
    ``MAX_HIST_CELLS`` cells.
    """
    if bins < 2:
        raise ParameterError("bins must be >= 2")
    bins = min(bins, int(round(MAX_HIST_CELLS ** (1 / 3))))
    joint = None
    for name, (lo, hi) in zip(("intensity", "rg", "by"), _CHANNEL_RANGES):
        v = stack.pyramids[name][level]
        idx = np.clip(np.floor((v - lo) / (hi - lo) * bins), 0, bins - 1).astype(np.int64)
        joint = idx if joint is None else joint * bins + idx
    return joint, bins ** 3


def self_information(stack: FeatureStack, bins: int = 8) -> np.ndarray:
    """Per-pixel -log P(F), with P estimated by the frame's joint histogram."""
    joint, cells = quantize_features(stack, bins)
    counts = np.bincount(joint.ravel(), minlength=cells)
    return -np.log(counts[joint] / joint.size)


def self_information_map(stack: FeatureStack, bins: int = 8) -> SaliencyMap:
    return SaliencyMap.from_scores(self_information(stack, bins))


def kl_divergence(p, q) -> float:
    """Discrete KL(p || q) in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ParameterError("p and q must have the same support size")
    for name, d in (("p", p), ("q", q)):
        if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
            raise ParameterError(f"{name} is not a probability distribution")
    support = p > 0
    if np.any(q[support] <= 0):
        raise SupportError("q is zero where p is positive")
    return float(max(np.sum(p[support] * np.log(p[support] / q[support])), 0.0))


@dataclass
class LocationBeliefModel:
    """Per-location Dirichlet counts over quantized feature bins, shape (H, W, K)."""

    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.ndim != 3:
            raise DimensionError("counts must have shape (height, width, bins)")
        if np.any(self.counts <= 0):
            raise ParameterError("Dirichlet counts must be > 0")

    @classmethod
    def symmetric(cls, height: int, width: int, n_bins: int, prior: float = 1.0):
        return cls(np.full((height, width, n_bins), float(prior)))

    @property
    def n_bins(self) -> int:
        return self.counts.shape[2]


def bayesian_surprise_step(model: LocationBeliefModel,
                           frame_bins: np.ndarray) -> tuple[SaliencyMap, LocationBeliefModel]:
    """Surprise of one observation per pixel and the updated belief model.

    Observing bin k turns Dir(a) into Dir(a + e_k); the KL of posterior from
    prior then collapses to log(a0/a_k) + digamma(a_k + 1) - digamma(a0 + 1).
    """
    frame_bins = np.asarray(frame_bins)
    if frame_bins.shape != model.counts.shape[:2]:
        raise DimensionError(
            f"frame bins {frame_bins.shape} do not match model {model.counts.shape[:2]}"
        )
    if frame_bins.size and (frame_bins.min() < 0 or frame_bins.max() >= model.n_bins):
        raise DataError(f"bin index outside [0, {model.n_bins})")
    idx = frame_bins.astype(np.int64)[..., None]
    a = model.counts
    a0 = a.sum(axis=2)
    ak = np.take_along_axis(a, idx, axis=2)[..., 0]
    surprise = np.log(a0) - np.log(ak) + digamma(ak + 1.0) - digamma(a0 + 1.0)
    surprise = np.maximum(surprise, 0.0)
    updated = a.copy()
    np.put_along_axis(updated, idx, ak[..., None] + 1.0, axis=2)
    return SaliencyMap(surprise, "raw"), LocationBeliefModel(updated)


class SurpriseTracker:
    """Runs surprise over a frame sequence at a coarse pyramid level."""

    def __init__(self, bins: int = 4, level: int = 2, prior: float = 1.0):
        self.bins = bins
        self.level = level
        self.prior = prior
        self.model: LocationBeliefModel | None = None

    def __call__(self, frame: ImageFrame) -> SaliencyMap:
        level = min(self.level, max_levels(frame.width, frame.height) - 1)
        stack = build_feature_stack(frame, level + 1)
        joint, cells = quantize_features(stack, self.bins, level)
        if self.model is None:
            self.model = LocationBeliefModel.symmetric(*joint.shape, cells, self.prior)
        raw, self.model = bayesian_surprise_step(self.model, joint)
        full = resize_bilinear(raw.values, stack.shape)
        return SaliencyMap.from_scores(np.maximum(full, 0.0))
