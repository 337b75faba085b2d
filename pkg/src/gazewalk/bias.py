"""Oculomotor bias models P(l, theta) over gaze-shift amplitude and direction.

Three factorizations are supported:

* ``independent``                P(l) P(theta)
* ``amplitude-given-direction``  P(l | sector(theta)) P(theta)
* ``joint-kde``                  product-kernel KDE over (l, theta) pairs

Direction persistence blends the marginal direction law with a wrapped
Cauchy centred on the previous direction plus the mean turning angle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import i0e, ive

from .errors import EstimationError, ModelStateError, ParameterError
from .stable import AlphaStableParams, fit_alpha_stable, sample_alpha_stable, stable_cdf, stable_pdf

MODES = ("independent", "amplitude-given-direction", "joint-kde")
MIN_SHIFTS = 100
MAX_CONCENTRATION = 1e5
TWO_PI = 2 * math.pi
_SQRT_2PI = math.sqrt(TWO_PI)


def _chunked(fn, x, chunk: int = 512):
    """Apply a kernel-sum ``fn`` over flattened ``x`` in chunks to bound memory."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.shape)
    for i in range(0, flat.size, chunk):
        out[i:i + chunk] = fn(flat[i:i + chunk])
    return out.reshape(x.shape)


def _pairwise(fn, l, theta, chunk: int = 256):
    """Chunked evaluation of a kernel sum over broadcast (l, theta) pairs."""
    l, theta = np.broadcast_arrays(np.asarray(l, dtype=float), np.asarray(theta, dtype=float))
    fl, ft = l.ravel(), theta.ravel()
    out = np.empty(fl.shape)
    for i in range(0, fl.size, chunk):
        out[i:i + chunk] = fn((fl[i:i + chunk], ft[i:i + chunk]))
    return out.reshape(l.shape)


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(a, dtype=float), TWO_PI) if np.ndim(a) \
        else math.pi - (math.pi - a) % TWO_PI


@dataclass(frozen=True)
class GazeShift:
    dx: float
    dy: float
    l: float
    theta: float
    duration: float = 0.0

    def __post_init__(self):
        if self.l < 0:
            raise ParameterError("amplitude must be >= 0")
        if not -math.pi < self.theta <= math.pi:
            raise ParameterError(f"theta={self.theta} outside (-pi, pi]")
        tol = 1e-9 * max(1.0, self.l)
        if abs(math.hypot(self.dx, self.dy) - self.l) > tol:
            raise ParameterError("amplitude inconsistent with (dx, dy)")
        if self.l > 0 and (abs(self.l * math.cos(self.theta) - self.dx) > tol
                           or abs(self.l * math.sin(self.theta) - self.dy) > tol):
            raise ParameterError("direction inconsistent with (dx, dy)")

    @classmethod
    def from_polar(cls, l: float, theta: float, duration: float = 0.0) -> "GazeShift":
        theta = float(wrap_angle(theta))
        return cls(l * math.cos(theta), l * math.sin(theta), float(l), theta, duration)

    @classmethod
    def from_displacement(cls, dx: float, dy: float, duration: float = 0.0) -> "GazeShift":
        theta = float(wrap_angle(math.atan2(dy, dx)))
        return cls(float(dx), float(dy), math.hypot(dx, dy), theta, duration)


# ---------------------------------------------------------------------------
# amplitude models


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd
    h = 0.9 * spread * x.size ** -0.2
    # constant data: fall back to a tiny kernel relative to the data scale
    return float(h) if h > 0 else 1e-6 * max(1.0, float(np.abs(x).mean()))


def _reflected_gauss(l, centers, h):
    """Gaussian kernels at ``centers`` reflected about 0, shape l.shape + centers.shape."""
    d1 = (l[..., None] - centers) / h
    d2 = (l[..., None] + centers) / h
    return (np.exp(-0.5 * d1 ** 2) + np.exp(-0.5 * d2 ** 2)) / (h * _SQRT_2PI)


@dataclass
class AmplitudeModel:
    """Law of the shift amplitude l >= 0.

    ``stable``: l = |X| with X alpha-stable; ``kde``: Gaussian KDE reflected
    at 0; ``point``: all mass at ``value`` (sampling only, no density).
    """

    kind: str
    stable: AlphaStableParams | None = None
    samples: np.ndarray | None = field(default=None, repr=False)
    bandwidth: float | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind == "stable" and self.stable is None:
            raise ParameterError("stable amplitude needs parameters")
        if self.kind == "kde":
            if self.samples is None or self.bandwidth is None or self.bandwidth <= 0:
                raise ParameterError("kde amplitude needs samples and a positive bandwidth")
            self.samples = np.asarray(self.samples, dtype=float)
        if self.kind == "point" and (self.value is None or self.value < 0):
            raise ParameterError("point amplitude needs a value >= 0")
        if self.kind not in ("stable", "kde", "point"):
            raise ParameterError(f"unknown amplitude kind {self.kind!r}")

    def pdf(self, l):
        l = np.asarray(l, dtype=float)
        if self.kind == "stable":
            out = stable_pdf(l, self.stable) + stable_pdf(-l, self.stable)
        elif self.kind == "kde":
            out = _chunked(lambda v: _reflected_gauss(v, self.samples, self.bandwidth).mean(axis=-1), l)
        else:
            raise ModelStateError("point-mass amplitude has no density")
        return np.where(l < 0, 0.0, out)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "stable":
            return np.abs(sample_alpha_stable(self.stable, rng, size))
        if self.kind == "kde":
            idx = rng.integers(self.samples.size, size=size)
            return np.abs(self.samples[idx] + self.bandwidth * rng.standard_normal(size))
        return self.value if size is None else np.full(size, float(self.value))

    def upper(self, q: float = 0.999) -> float:
        """An amplitude above which at most ``1 - q`` of the mass lies."""
        if self.kind == "point":
            return float(self.value)
        if self.kind == "kde":
            return float(np.quantile(self.samples, q) + 6 * self.bandwidth)
        p = self.stable
        if p.alpha == 1 and p.beta == 0:
            return abs(p.delta) + p.gamma * math.tan(math.pi / 2 * q)
        lo, hi = 0.0, abs(p.delta) + p.gamma
        while stable_cdf(hi, p) - stable_cdf(-hi, p) < q:
            hi *= 2
        for _ in range(40):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if stable_cdf(mid, p) - stable_cdf(-mid, p) < q else (lo, mid)
        return hi

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "stable":
            d["stable"] = self.stable.to_dict()
        elif self.kind == "kde":
            d["samples"] = self.samples.tolist()
            d["bandwidth"] = self.bandwidth
        else:
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AmplitudeModel":
        stable = AlphaStableParams(**d["stable"]) if "stable" in d else None
        return cls(d["kind"], stable=stable, samples=d.get("samples"),
                   bandwidth=d.get("bandwidth"), value=d.get("value"))


def fit_amplitude(l: np.ndarray, family: str = "kde", bandwidth="silverman") -> AmplitudeModel:
    l = np.asarray(l, dtype=float)
    if family == "stable":
        # symmetrize so the folded law is fitted with beta = 0, delta = 0
        p = fit_alpha_stable(np.concatenate([l, -l]))
        return AmplitudeModel("stable", stable=AlphaStableParams(p.alpha, 0.0, p.gamma, 0.0))
    if family != "kde":
        raise ParameterError(f"unknown amplitude family {family!r}")
    h = silverman_bandwidth(l) if bandwidth == "silverman" else float(bandwidth)
    return AmplitudeModel("kde", samples=l, bandwidth=h)


# ---------------------------------------------------------------------------
# direction models


def vonmises_pdf(d, kappa: float):
    return np.exp(kappa * (np.cos(d) - 1.0)) / (TWO_PI * i0e(kappa))


def mean_resultant(theta) -> complex:
    theta = np.asarray(theta, dtype=float)
    return complex(np.mean(np.exp(1j * theta))) if theta.size else 0j


def concentration_from_resultant(r: float) -> float:
    """Approximate von Mises ML concentration for mean resultant length r."""
    if r < 0.53:
        k = 2 * r + r ** 3 + 5 * r ** 5 / 6
    elif r < 0.85:
        k = -0.4 + 1.39 * r + 0.43 / (1 - r)
    else:
        denom = r ** 3 - 4 * r ** 2 + 3 * r
        k = 1 / denom if denom > 0 else MAX_CONCENTRATION
    return float(min(k, MAX_CONCENTRATION))


def circular_kde_concentration(theta: np.ndarray) -> float:
    """Kernel concentration from the plug-in rule for von Mises KDE.

    The rule is floored at the Silverman-equivalent concentration for a
    1 rad reference spread so multimodal data (resultant near 0) are not
    smoothed into a flat density.
    """
    n = len(theta)
    k = concentration_from_resultant(abs(mean_resultant(theta)))
    ratio = ive(2, 2 * k) / ive(0, k) ** 2
    nu = (3 * n * k ** 2 * ratio / (4 * math.sqrt(math.pi))) ** 0.4
    floor = 1.0 / (0.9 * n ** -0.2) ** 2
    return float(min(max(nu, floor), MAX_CONCENTRATION))


@dataclass
class DirectionModel:
    """Marginal law of theta on (-pi, pi]: ``uniform``, ``histogram`` or ``kde``."""

    kind: str = "uniform"
    freqs: np.ndarray | None = field(default=None, repr=False)
    thetas: np.ndarray | None = field(default=None, repr=False)
    concentration: float | None = None

    def __post_init__(self):
        if self.kind == "histogram":
            f = np.asarray(self.freqs, dtype=float)
            if f.ndim != 1 or f.size < 1 or f.min() < 0 or not f.sum() > 0:
                raise ParameterError("histogram needs nonnegative frequencies")
            self.freqs = f / f.sum()
        elif self.kind == "kde":
            if self.thetas is None or not self.concentration:
                raise ParameterError("kde direction needs angles and a concentration")
            self.thetas = np.asarray(self.thetas, dtype=float)
        elif self.kind != "uniform":
            raise ParameterError(f"unknown direction kind {self.kind!r}")

    def _bin(self, theta):
        n = self.freqs.size
        return np.floor(np.mod(np.asarray(theta) + math.pi, TWO_PI) / (TWO_PI / n)).astype(int) % n

    def kernel_weights(self, theta):
        """Per-training-angle kernel values at ``theta`` (kde only)."""
        return vonmises_pdf(np.asarray(theta, dtype=float)[..., None] - self.thetas, self.concentration)

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "uniform":
            return np.full(theta.shape, 1 / TWO_PI)
        if self.kind == "histogram":
            return self.freqs[self._bin(theta)] * self.freqs.size / TWO_PI
        return _chunked(lambda t: self.kernel_weights(t).mean(axis=-1), theta)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "uniform":
            return wrap_angle(rng.uniform(-math.pi, math.pi, size))
        if self.kind == "histogram":
            n = self.freqs.size
            b = rng.choice(n, size=size, p=self.freqs)
            return wrap_angle(-math.pi + (b + rng.uniform(size=size)) * TWO_PI / n)
        idx = rng.integers(self.thetas.size, size=size)
        return wrap_angle(self.thetas[idx] + rng.vonmises(0.0, self.concentration, size))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "histogram":
            d["freqs"] = self.freqs.tolist()
        elif self.kind == "kde":
            d["thetas"] = self.thetas.tolist()
            d["concentration"] = self.concentration
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DirectionModel":
        return cls(d["kind"], freqs=d.get("freqs"), thetas=d.get("thetas"),
                   concentration=d.get("concentration"))


def sample_wrapped_cauchy(mu: float, rho: float, rng: np.random.Generator, size=None):
    u = rng.uniform(-math.pi / 2, math.pi / 2, size)
    return wrap_angle(mu + 2 * np.arctan((1 - rho) / (1 + rho) * np.tan(u)))


def wrapped_cauchy_pdf(theta, mu: float, rho: float):
    return (1 - rho ** 2) / (TWO_PI * (1 + rho ** 2 - 2 * rho * np.cos(np.asarray(theta) - mu)))


# ---------------------------------------------------------------------------
# the bias model


@dataclass
class BiasModel:
    """Amplitude/direction prior over gaze shifts.

    ``kappa`` in [0, 1) is both the persistence mixing weight and the
    concentration of the wrapped Cauchy centred on ``prev_theta + turn``.
    For ``amplitude-given-direction`` the amplitude law of sector k (sectors
    centred on k * 2pi / n) is ``sectors[k]``. For ``joint-kde`` the
    amplitude samples and direction angles are paired training shifts.
    """

    mode: str = "independent"
    amplitude: AmplitudeModel | None = None
    direction: DirectionModel | None = None
    sectors: list[AmplitudeModel] | None = None
    kappa: float = 0.0
    turn: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown bias mode {self.mode!r}")
        if not 0 <= self.kappa < 1:
            raise ParameterError("persistence kappa must lie in [0, 1)")
        if self.mode == "joint-kde" and self.amplitude is not None and self.direction is not None:
            if (self.amplitude.kind != "kde" or self.direction.kind != "kde"
                    or self.amplitude.samples.size != self.direction.thetas.size):
                raise ParameterError("joint-kde needs paired kde amplitude and direction data")

    @classmethod
    def isotropic(cls, amplitude: AlphaStableParams | float, kappa: float = 0.0) -> "BiasModel":
        """Analytic model: uniform direction, stable (or point-mass) amplitude."""
        if isinstance(amplitude, AlphaStableParams):
            amp = AmplitudeModel("stable", stable=amplitude)
        else:
            amp = AmplitudeModel("point", value=float(amplitude))
        return cls("independent", amp, DirectionModel("uniform"), kappa=kappa)

    @property
    def fitted(self) -> bool:
        if self.direction is None:
            return False
        if self.mode == "amplitude-given-direction":
            return bool(self.sectors)
        return self.amplitude is not None

    def _check(self):
        if not self.fitted:
            raise ModelStateError("bias model has not been fitted or specified")

    def sector_of(self, theta):
        n = len(self.sectors)
        return np.round(np.asarray(theta) / (TWO_PI / n)).astype(int) % n

    # -- sampling

    def sample_direction(self, prev_theta: float | None, rng: np.random.Generator, size=None):
        self._check()
        theta = self.direction.sample(rng, size)
        if self.kappa > 0 and prev_theta is not None:
            persist = sample_wrapped_cauchy(prev_theta + self.turn, self.kappa, rng, size)
            pick = rng.uniform(size=size) < self.kappa
            theta = np.where(pick, persist, theta) if size is not None else (persist if pick else theta)
        return theta if size is not None else float(theta)

    def sample_amplitude(self, theta: float, rng: np.random.Generator) -> float:
        self._check()
        if self.mode == "independent":
            return float(self.amplitude.sample(rng))
        if self.mode == "amplitude-given-direction":
            return float(self.sectors[int(self.sector_of(theta))].sample(rng))
        w = self.direction.kernel_weights(theta)
        i = rng.choice(w.size, p=w / w.sum())
        return float(abs(self.amplitude.samples[i] + self.amplitude.bandwidth * rng.standard_normal()))

    # -- densities

    def direction_pdf(self, theta, prev_theta: float | None = None):
        self._check()
        base = self.direction.pdf(theta)
        if self.kappa > 0 and prev_theta is not None:
            wc = wrapped_cauchy_pdf(theta, prev_theta + self.turn, self.kappa)
            return (1 - self.kappa) * base + self.kappa * wc
        return base

    def conditional_amplitude_pdf(self, l, theta):
        """P(l | theta) under the model's factorization."""
        self._check()
        if self.mode == "independent":
            return self.amplitude.pdf(l)
        l, theta = np.broadcast_arrays(np.asarray(l, dtype=float), np.asarray(theta, dtype=float))
        if self.mode == "amplitude-given-direction":
            sec = self.sector_of(theta)
            out = np.empty(l.shape)
            for k in np.unique(sec):
                m = sec == k
                out[m] = self.sectors[k].pdf(l[m])
            return out
        amp = self.amplitude

        def cond(lt):
            w = self.direction.kernel_weights(lt[1])
            return (_reflected_gauss(lt[0], amp.samples, amp.bandwidth) * w).sum(axis=-1) / w.sum(axis=-1)

        out = _pairwise(cond, l, theta)
        return np.where(l < 0, 0.0, out)

    def grids(self, n_l: int = 128, n_theta: int = 72) -> dict:
        self._check()
        if self.mode == "amplitude-given-direction":
            top = max(a.upper() for a in self.sectors)
        else:
            top = self.amplitude.upper()
        l = np.linspace(0.0, top, n_l)
        theta = np.linspace(-math.pi, math.pi, n_theta, endpoint=False) + math.pi / n_theta
        marginal_l = (self.amplitude.pdf(l) if self.amplitude is not None
                      and self.amplitude.kind != "point" else None)
        return {
            "l": l.tolist(),
            "theta": theta.tolist(),
            "amplitude_pdf": None if marginal_l is None else marginal_l.tolist(),
            "direction_pdf": self.direction.pdf(theta).tolist(),
        }

    # -- serialization

    def to_json(self) -> str:
        self._check()
        doc = {
            "biasmodel_v": 1,
            "mode": self.mode,
            "kappa": self.kappa,
            "turn": self.turn,
            "amplitude": None if self.amplitude is None else self.amplitude.to_dict(),
            "direction": self.direction.to_dict(),
            "sectors": None if self.sectors is None else [s.to_dict() for s in self.sectors],
        }
        try:
            doc["grids"] = self.grids()
        except ModelStateError:
            doc["grids"] = None
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "BiasModel":
        doc = json.loads(text)
        if doc.get("biasmodel_v") != 1:
            raise ParameterError(f"unsupported bias model version {doc.get('biasmodel_v')!r}")
        amp = doc.get("amplitude")
        sectors = doc.get("sectors")
        return cls(
            mode=doc["mode"],
            amplitude=None if amp is None else AmplitudeModel.from_dict(amp),
            direction=DirectionModel.from_dict(doc["direction"]),
            sectors=None if sectors is None else [AmplitudeModel.from_dict(s) for s in sectors],
            kappa=doc["kappa"],
            turn=doc["turn"],
        )


def persistence(thetas: Sequence[float]) -> tuple[float, float]:
    """(kappa, turn): resultant length and mean angle of successive direction changes."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size < 2:
        return 0.0, 0.0
    c = mean_resultant(np.diff(thetas))
    kappa = min(abs(c), 1.0 - 1e-9)
    turn = float(wrap_angle(np.angle(c))) if abs(c) > 0 else 0.0
    return float(kappa), turn


def fit_bias_model(shifts: Sequence[GazeShift], mode: str = "independent",
                   bandwidth="silverman", amplitude_family: str = "kde",
                   direction_family: str = "kde", n_sectors: int = 8,
                   hist_bins: int = 36) -> BiasModel:
    """Estimate a bias model from a time-ordered sequence of gaze shifts."""
    if mode not in MODES:
        raise ParameterError(f"unknown bias mode {mode!r}")
    if len(shifts) < MIN_SHIFTS:
        raise EstimationError(f"need >= {MIN_SHIFTS} shifts, got {len(shifts)}")
    l = np.array([s.l for s in shifts])
    theta = np.array([s.theta for s in shifts])
    kappa, turn = persistence(theta)

    if mode == "joint-kde" or direction_family == "kde":
        direction = DirectionModel("kde", thetas=theta, concentration=circular_kde_concentration(theta))
    elif direction_family == "histogram":
        edges = np.linspace(-math.pi, math.pi, hist_bins + 1)
        counts, _ = np.histogram(np.mod(theta + math.pi, TWO_PI) - math.pi, bins=edges)
        direction = DirectionModel("histogram", freqs=counts)
    elif direction_family == "uniform":
        direction = DirectionModel("uniform")
    else:
        raise ParameterError(f"unknown direction family {direction_family!r}")

    family = "kde" if mode == "joint-kde" else amplitude_family
    amplitude = fit_amplitude(l, family, bandwidth)
    sectors = None
    if mode == "amplitude-given-direction":
        width = TWO_PI / n_sectors
        sec = np.round(theta / width).astype(int) % n_sectors
        sectors = []
        for k in range(n_sectors):
            sl = l[sec == k]
            # sparse sectors borrow the pooled amplitude law
            try:
                sectors.append(fit_amplitude(sl, family, bandwidth) if sl.size >= 20 else amplitude)
            except EstimationError:
                sectors.append(amplitude)
    return BiasModel(mode, amplitude, direction, sectors, kappa, turn)


def sample_shift(model: BiasModel, prev_theta: float | None, rng: np.random.Generator,
                 duration: float = 0.0) -> GazeShift:
    """Draw theta (persistence-blended when possible), then l given theta."""
    theta = model.sample_direction(prev_theta, rng)
    l = model.sample_amplitude(theta, rng)
    return GazeShift.from_polar(l, theta, duration)


def eval_bias_density(model: BiasModel, l, theta, prev_theta: float | None = None):
    """Joint density P(l, theta), or P(l, theta | prev_theta) with persistence."""
    if not model.fitted:
        raise ModelStateError("bias model has not been fitted or specified")
    l = np.asarray(l, dtype=float)
    if np.any(l < 0):
        raise ParameterError("amplitude must be >= 0")
    theta = np.asarray(theta, dtype=float)
    if model.mode == "joint-kde" and (prev_theta is None or model.kappa == 0):
        amp = model.amplitude

        def joint(lt):
            w = model.direction.kernel_weights(lt[1])
            return (_reflected_gauss(lt[0], amp.samples, amp.bandwidth) * w).mean(axis=-1)

        out = _pairwise(joint, l, theta)
    else:
        out = model.direction_pdf(theta, prev_theta) * model.conditional_amplitude_pdf(l, theta)
    return float(out) if out.ndim == 0 else out
