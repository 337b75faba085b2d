"""Alpha-stable laws in the continuous (S0) parameterization.

Sampling uses the Chambers-Mallows-Stuck transform; fitting uses
McCulloch's (1986) quantile estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.interpolate import RegularGridInterpolator

from .errors import EstimationError, ParameterError

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class AlphaStableParams:
    alpha: float
    beta: float = 0.0
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.delta)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterError(f"non-finite stable parameters {vals}")
        if not 0 < self.alpha <= 2:
            raise ParameterError(f"alpha={self.alpha} outside (0, 2]")
        if not -1 <= self.beta <= 1:
            raise ParameterError(f"beta={self.beta} outside [-1, 1]")
        if not self.gamma > 0:
            raise ParameterError(f"gamma={self.gamma} must be > 0")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta}

    def s1_location(self) -> float:
        """Location of the same law in the S1 (Zolotarev A) parameterization."""
        a, b, g = self.alpha, self.beta, self.gamma
        if a == 1:
            return self.delta - b * g * math.log(g) / HALF_PI
        return self.delta - b * g * math.tan(HALF_PI * a)


def _standard_s1(alpha, beta, v, w):
    """CMS transform of U(-pi/2, pi/2) and Exp(1) arrays into S1(alpha, beta, 1, 0)."""
    if alpha == 1:
        t = HALF_PI + beta * v
        return (t * np.tan(v) - beta * np.log(HALF_PI * w * np.cos(v) / t)) / HALF_PI
    zeta = beta * math.tan(HALF_PI * alpha)
    b = math.atan(zeta) / alpha
    s = (1 + zeta * zeta) ** (1 / (2 * alpha))
    av = alpha * (v + b)
    return (s * np.sin(av) / np.cos(v) ** (1 / alpha)
            * (np.cos(v - av) / w) ** ((1 - alpha) / alpha))


def sample_alpha_stable(params: AlphaStableParams, rng: np.random.Generator, size=None):
    """Draw from S(alpha, beta, gamma, delta; 0).

    Returns a float when ``size`` is None, else an array.
    """
    v = rng.uniform(-HALF_PI, HALF_PI, size)
    w = rng.standard_exponential(size)
    z = _standard_s1(params.alpha, params.beta, v, w)
    if params.alpha != 1:
        z = z - params.beta * math.tan(HALF_PI * params.alpha)
    x = params.gamma * z + params.delta
    return float(x) if size is None else x


def stable_pdf(x, params: AlphaStableParams):
    """Density, with closed forms at alpha=2 and symmetric alpha=1."""
    x = np.asarray(x, dtype=float)
    a, b, g, d = params.alpha, params.beta, params.gamma, params.delta
    if a == 2:
        return stats.norm.pdf(x, loc=d, scale=g * math.sqrt(2))
    if a == 1 and b == 0:
        return stats.cauchy.pdf(x, loc=d, scale=g)
    return stats.levy_stable.pdf(x, a, b, loc=params.s1_location(), scale=g)


def stable_cdf(x, params: AlphaStableParams):
    x = np.asarray(x, dtype=float)
    a, b, g, d = params.alpha, params.beta, params.gamma, params.delta
    if a == 2:
        return stats.norm.cdf(x, loc=d, scale=g * math.sqrt(2))
    if a == 1 and b == 0:
        return stats.cauchy.cdf(x, loc=d, scale=g)
    return stats.levy_stable.cdf(x, a, b, loc=params.s1_location(), scale=g)


# McCulloch (1986), tables III-V and VII.
_NU_ALPHA = np.array([2.439, 2.5, 2.6, 2.7, 2.8, 3.0, 3.2, 3.5, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 25.0])
_NU_BETA = np.array([0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0])
_ALPHA_TABLE = np.array([
    [2.000, 2.000, 2.000, 2.000, 2.000, 2.000, 2.000],
    [1.916, 1.924, 1.924, 1.924, 1.924, 1.924, 1.924],
    [1.808, 1.813, 1.829, 1.829, 1.829, 1.829, 1.829],
    [1.729, 1.730, 1.737, 1.745, 1.745, 1.745, 1.745],
    [1.664, 1.663, 1.663, 1.668, 1.676, 1.676, 1.676],
    [1.563, 1.560, 1.553, 1.548, 1.547, 1.547, 1.547],
    [1.484, 1.480, 1.471, 1.460, 1.448, 1.438, 1.438],
    [1.391, 1.386, 1.378, 1.364, 1.337, 1.318, 1.318],
    [1.279, 1.273, 1.266, 1.250, 1.210, 1.184, 1.150],
    [1.128, 1.121, 1.114, 1.101, 1.067, 1.027, 0.973],
    [1.029, 1.021, 1.014, 1.004, 0.974, 0.935, 0.874],
    [0.896, 0.892, 0.884, 0.883, 0.855, 0.823, 0.769],
    [0.818, 0.812, 0.806, 0.801, 0.780, 0.756, 0.691],
    [0.698, 0.695, 0.692, 0.689, 0.676, 0.656, 0.597],
    [0.593, 0.590, 0.588, 0.586, 0.579, 0.563, 0.513],
])
_BETA_TABLE = np.array([
    [0.0, 2.160, 1.000, 1.000, 1.000, 1.000, 1.000],
    [0.0, 1.592, 3.390, 1.000, 1.000, 1.000, 1.000],
    [0.0, 0.759, 1.800, 1.000, 1.000, 1.000, 1.000],
    [0.0, 0.482, 1.048, 1.694, 1.000, 1.000, 1.000],
    [0.0, 0.360, 0.760, 1.232, 2.229, 1.000, 1.000],
    [0.0, 0.253, 0.518, 0.823, 1.575, 1.000, 1.000],
    [0.0, 0.203, 0.410, 0.632, 1.244, 1.906, 1.000],
    [0.0, 0.165, 0.332, 0.499, 0.943, 1.560, 1.000],
    [0.0, 0.136, 0.271, 0.404, 0.689, 1.230, 2.195],
    [0.0, 0.109, 0.216, 0.323, 0.539, 0.827, 1.917],
    [0.0, 0.096, 0.190, 0.284, 0.472, 0.693, 1.759],
    [0.0, 0.082, 0.163, 0.243, 0.412, 0.601, 1.596],
    [0.0, 0.074, 0.147, 0.220, 0.377, 0.546, 1.482],
    [0.0, 0.064, 0.128, 0.191, 0.330, 0.478, 1.362],
    [0.0, 0.056, 0.112, 0.167, 0.285, 0.428, 1.274],
])
_ALPHA_GRID = np.array([0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0])
_BETA_GRID = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
# rows follow _ALPHA_GRID (ascending alpha)
_NU_C_TABLE = np.array([
    [2.588, 3.073, 4.534, 6.636, 9.144],
    [2.337, 2.634, 3.542, 4.808, 6.247],
    [2.189, 2.392, 3.004, 3.844, 4.775],
    [2.098, 2.244, 2.676, 3.265, 3.912],
    [2.040, 2.149, 2.461, 2.886, 3.356],
    [2.000, 2.085, 2.311, 2.624, 2.973],
    [1.980, 2.040, 2.205, 2.435, 2.696],
    [1.965, 2.007, 2.125, 2.294, 2.491],
    [1.955, 1.984, 2.067, 2.188, 2.333],
    [1.946, 1.967, 2.022, 2.106, 2.211],
    [1.939, 1.952, 1.988, 2.045, 2.116],
    [1.933, 1.940, 1.962, 1.997, 2.043],
    [1.927, 1.930, 1.943, 1.961, 1.987],
    [1.921, 1.922, 1.927, 1.936, 1.947],
    [1.914, 1.915, 1.916, 1.918, 1.921],
    [1.908, 1.908, 1.908, 1.908, 1.908],
])
_NU_ZETA_TABLE = np.array([
    [0.0, -0.061, -0.279, -0.659, -1.198],
    [0.0, -0.078, -0.272, -0.581, -0.997],
    [0.0, -0.089, -0.262, -0.520, -0.853],
    [0.0, -0.096, -0.250, -0.469, -0.742],
    [0.0, -0.099, -0.237, -0.424, -0.652],
    [0.0, -0.098, -0.223, -0.380, -0.576],
    [0.0, -0.095, -0.208, -0.346, -0.508],
    [0.0, -0.090, -0.192, -0.310, -0.447],
    [0.0, -0.084, -0.173, -0.276, -0.390],
    [0.0, -0.075, -0.154, -0.241, -0.335],
    [0.0, -0.066, -0.134, -0.206, -0.283],
    [0.0, -0.056, -0.111, -0.170, -0.232],
    [0.0, -0.043, -0.088, -0.132, -0.179],
    [0.0, -0.030, -0.061, -0.092, -0.123],
    [0.0, -0.017, -0.032, -0.049, -0.064],
    [0.0, 0.000, 0.000, 0.000, 0.000],
])

_psi_alpha = RegularGridInterpolator((_NU_ALPHA, _NU_BETA), _ALPHA_TABLE)
_psi_beta = RegularGridInterpolator((_NU_ALPHA, _NU_BETA), _BETA_TABLE)
_phi_c = RegularGridInterpolator((_ALPHA_GRID, _BETA_GRID), _NU_C_TABLE)
_phi_zeta = RegularGridInterpolator((_ALPHA_GRID, _BETA_GRID), _NU_ZETA_TABLE)

MIN_FIT_SAMPLES = 200


def fit_alpha_stable(samples) -> AlphaStableParams:
    """McCulloch quantile estimate of (alpha, beta, gamma, delta) in S0 form.

    alpha is clamped to [0.5, 2] (the table range) and beta to [-1, 1].
    """
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_FIT_SAMPLES:
        raise EstimationError(f"need >= {MIN_FIT_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise EstimationError("samples contain non-finite values")
    p05, p25, p50, p75, p95 = (float(q) for q in np.percentile(x, [5, 25, 50, 75, 95]))
    iqr = p75 - p25
    if not iqr > 0 or not p95 > p05:
        raise EstimationError("zero interquartile range; data are degenerate")

    nu_alpha = (p95 - p05) / iqr
    nu_beta = (p95 + p05 - 2 * p50) / (p95 - p05)
    sign = 1.0 if nu_beta >= 0 else -1.0
    nb = min(abs(nu_beta), 1.0)
    if nu_alpha < _NU_ALPHA[0]:
        alpha, beta = 2.0, 0.0
    else:
        pt = (min(nu_alpha, _NU_ALPHA[-1]), nb)
        alpha = float(_psi_alpha(pt))
        beta = sign * float(_psi_beta(pt))
    alpha = min(max(alpha, 0.5), 2.0)
    beta = min(max(beta, -1.0), 1.0)

    pt = (alpha, abs(beta))
    gamma = iqr / float(_phi_c(pt))
    zeta = p50 + math.copysign(1.0, beta) * gamma * float(_phi_zeta(pt))
    # McCulloch's zeta is already the S0 location except at alpha = 1,
    # where it is the S1 location
    if alpha == 1:
        zeta += beta * gamma * math.log(gamma) / HALF_PI
    return AlphaStableParams(alpha, beta, gamma, zeta)
