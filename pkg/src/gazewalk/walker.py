"""Gaze walker: the perceive / choose-regime / look-next cycle.

Each tick the walker

1. perceives the current saliency field (optionally goal-modulated and
   foveated around the gaze point),
2. keeps or resamples its oculomotor regime (Dirichlet/Multinoulli, or
   Beta/Bernoulli with two regimes),
3. proposes ``n_candidates`` Euler steps of a Langevin-like walk: drift up
   the saliency potential plus an alpha-stable jump,
4. takes the best-scoring candidate and accepts it against the current
   position with a Metropolis rule at temperature ``temperature``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bias import BiasModel, wrap_angle
from .errors import InputError, ParameterError, StreamEnd
from .saliency import ImageFrame, SaliencyMap, SurpriseTracker, build_feature_stack, \
    itti_saliency, self_information_map
from .stable import AlphaStableParams, sample_alpha_stable

FIXATIONAL, PURSUIT, SACCADE = 0, 1, 2
EVENTS = ("fixation", "saccade", "pursuit")
MAX_RESAMPLES = 32
FOVEAL_SPAN_DEG = 2.0


@dataclass
class RegimeState:
    """Oculomotor mode z with probabilities pi and Dirichlet hyperparameters.

    With two regimes the model is read as feed (0) / fly (1):
    p_feed ~ Beta(counts[0], counts[1]), z ~ Bernoulli.
    """

    z: int
    pi: np.ndarray
    counts: np.ndarray
    two_state: bool = False

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.pi.shape != self.counts.shape or self.counts.ndim != 1:
            raise ParameterError("pi and counts must be vectors of equal length")
        if abs(self.pi.sum() - 1.0) > 1e-9 or np.any(self.pi < 0):
            raise ParameterError("pi must be a probability vector")
        if np.any(self.counts <= 0):
            raise ParameterError("Dirichlet counts must be > 0")
        if not 0 <= self.z < self.counts.size:
            raise ParameterError(f"regime {self.z} outside [0, {self.counts.size})")
        if self.two_state and self.counts.size != 2:
            raise ParameterError("two-state mode needs exactly two regimes")

    @classmethod
    def from_counts(cls, counts: Sequence[float], z: int = 0) -> "RegimeState":
        counts = np.asarray(counts, dtype=float)
        return cls(z, counts / counts.sum(), counts, two_state=counts.size == 2)

    @property
    def n_regimes(self) -> int:
        return self.counts.size

    @property
    def beta_params(self) -> tuple[float, float]:
        """(alpha, beta) of the Beta prior on p_feed in two-state mode."""
        if not self.two_state:
            raise ParameterError("Beta parameters only exist in two-state mode")
        return float(self.counts[0]), float(self.counts[1])


@dataclass(frozen=True)
class RegimeMotor:
    stable: AlphaStableParams
    drift: float = 0.0
    hazard: float = 1.0

    def __post_init__(self):
        if self.drift < 0:
            raise ParameterError("drift gain must be >= 0")
        if not 0 < self.hazard <= 1:
            raise ParameterError("hazard must lie in (0, 1]")


@dataclass(frozen=True)
class RegimeMotorParams:
    regimes: tuple[RegimeMotor, ...]

    def __post_init__(self):
        if len(self.regimes) not in (2, 3):
            raise ParameterError("motor parameters need 2 or 3 regimes")

    def __getitem__(self, z: int) -> RegimeMotor:
        return self.regimes[z]

    def __len__(self):
        return len(self.regimes)

    @classmethod
    def default(cls, n_regimes: int = 3, saccade_alpha: float = 1.0) -> "RegimeMotorParams":
        return cls(default_motors(n_regimes, saccade_alpha))


def default_motors(n_regimes: int = 3, saccade_alpha: float = 1.0) -> tuple[RegimeMotor, ...]:
    fix = RegimeMotor(AlphaStableParams(2.0, 0.0, 0.5, 0.0), drift=500.0, hazard=1 / 18)
    sac = RegimeMotor(AlphaStableParams(saccade_alpha, 0.0, 20.0, 0.0), drift=0.0, hazard=1.0)
    if n_regimes == 2:
        return fix, sac
    if n_regimes != 3:
        raise ParameterError("regime count must be 2 or 3")
    pursuit = RegimeMotor(AlphaStableParams(1.6, 0.0, 6.0, 0.0), drift=1000.0, hazard=0.5)
    return fix, pursuit, sac


def default_counts(n_regimes: int = 3) -> tuple[float, ...]:
    return (60.0, 40.0) if n_regimes == 2 else (60.0, 15.0, 25.0)


@dataclass
class WalkerConfig:
    n_candidates: int = 3
    temperature: float = 1.0
    tick_ms: float = 10.0
    tau: float = 1.0
    regimes: int = 3
    boundary: str = "resample"
    seed: int | None = None
    max_ticks: int = 1000
    learning_rate: float = 0.0
    counts: tuple[float, ...] | None = None
    fixation_threshold_px: float = 5.0
    foveation: bool = False
    px_per_degree: float = 30.0
    fovea_span_deg: float = FOVEAL_SPAN_DEG
    peripheral_floor: float = 0.2

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ParameterError("n_candidates must be >= 1")
        for name in ("temperature", "tick_ms", "tau", "px_per_degree", "fovea_span_deg"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        if self.regimes not in (2, 3):
            raise ParameterError("regimes must be 2 or 3")
        if self.boundary not in ("resample", "clamp"):
            raise ParameterError("boundary must be 'resample' or 'clamp'")
        if self.max_ticks < 1:
            raise ParameterError("max_ticks must be >= 1")
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be >= 0")
        if self.counts is None:
            self.counts = default_counts(self.regimes)
        if len(self.counts) != self.regimes or min(self.counts) <= 0:
            raise ParameterError("one positive prior count per regime required")

    @property
    def fovea_radius_px(self) -> float:
        return foveal_radius_px(self.px_per_degree, self.fovea_span_deg)


def foveal_radius_px(px_per_degree: float, span_deg: float = FOVEAL_SPAN_DEG) -> float:
    """Radius of a foveal window whose full width is ``span_deg`` degrees."""
    return span_deg / 2 * px_per_degree


@dataclass
class GoalSpec:
    """Nonnegative value field V over the grid; reward is the deterministic lookup of V."""

    value: np.ndarray
    goal_id: str = "goal"

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        if self.value.ndim != 2 or np.any(self.value < 0) or not np.all(np.isfinite(self.value)):
            raise ParameterError("goal value map must be a finite nonnegative 2-D field")


@dataclass
class WalkerState:
    x: float
    y: float
    t: int
    regime: RegimeState
    prev_theta: float | None = None
    dwell_ms: float = 0.0
    frame_index: int = 0


@dataclass(frozen=True)
class GazeRecord:
    t_ms: float
    x: float
    y: float
    regime: int
    event: str
    dwell_ms: float


@dataclass
class ScanPath:
    records: list[GazeRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def positions(self) -> np.ndarray:
        return np.array([(r.x, r.y) for r in self.records], dtype=float).reshape(-1, 2)

    def displacements(self) -> np.ndarray:
        """Per-record gaze shift r(t) - r(t-1), shape (n-1, 2)."""
        p = self.positions()
        return np.diff(p, axis=0)

    def shift_amplitudes(self, regime: int | None = None, min_amplitude: float = 0.0) -> np.ndarray:
        """Amplitudes of nonzero moves, optionally restricted to moves made in ``regime``."""
        d = np.hypot(*self.displacements().T) if len(self.records) > 1 else np.zeros(0)
        keep = d > min_amplitude
        if regime is not None:
            regimes = np.array([r.regime for r in self.records[1:]])
            keep &= regimes == regime
        return d[keep]

    def gaze_shifts(self) -> np.ndarray:
        """Amplitudes of moves labeled saccade or pursuit (fixational jitter excluded)."""
        if len(self.records) < 2:
            return np.zeros(0)
        d = np.hypot(*self.displacements().T)
        return d[np.array([r.event != "fixation" for r in self.records[1:]])]


# ---------------------------------------------------------------------------
# perception


class SaliencySource:
    """Maps ticks to saliency maps, computing each frame's map once.

    A single-frame source is static and never ends; otherwise the stream
    ends after the last frame's ``frame_ms`` window.
    """

    def __init__(self, frames: Sequence[ImageFrame] | None = None,
                 maps: Sequence[SaliencyMap] | None = None,
                 method: str | Callable[[ImageFrame], SaliencyMap] = "itti",
                 frame_ms: float = 10.0):
        if (frames is None) == (maps is None):
            raise ParameterError("give exactly one of frames or maps")
        self.frames = list(frames) if frames is not None else None
        self._maps: dict[int, SaliencyMap] = {}
        self._fields: dict[int, _Field] = {}
        if maps is not None:
            self._maps = dict(enumerate(maps))
        self.n = len(self.frames) if self.frames is not None else len(self._maps)
        if self.n == 0:
            raise InputError("empty frame source")
        self.frame_ms = frame_ms
        if callable(method):
            self._compute = method
        elif method == "itti":
            self._compute = itti_saliency
        elif method == "selfinfo":
            self._compute = lambda f: self_information_map(build_feature_stack(f, 1))
        elif method == "surprise":
            self._compute = SurpriseTracker()
        else:
            raise ParameterError(f"unknown saliency method {method!r}")
        self._next = 0

    @classmethod
    def from_maps(cls, maps, frame_ms: float = 10.0) -> "SaliencySource":
        if isinstance(maps, SaliencyMap):
            maps = [maps]
        return cls(maps=maps, frame_ms=frame_ms)

    @property
    def static(self) -> bool:
        return self.n == 1

    def __len__(self):
        return self.n

    def index_at(self, t_ms: float) -> int:
        if self.static:
            return 0
        i = int(t_ms // self.frame_ms)
        if i >= self.n:
            raise StreamEnd(f"no frame at {t_ms} ms")
        return i

    def map(self, index: int) -> SaliencyMap:
        if index not in self._maps:
            # sequential methods (surprise) must see every frame in order
            for i in range(self._next, index + 1):
                if i not in self._maps:
                    self._maps[i] = self._compute(self.frames[i])
            self._next = max(self._next, index + 1)
        return self._maps[index]

    def field(self, index: int, tau: float) -> "_Field":
        f = self._fields.get(index)
        if f is None or f.tau != tau:
            f = _Field(self.map(index), tau)
            self._fields[index] = f
        return f


class _Field:
    """Saliency W plus potential V = tau * W / max W, ready for point lookups."""

    __slots__ = ("W", "V", "tau", "h", "w")

    def __init__(self, smap: SaliencyMap, tau: float):
        self.W = smap.values
        peak = self.W.max()
        self.V = tau * (self.W / peak if peak > 0 else np.ones_like(self.W))
        self.tau = tau
        self.h, self.w = self.W.shape


def foveate(smap: SaliencyMap, x: float, y: float, radius: float, floor: float = 0.2) -> SaliencyMap:
    """Attenuate saliency with distance from (x, y); factor 1 at the gaze point."""
    h, w = smap.values.shape
    yy, xx = np.ogrid[:h, :w]
    att = floor + (1 - floor) * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * radius ** 2))
    return SaliencyMap.from_scores(smap.values * att)


def attenuation(d: float, radius: float, floor: float = 0.2) -> float:
    return floor + (1 - floor) * math.exp(-d * d / (2 * radius * radius))


def perceive(source: SaliencySource, t: int, x: float, y: float, config: WalkerConfig,
             goal: GoalSpec | None = None) -> SaliencyMap:
    """Realized perception W*(t) at gaze (x, y).

    Without goal and foveation the saliency map is returned unchanged.
    """
    smap = source.map(source.index_at(t * config.tick_ms))
    if config.foveation:
        smap = foveate(smap, x, y, config.fovea_radius_px, config.peripheral_floor)
    if goal is not None:
        if goal.value.shape != smap.values.shape:
            raise ParameterError("goal map dimensions do not match the frame")
        smap = SaliencyMap.from_scores(smap.values * goal.value)
    return smap


# ---------------------------------------------------------------------------
# regime dynamics


def choose_regime(regime: RegimeState | WalkerState, rng: np.random.Generator) -> RegimeState:
    """pi ~ Dirichlet(counts), z ~ Multinoulli(pi); Beta/Bernoulli with two regimes."""
    if isinstance(regime, WalkerState):
        regime = regime.regime
    if regime.two_state:
        p_feed = rng.beta(regime.counts[0], regime.counts[1])
        pi = np.array([p_feed, 1.0 - p_feed])
        z = 0 if rng.random() < p_feed else 1
    else:
        pi = rng.dirichlet(regime.counts)
        pi /= pi.sum()
        z = int(np.searchsorted(np.cumsum(pi), rng.random(), side="right"))
        z = min(z, pi.size - 1)
    return RegimeState(z, pi, regime.counts, regime.two_state)


def update_regime_hyperparams(regime: RegimeState, observed: int, dwell_ticks: float,
                              weight: float = 1.0) -> RegimeState:
    """Conjugate count update: counts[observed] += dwell_ticks * weight."""
    if not 0 <= observed < regime.n_regimes:
        raise ParameterError(f"regime {observed} outside [0, {regime.n_regimes})")
    if dwell_ticks < 0 or weight < 0:
        raise ParameterError("dwell and weight must be >= 0")
    counts = regime.counts.copy()
    counts[observed] += dwell_ticks * weight
    return RegimeState(regime.z, regime.pi, counts, regime.two_state)


# ---------------------------------------------------------------------------
# look-next


def _gradient_at(V: np.ndarray, x: float, y: float) -> tuple[float, float]:
    """Central-difference gradient of V at the pixel nearest (x, y)."""
    h, w = V.shape
    i = min(max(int(round(y)), 0), h - 1)
    j = min(max(int(round(x)), 0), w - 1)
    jl, jr = max(j - 1, 0), min(j + 1, w - 1)
    iu, id_ = max(i - 1, 0), min(i + 1, h - 1)
    gx = (V[i, jr] - V[i, jl]) / (jr - jl) if jr > jl else 0.0
    gy = (V[id_, j] - V[iu, j]) / (id_ - iu) if id_ > iu else 0.0
    return float(gx), float(gy)


def _lookup(a: np.ndarray, x, y):
    """Nearest-pixel values of ``a`` at coordinate arrays x, y."""
    h, w = a.shape
    i = np.rint(y).astype(np.intp)
    j = np.rint(x).astype(np.intp)
    # ufuncs rather than np.clip: this sits on the per-tick hot path
    np.minimum(np.maximum(i, 0, out=i), h - 1, out=i)
    np.minimum(np.maximum(j, 0, out=j), w - 1, out=j)
    return a[i, j]


def _at(a: np.ndarray, x: float, y: float) -> float:
    """Nearest-pixel value of ``a`` at a single point."""
    h, w = a.shape
    return float(a[min(max(round(y), 0), h - 1), min(max(round(x), 0), w - 1)])


def _directions(bias: BiasModel | None, prev_theta, rng, n):
    if bias is None:
        return rng.uniform(-math.pi, math.pi, n)
    return np.asarray(bias.sample_direction(prev_theta, rng, n))


def _jumps(motor: RegimeMotor, bias: BiasModel | None, prev_theta, rng, n):
    l = np.abs(sample_alpha_stable(motor.stable, rng, n))
    theta = _directions(bias, prev_theta, rng, n)
    return l * np.cos(theta), l * np.sin(theta)


def propose_candidates(state: WalkerState, W: SaliencyMap | np.ndarray, motor: RegimeMotor,
                       n_candidates: int, rng: np.random.Generator, tau: float = 1.0,
                       tick_ms: float = 10.0, bias: BiasModel | None = None,
                       boundary: str = "resample") -> np.ndarray:
    """Candidate gaze points, shape (n_candidates, 2) as (x, y).

    Each is r_F + drift * grad(V) * tick + stable jump, with V = tau * W / max W.
    An out-of-frame candidate keeps its jump length and gets a fresh direction,
    up to 32 times, then is clamped. Redrawing the length instead would thin
    the long jumps and steepen the amplitude tail near every edge.
    """
    values = W.values if isinstance(W, SaliencyMap) else np.asarray(W)
    peak = values.max()
    V = tau * (values / peak if peak > 0 else np.ones_like(values))
    return _propose(state, V, motor, n_candidates, rng, tick_ms, bias, boundary)


def _propose(state, V, motor, n, rng, tick_ms, bias, boundary):
    h, w = V.shape
    gx, gy = _gradient_at(V, state.x, state.y) if motor.drift > 0 else (0.0, 0.0)
    scale = motor.drift * tick_ms / 1000.0
    bx = state.x + scale * gx
    by = state.y + scale * gy
    l = np.abs(sample_alpha_stable(motor.stable, rng, n))
    theta = _directions(bias, state.prev_theta, rng, n)
    cx, cy = bx + l * np.cos(theta), by + l * np.sin(theta)
    if boundary == "resample":
        for _ in range(MAX_RESAMPLES):
            out = (cx < 0) | (cx > w - 1) | (cy < 0) | (cy > h - 1)
            k = int(out.sum())
            if not k:
                break
            theta = _directions(bias, state.prev_theta, rng, k)
            cx[out] = bx + l[out] * np.cos(theta)
            cy[out] = by + l[out] * np.sin(theta)
    out = np.empty((n, 2))
    np.minimum(np.maximum(cx, 0.0), w - 1, out=out[:, 0])
    np.minimum(np.maximum(cy, 0.0), h - 1, out=out[:, 1])
    return out


def score_candidate(candidate, current, W: SaliencyMap | np.ndarray,
                    goal: GoalSpec | None = None) -> float:
    """Expected gain of moving from ``current`` to ``candidate``.

    W(c) - W(r) without a goal, V(c) W(c) - V(r) W(r) with one.
    """
    values = W.values if isinstance(W, SaliencyMap) else np.asarray(W)
    c = np.asarray(candidate, dtype=float)
    r = np.asarray(current, dtype=float)
    wc = _at(values, c[0], c[1])
    wr = _at(values, r[0], r[1])
    if goal is None:
        return wc - wr
    return _at(goal.value, c[0], c[1]) * wc - _at(goal.value, r[0], r[1]) * wr


def _scores(cands: np.ndarray, x, y, W: np.ndarray, goal: GoalSpec | None) -> np.ndarray:
    wc = _lookup(W, cands[:, 0], cands[:, 1])
    wr = _at(W, x, y)
    if goal is None:
        return wc - wr
    return _lookup(goal.value, cands[:, 0], cands[:, 1]) * wc - _at(goal.value, x, y) * wr


def accept_metropolis(v0: float, v1: float, temperature: float, rng: np.random.Generator) -> bool:
    """Accept with probability min(1, exp((v1 - v0) / T)); uphill moves draw no randomness."""
    if not temperature > 0:
        raise ParameterError("temperature must be > 0")
    gap = v1 - v0
    if gap >= 0:
        return True
    return rng.random() < math.exp(gap / temperature)


def decide_expected_gain(scores: np.ndarray) -> int:
    """Decision rule: index of the highest expected gain (first on ties)."""
    return int(np.argmax(scores))


# ---------------------------------------------------------------------------
# the cycle


def initial_state(source: SaliencySource, config: WalkerConfig) -> WalkerState:
    smap = source.map(0)
    h, w = smap.values.shape
    regime = RegimeState.from_counts(config.counts)
    return WalkerState(x=(w - 1) / 2, y=(h - 1) / 2, t=0, regime=regime)


def step(state: WalkerState, source: SaliencySource, config: WalkerConfig,
         motor: RegimeMotorParams, bias: BiasModel | None = None,
         goal: GoalSpec | None = None, rng: np.random.Generator | None = None,
         decide: Callable[[np.ndarray], int] = decide_expected_gain
         ) -> tuple[WalkerState, GazeRecord]:
    """One tick of the cycle. Raises ``StreamEnd`` when the source runs out."""
    idx = source.index_at(state.t * config.tick_ms)

    # perceive
    if config.foveation or goal is not None:
        raw = source.map(idx)
        if config.foveation:
            raw = foveate(raw, state.x, state.y, config.fovea_radius_px, config.peripheral_floor)
        perceived = raw if goal is None else SaliencyMap.from_scores(raw.values * goal.value)
        fld = _Field(perceived, config.tau)
        W = raw.values
    else:
        fld = source.field(idx, config.tau)
        W = fld.W

    # choose regime: resample at start, then with the current regime's hazard
    regime = state.regime
    hazard = motor[regime.z].hazard
    if state.t == 0 or hazard >= 1.0 or rng.random() < hazard:
        regime = choose_regime(regime, rng)
    z = regime.z
    m = motor[z]

    # look next
    cands = _propose(state, fld.V, m, config.n_candidates, rng, config.tick_ms, bias, config.boundary)
    best = cands[decide(_scores(cands, state.x, state.y, W, goal))]
    v0 = _at(fld.V, state.x, state.y)
    v1 = _at(fld.V, best[0], best[1])
    accepted = accept_metropolis(v0, v1, config.temperature, rng)

    x, y = state.x, state.y
    prev_theta = state.prev_theta
    dwell = state.dwell_ms + config.tick_ms
    event = "fixation"
    if accepted:
        nx, ny = float(best[0]), float(best[1])
        d = math.hypot(nx - x, ny - y)
        if d >= config.fixation_threshold_px:
            event = "pursuit" if (z == PURSUIT and not source.static and motor_regimes(motor) == 3) \
                else "saccade"
            dwell = 0.0
            prev_theta = float(wrap_angle(math.atan2(ny - y, nx - x)))
        x, y = nx, ny

    if config.learning_rate > 0:
        regime = update_regime_hyperparams(regime, z, 1, config.learning_rate)
    new_state = WalkerState(x, y, state.t + 1, regime, prev_theta, dwell, idx)
    record = GazeRecord((state.t + 1) * config.tick_ms, x, y, z, event, dwell)
    return new_state, record


def motor_regimes(motor: RegimeMotorParams) -> int:
    return len(motor.regimes)


def run_scanpath(source: SaliencySource, config: WalkerConfig,
                 motor: RegimeMotorParams | None = None, bias: BiasModel | None = None,
                 goal: GoalSpec | None = None, rng: np.random.Generator | None = None,
                 max_ticks: int | None = None) -> ScanPath:
    """Run from the frame centre until the source ends or ``max_ticks`` elapse."""
    if source is None or len(source) == 0:
        raise InputError("empty frame source")
    if motor is None:
        motor = RegimeMotorParams.default(config.regimes)
    if len(motor) != config.regimes:
        raise ParameterError("motor parameters and config disagree on regime count")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.max_ticks if max_ticks is None else max_ticks
    state = initial_state(source, config)
    records = []
    for _ in range(n):
        try:
            state, rec = step(state, source, config, motor, bias, goal, rng)
        except StreamEnd:
            break
        records.append(rec)
    return ScanPath(records)
