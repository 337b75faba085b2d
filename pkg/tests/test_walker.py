import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian_blob_map
from gazewalk.errors import InputError, ParameterError, StreamEnd
from gazewalk.saliency import ImageFrame, SaliencyMap, itti_saliency
from gazewalk.stable import AlphaStableParams, stable_cdf
from gazewalk.stats import ks_two_sample
from gazewalk.walker import FIXATIONAL, PURSUIT, SACCADE, GoalSpec, RegimeMotor, \
    RegimeMotorParams, RegimeState, SaliencySource, WalkerConfig, WalkerState, \
    accept_metropolis, attenuation, choose_regime, foveal_radius_px, initial_state, perceive, \
    propose_candidates, run_scanpath, score_candidate, step, update_regime_hyperparams


def flat_source(h=192, w=256):
    return SaliencySource.from_maps(SaliencyMap.uniform(h, w))


def state_at(x, y, counts=(1.0, 1.0, 1.0), prev=None):
    return WalkerState(x, y, 1, RegimeState.from_counts(counts), prev)


def motor(alpha=1.0, gamma=1.0, drift=0.0):
    return RegimeMotor(AlphaStableParams(alpha, 0, gamma, 0), drift=drift)


# perception

def test_perceive_identity_path():
    smap = itti_saliency(ImageFrame(np.random.default_rng(0).random((64, 64, 3))))
    src = SaliencySource.from_maps(smap)
    assert perceive(src, 0, 10, 10, WalkerConfig()) is smap


def test_perceive_unit_goal_unchanged():
    smap = SaliencyMap.from_scores(np.random.default_rng(1).random((32, 32)))
    src = SaliencySource.from_maps(smap)
    out = perceive(src, 0, 5, 5, WalkerConfig(), GoalSpec(np.ones((32, 32))))
    assert np.allclose(out.values, smap.values, rtol=1e-12, atol=0)


def test_foveation_factor_at_gaze_point():
    r = foveal_radius_px(30.0)
    assert r == 30.0
    assert attenuation(0.0, r) == 1.0
    assert attenuation(3 * r, r) < 0.25
    cfg = WalkerConfig(foveation=True)
    smap = SaliencyMap.uniform(64, 64)
    out = perceive(SaliencySource.from_maps(smap), 0, 20, 30, cfg)
    assert np.unravel_index(np.argmax(out.values), (64, 64)) == (30, 20)


def test_stream_end_and_empty_source():
    maps = [SaliencyMap.uniform(8, 8)] * 3
    src = SaliencySource.from_maps(maps, frame_ms=20)
    assert src.index_at(59) == 2
    with pytest.raises(StreamEnd):
        src.index_at(60)
    path = run_scanpath(src, WalkerConfig(seed=0, max_ticks=100))
    assert len(path) == 6
    with pytest.raises(InputError):
        run_scanpath(SaliencySource.from_maps([]), WalkerConfig(seed=0))


# regime choice and conjugate updates

def test_dominant_count_regime():
    rng = np.random.default_rng(0)
    regime = RegimeState.from_counts((1e6, 1, 1))
    z = [choose_regime(regime, rng).z for _ in range(10_000)]
    assert np.mean(np.array(z) == 0) >= 0.999


def test_symmetric_counts_frequencies():
    rng = np.random.default_rng(1)
    regime = RegimeState.from_counts((2.0, 2.0, 2.0))
    z = np.array([choose_regime(regime, rng).z for _ in range(10_000)])
    sigma = math.sqrt(1 / 3 * 2 / 3 / 10_000)
    for k in range(3):
        assert abs(np.mean(z == k) - 1 / 3) <= 3 * sigma


def test_choose_regime_pi_is_distribution():
    rng = np.random.default_rng(2)
    for counts in [(0.5, 0.5), (3.0, 1.0, 0.2)]:
        r = choose_regime(RegimeState.from_counts(counts), rng)
        assert abs(r.pi.sum() - 1) < 1e-9 and r.z < len(counts)


def test_two_state_beta_conjugacy():
    regime = RegimeState.from_counts((2.0, 3.0))
    assert regime.two_state
    n1, n0 = 7, 4
    for _ in range(n1):
        regime = update_regime_hyperparams(regime, 0, 1)
    for _ in range(n0):
        regime = update_regime_hyperparams(regime, 1, 1)
    assert regime.beta_params == (2.0 + n1, 3.0 + n0)


def test_null_and_unit_updates():
    regime = RegimeState.from_counts((1.0, 2.0, 3.0))
    assert np.array_equal(update_regime_hyperparams(regime, 1, 5, weight=0).counts, regime.counts)
    assert update_regime_hyperparams(regime, 1, 5).counts[1] == 2.0 + 5
    with pytest.raises(ParameterError):
        update_regime_hyperparams(regime, 3, 1)


def test_alternating_regime_counts_balance():
    regime = RegimeState.from_counts((1.0, 1.0))
    for t in range(10_000):
        regime = update_regime_hyperparams(regime, t % 2, 1)
    assert abs(regime.counts[0] / regime.counts[1] - 1) < 0.01


# candidate proposal

def test_degenerate_dynamics_stay_put():
    rng = np.random.default_rng(0)
    W = SaliencyMap.uniform(64, 64)
    c = propose_candidates(state_at(30, 30), W, motor(2.0, 1e-6), 50, rng)
    assert c.shape == (50, 2)
    assert np.all(np.hypot(c[:, 0] - 30, c[:, 1] - 30) < 1)


def test_flat_candidates_isotropic():
    rng = np.random.default_rng(1)
    W = SaliencyMap.uniform(401, 401)
    c = propose_candidates(state_at(200, 200), W, motor(1.5, 3.0), 10_000, rng)
    d = c - 200
    theta = np.arctan2(d[:, 1], d[:, 0])
    assert abs(np.mean(np.exp(1j * theta))) < 0.05


def test_scale_ratio_median_amplitude():
    rng = np.random.default_rng(2)
    W = SaliencyMap.uniform(1001, 1001)
    st0 = state_at(500, 500)
    a = propose_candidates(st0, W, motor(2.0, 1.0), 5000, rng)
    b = propose_candidates(st0, W, motor(1.0, 30.0), 5000, rng)
    ma = np.median(np.hypot(*(a - 500).T))
    mb = np.median(np.hypot(*(b - 500).T))
    assert mb / ma > 10


def test_candidates_stay_in_frame_and_drift_climbs():
    rng = np.random.default_rng(3)
    ramp = np.tile(np.linspace(0, 1, 100), (50, 1))
    c = propose_candidates(state_at(95, 25), SaliencyMap.from_scores(ramp), motor(1.0, 200.0), 200, rng)
    assert np.all((c[:, 0] >= 0) & (c[:, 0] <= 99) & (c[:, 1] >= 0) & (c[:, 1] <= 49))
    pulled = propose_candidates(state_at(50, 25), ramp, motor(2.0, 1e-6, drift=5000.0), 5, rng,
                                tick_ms=10)
    assert np.all(pulled[:, 0] > 50)


# scoring and acceptance

def test_score_examples():
    W = np.zeros((10, 10))
    W[2, 3] = 0.5
    W[5, 5] = 0.2
    assert score_candidate((5, 5), (5, 5), W) == 0
    assert score_candidate((3, 2), (5, 5), W) > 0
    assert score_candidate((3, 2), (5, 5), W, GoalSpec(np.zeros((10, 10)))) == 0
    goal = GoalSpec(np.full((10, 10), 2.0))
    assert score_candidate((3, 2), (5, 5), W, goal) == pytest.approx(2 * 0.5 - 2 * 0.2)


def test_metropolis_uphill_always():
    rng = np.random.default_rng(0)
    assert all(accept_metropolis(0.2, 0.2 + d, 0.1, rng) for d in np.linspace(0, 1, 100))


def test_metropolis_one_temperature_gap():
    rng = np.random.default_rng(4)
    T = 0.3
    freq = np.mean([accept_metropolis(0.5, 0.5 - T, T, rng) for _ in range(100_000)])
    assert abs(freq - math.exp(-1)) <= 0.01


def test_metropolis_hot_limit():
    rng = np.random.default_rng(5)
    assert np.mean([accept_metropolis(1.0, 0.0, 1e9, rng) for _ in range(10_000)]) > 0.999
    with pytest.raises(ParameterError):
        accept_metropolis(0, 1, 0.0, rng)


def two_cell_occupancy(va, vb, T, n, rng):
    """Single-candidate Metropolis on two cells with uniform proposals."""
    v = (va, vb)
    cur, visits = 0, np.zeros(2)
    for _ in range(n):
        cand = int(rng.random() < 0.5)
        if accept_metropolis(v[cur], v[cand], T, rng):
            cur = cand
        visits[cur] += 1
    return visits[0] / visits[1]


@pytest.mark.parametrize("ratio", [0.5, 1.0, 2.0])
def test_two_cell_detailed_balance(ratio):
    T = 0.25
    got = two_cell_occupancy(ratio * T, 0.0, T, 100_000, np.random.default_rng(int(ratio * 10)))
    assert abs(got / math.exp(ratio) - 1) <= 0.10


# step and run

def bump_source():
    W = np.zeros((21, 21))
    W[10, 10] = 1.0
    W[10, 11] = 0.9
    return SaliencySource.from_maps(SaliencyMap.from_scores(W + 1e-3))


def test_step_rejection_path():
    cfg = WalkerConfig(n_candidates=1, temperature=1e-12, seed=0)
    m = RegimeMotorParams((motor(2.0, 1.0), motor(1.0, 5.0), motor(1.0, 8.0)))
    src = bump_source()
    st0 = WalkerState(10.0, 10.0, 1, RegimeState.from_counts(cfg.counts), dwell_ms=40.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        new, rec = step(st0, src, cfg, m, rng=rng)
        moved = (new.x, new.y) != (st0.x, st0.y)
        # every nearby cell is worse than the peak at (10, 10)
        assert not moved or round(new.x) == 10 and round(new.y) == 10
        if not moved:
            assert new.dwell_ms == st0.dwell_ms + cfg.tick_ms
            assert rec.event == "fixation"


def test_step_acceptance_path():
    W = np.ones((41, 41))
    W[20, 20] = 0.0  # every other cell is strictly better than the start
    src = SaliencySource.from_maps(SaliencyMap.from_scores(W))
    cfg = WalkerConfig(n_candidates=1, temperature=1e-12, seed=0)
    m = RegimeMotorParams((motor(2.0, 1e-6), motor(2.0, 1e-6),
                           RegimeMotor(AlphaStableParams(2.0, 0, 1e-6, 15.0), 0.0, 1.0)))
    st0 = WalkerState(20.0, 20.0, 1, RegimeState.from_counts((1e-3, 1e-3, 1e6)), dwell_ms=50.0)
    new, rec = step(st0, src, cfg, m, rng=np.random.default_rng(0))
    assert math.hypot(new.x - 20, new.y - 20) == pytest.approx(15.0, abs=1e-3)
    assert rec.event == "saccade" and new.dwell_ms == 0.0


def test_clock_and_order():
    path = run_scanpath(flat_source(), WalkerConfig(seed=3, max_ticks=1000))
    t = np.array([r.t_ms for r in path])
    assert len(path) == 1000 and t[-1] == 10_000
    assert np.all(np.diff(t) > 0)


def test_initial_gaze_at_centre():
    st0 = initial_state(flat_source(11, 21), WalkerConfig())
    assert (st0.x, st0.y) == (10.0, 5.0)


def test_determinism():
    src = SaliencySource.from_maps(SaliencyMap.from_scores(gaussian_blob_map()))
    a = run_scanpath(src, WalkerConfig(seed=11, max_ticks=2000))
    b = run_scanpath(src, WalkerConfig(seed=11, max_ticks=2000))
    assert a.records == b.records
    c = run_scanpath(src, WalkerConfig(seed=12, max_ticks=2000))
    assert a.records != c.records


def test_two_blob_preference():
    src = SaliencySource.from_maps(SaliencyMap.from_scores(gaussian_blob_map()))
    path = run_scanpath(src, WalkerConfig(seed=0, max_ticks=10_000))
    assert np.mean(path.positions()[:, 0] < 128) > 0.5


def test_flat_map_reduces_to_prior_walk():
    """All regime-2 moves on a flat map follow the folded configured stable law."""
    g = 20.0
    m = RegimeMotorParams((motor(2.0, 0.5), motor(1.6, 6.0), motor(1.0, g)))
    cfg = WalkerConfig(seed=1, max_ticks=40_000, counts=(1e-3, 1e-3, 1e3))
    path = run_scanpath(flat_source(1024, 1024), cfg, m)
    d = np.hypot(*path.displacements().T)
    regime = np.array([r.regime for r in path.records[1:]])
    amp = d[regime == SACCADE][:10_000]
    assert amp.size == 10_000
    x = np.sort(amp)
    folded = 2 * stable_cdf(x, AlphaStableParams(1.0, 0, g, 0)) - 1
    ecdf_hi = np.arange(1, x.size + 1) / x.size
    ks = max(np.max(ecdf_hi - folded), np.max(folded - (ecdf_hi - 1 / x.size)))
    assert ks < 0.05


def test_flat_map_accepts_everything():
    path = run_scanpath(flat_source(), WalkerConfig(seed=2, max_ticks=3000, temperature=1e-9))
    # rejections would leave exact repeats inside saccade-regime ticks
    reg = np.array([r.regime for r in path.records[1:]])
    d = np.hypot(*path.displacements().T)
    assert np.all(d[reg == SACCADE] > 0)


def test_regime_amplitude_ordering():
    path = run_scanpath(flat_source(600, 800), WalkerConfig(seed=4, max_ticks=30_000))
    d = np.hypot(*path.displacements().T)
    reg = np.array([r.regime for r in path.records[1:]])
    med = [np.median(d[reg == k]) for k in (FIXATIONAL, PURSUIT, SACCADE)]
    assert med[0] < med[1] < med[2]


def test_intersaccade_interval():
    isi = []
    for seed in range(3):
        path = run_scanpath(flat_source(), WalkerConfig(seed=seed, max_ticks=10_000))
        t = np.array([r.t_ms for r in path if r.event == "saccade"])
        isi.append(np.diff(t).mean())
    assert 250 <= np.mean(isi) <= 350


def test_pursuit_label_on_dynamic_source():
    maps = [SaliencyMap.uniform(64, 64)] * 50
    path = run_scanpath(SaliencySource.from_maps(maps), WalkerConfig(seed=0, max_ticks=50))
    static = run_scanpath(flat_source(64, 64), WalkerConfig(seed=0, max_ticks=50))
    assert "pursuit" not in {r.event for r in static}
    for a, b in zip(path, static):
        assert (a.x, a.y) == (b.x, b.y)
        if a.event == "pursuit":
            assert a.regime == PURSUIT and b.event == "saccade"


def test_two_regime_mode_runs():
    path = run_scanpath(flat_source(), WalkerConfig(seed=0, regimes=2, max_ticks=500))
    assert {r.regime for r in path} <= {0, 1}
    with pytest.raises(ParameterError):
        run_scanpath(flat_source(), WalkerConfig(seed=0, regimes=2), RegimeMotorParams.default(3))


def test_config_validation():
    for bad in [dict(n_candidates=0), dict(temperature=0), dict(tau=-1), dict(regimes=4),
                dict(boundary="wrap"), dict(counts=(1, 1))]:
        with pytest.raises(ParameterError):
            WalkerConfig(**bad)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**31), h=st.integers(8, 60), w=st.integers(8, 60),
       nc=st.integers(1, 4), boundary=st.sampled_from(["resample", "clamp"]))
def test_positions_bounded(seed, h, w, nc, boundary):
    rng = np.random.default_rng(seed)
    src = SaliencySource.from_maps(SaliencyMap.from_scores(rng.random((h, w)) + 1e-6))
    path = run_scanpath(src, WalkerConfig(seed=seed, max_ticks=200, n_candidates=nc,
                                          boundary=boundary))
    p = path.positions()
    assert np.all((p[:, 0] >= 0) & (p[:, 0] <= w - 1) & (p[:, 1] >= 0) & (p[:, 1] <= h - 1))


def test_ks_helper_agrees_with_walk_comparison():
    a = run_scanpath(flat_source(), WalkerConfig(seed=5, max_ticks=3000)).gaze_shifts()
    assert ks_two_sample(a, a) == (0.0, 1.0)
