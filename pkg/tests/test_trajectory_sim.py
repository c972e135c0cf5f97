import hashlib
import math

import numpy as np
import pytest
from scipy.integrate import quad

from qzeno import ideal_model as im
from qzeno import trajectory_sim as ts
from qzeno.errors import ConfigError, DomainError, MappingError
from qzeno.liouvillian import GROUND4, excited_population, integrate_master
from qzeno.params import ModelParams, ideal_params, realistic_params


@pytest.fixture(scope="module")
def dwell_store():
    # ideal λ = 1.5 from θ = 0: survivors follow θ(t) down to θ₊
    p = ideal_params().with_lambda(1.5)
    return ts.run_ensemble(p, ts.QubitAngle(0.0), duration=50e-6, n_traj=2000, seed=11, keep_records=False,
                           dwell_bins=40)


@pytest.fixture(scope="module")
def realistic_store():
    p = realistic_params().replace(p_fp=0.02, p_fn=0.02).with_lambda(0.8)
    return ts.run_ensemble(p, duration=6.4e-6, n_traj=3000, seed=5)


def test_window_steps():
    p = realistic_params()
    assert ts.window_steps(p) == 32
    with pytest.raises(ConfigError):
        ts.window_steps(p.replace(t_int=325e-9))


def test_step_size_warning():
    with pytest.warns(RuntimeWarning):
        ts.check_step_size(realistic_params().with_lambda(10.0))


def test_step_rotation_and_bright_return():
    p = ideal_params()
    rng = np.random.default_rng(0)
    nxt = ts.step(ts.QubitAngle(1.0), p, rng)
    assert nxt.theta == pytest.approx(1.0 - p.omega_s * p.dt_sim, abs=1e-12)
    assert ts.step(ts.BRIGHT, p, rng) == ts.QubitAngle(math.pi)


def test_classify_windows_threshold_and_flips():
    p = realistic_params()
    flags = np.zeros(3 * 32, dtype=bool)
    flags[:32] = True
    flags[32:48] = True
    flags[64:79] = True
    rec = ts.classify_windows(flags, p, np.random.default_rng(1))
    assert rec.outcomes.tolist() == [True, True, False]
    assert len(rec) == 3 and rec.window == p.t_int
    all_click = ts.classify_windows(np.zeros(10 * 32, dtype=bool), p.replace(p_fp=1.0), np.random.default_rng(1))
    assert all_click.outcomes.all()


def test_ideal_survivors_follow_noclick_path():
    p = ideal_params().with_lambda(0.5)
    store = ts.run_ensemble(p, duration=2e-6, n_traj=2000, seed=1, keep_records=False)
    series = ts.conditional_population(store)
    theta = im.noclick_theta(store.snapshot_times, 0.5, p.omega_s)
    ok = ~series.omitted
    assert np.allclose(series.values[ok], np.cos(theta[ok] / 2) ** 2, atol=1e-9)


def test_ideal_survival_matches_closed_form():
    p = ideal_params().with_lambda(0.5)
    store = ts.run_ensemble(p, duration=5e-6, n_traj=20000, seed=2, keep_records=False)
    p0 = store.snap["cond_n"] / store.n_traj
    expected = im.noclick_survival(store.snapshot_times, 0.5, p.omega_s)
    sigma = np.sqrt(expected * (1 - expected) / store.n_traj)
    assert np.all(np.abs(p0 - expected) < 5 * sigma + 5e-3)
    assert len(ts.first_click_times(store)) == int(np.sum(store.first_true_click_step >= 0))


def test_ensemble_matches_master_equation():
    p = realistic_params().with_lambda(1.0)
    store = ts.run_ensemble(p, duration=6.4e-6, n_traj=4000, seed=3, keep_records=False)
    series = ts.ensemble_population(store)
    _, states = integrate_master(p, GROUND4, store.duration, p.t_int)
    master = excited_population(states)
    assert len(master) == len(series.values)
    assert np.all(np.abs(series.values - master) < 5 * series.stderr + 0.01)


def test_trajectory_history_independent_of_ensemble_size():
    p = realistic_params().with_lambda(1.2)
    small = ts.run_ensemble(p, duration=3.2e-6, n_traj=100, seed=9, keep_records=True)
    large = ts.run_ensemble(p, duration=3.2e-6, n_traj=300, seed=9, keep_records=True)
    assert np.array_equal(small.outcomes, large.outcomes[:100])
    assert np.array_equal(small.record(7).outcomes, large.record(7).outcomes)


def test_worker_count_does_not_change_results():
    p = realistic_params().with_lambda(1.0)
    kw = dict(duration=0.64e-6, n_traj=ts.BLOCK + 50, seed=4, keep_records=False)
    one = ts.run_ensemble(p, workers=1, **kw)
    two = ts.run_ensemble(p, workers=2, **kw)
    for key in one.snap:
        assert np.array_equal(one.snap[key], two.snap[key])
    assert np.array_equal(one.first_event, two.first_event)


def test_store_save_is_reproducible(tmp_path, realistic_store):
    a, b = tmp_path / "a.npz", tmp_path / "b.npz"
    realistic_store.save(a)
    realistic_store.save(b)
    assert hashlib.sha256(a.read_bytes()).digest() == hashlib.sha256(b.read_bytes()).digest()
    loaded = ts.TrajectoryStore.load(a)
    assert loaded.params == realistic_store.params
    assert loaded.n_traj == realistic_store.n_traj
    assert np.array_equal(loaded.outcomes, realistic_store.outcomes)
    assert np.array_equal(loaded.snap["cond_n"], realistic_store.snap["cond_n"])


def test_bright_dwell_times_mean_is_waiting_time():
    p = realistic_params()
    times = ts.bright_dwell_times(p, n=10_000, seed=0)
    assert times.mean() == pytest.approx(p.tau_b, rel=0.04)


def test_noclick_histogram_counts(realistic_store):
    h = ts.noclick_duration_histogram(realistic_store)
    assert h.counts.sum() == h.n_runs > 0
    later = ts.noclick_duration_histogram(realistic_store, include_first=False)
    assert later.n_runs < h.n_runs
    coarse = ts.noclick_duration_histogram(realistic_store, edges=np.linspace(0, 7e-6, 5))
    assert coarse.counts.sum() == h.n_runs


def test_error_budget(realistic_store):
    budget = ts.error_budget(realistic_store, 3.2e-6)
    assert set(budget.fractions) == set(ts.EVENTS)
    assert budget.n_postselected > 0
    assert all(0.0 <= v <= 1.0 for v in budget.fractions.values())
    with pytest.raises(DomainError):
        ts.error_budget(realistic_store, 1e-3)


def test_direct_dwell_total_is_mean_first_click_time(dwell_store):
    p = dwell_store.params
    tp = im.fixed_points(1.5).theta_plus
    expected, _ = quad(lambda th: im.dwell_density(th, 1.5, p.omega_s, theta0=0.0), tp, 0.0, limit=200)
    for grid in ("base", "shifted", "auto"):
        h = ts.dwell_histogram_direct(dwell_store, grid=grid)
        assert len(h.bin_edges) == 41
        assert np.sum(h.values) * h.width == pytest.approx(expected, rel=0.08)
    assert ts.dwell_histogram_direct(dwell_store, grid="shifted").grid_offset == pytest.approx(np.pi / 40)


def test_experimental_dwell_agrees_with_direct(dwell_store):
    direct = ts.dwell_histogram_direct(dwell_store)
    exp = ts.dwell_histogram_experimental(dwell_store, bins=40, min_survivors=20)
    assert exp.estimator == "experimental" and not exp.fallback
    assert np.sum(exp.values) * exp.width == pytest.approx(np.sum(direct.values) * direct.width, rel=0.1)


def test_experimental_dwell_falls_back_when_map_not_monotone(dwell_store, realistic_store):
    zigzag = 0.5 * (np.arange(dwell_store.n_windows + 1) % 2)
    h = ts.dwell_histogram_experimental(dwell_store, bins=40, theta_map=zigzag)
    assert h.fallback and h.estimator == "direct"
    with pytest.raises(MappingError):
        zigzag = 0.5 * (np.arange(realistic_store.n_windows + 1) % 2)
        ts.dwell_histogram_experimental(realistic_store, theta_map=zigzag)


def test_dark_state_never_clicks():
    p = ModelParams(omega_s=0.0, alpha=2e6, tau_b=1e-12, t_int=10e-9, dt_sim=10e-9)
    assert im.click_rate(0.0, p.alpha) == 0.0
    rng = np.random.default_rng(0)
    assert all(ts.step(ts.QubitAngle(0.0), p, rng) == ts.QubitAngle(0.0) for _ in range(100))
    store = ts.run_ensemble(p, ts.QubitAngle(0.0), duration=2e-6, n_traj=500, seed=3, keep_records=True)
    assert not store.outcomes.any()
    assert np.all(store.first_click_window == store.n_windows)
    assert ts.first_click_times(store).size == 0
    assert store.snap["cond_n"][-1] == 500


def test_first_click_chi2_accepts_closed_form():
    p = ideal_params().with_lambda(0.5)
    store = ts.run_ensemble(p, duration=5e-6, n_traj=20_000, seed=21, keep_records=False)
    good = ts.first_click_chi2(store, lambda t: im.noclick_survival(t, 0.5, p.omega_s))
    assert good.p_value > 1e-3 and good.dof == good.n_bins - 1 > 10
    wrong = ts.first_click_chi2(store, lambda t: im.noclick_survival(t, 0.6, p.omega_s))
    assert wrong.p_value < 1e-6
    with pytest.raises(DomainError):
        ts.first_click_chi2(store, lambda t: np.ones(3))


@pytest.mark.slow
@pytest.mark.parametrize("lam,duration", [(0.5, 5e-6), (2.2, 8e-6)])
def test_first_click_chi2_at_scale(lam, duration):
    p = ideal_params(t_int=2.5e-9, dt_sim=2.5e-9).with_lambda(lam)
    store = ts.run_ensemble(p, duration=duration, n_traj=200_000, seed=31, keep_records=False)
    result = ts.first_click_chi2(store, lambda t: im.noclick_survival(t, lam, p.omega_s))
    assert result.p_value > 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("preset", ["ideal", "realistic"])
@pytest.mark.parametrize("lam", [0.5, 1.2, 2.2])
def test_ensemble_matches_master_equation_at_scale(preset, lam):
    base = ideal_params() if preset == "ideal" else realistic_params()
    p = base.with_lambda(lam)
    store = ts.run_ensemble(p, duration=6.4e-6, n_traj=100_000, seed=13, keep_records=False)
    series = ts.ensemble_population(store)
    _, states = integrate_master(p, GROUND4, store.duration, p.t_int)
    assert np.all(np.abs(series.values - excited_population(states)) < 4 * series.stderr + 0.01)


def test_no_dwell_inside_forbidden_region(dwell_store):
    tp = im.fixed_points(1.5).theta_plus
    for grid in ("base", "shifted"):
        h = ts.dwell_histogram_direct(dwell_store, grid=grid)
        below = h.bin_edges[1:] < tp - 0.01
        assert below.sum() >= 10
        assert np.all(h.values[below] == 0.0)
        assert np.all(h.counts[below] == 0)


def test_error_budget_dephasing_fraction():
    p = realistic_params(gamma1=0.0).with_lambda(0.0)
    store = ts.run_ensemble(p, duration=12.8e-6, n_traj=4000, seed=8, keep_records=False)
    budget = ts.error_budget(store, 12.8e-6)
    assert budget.n_postselected == 4000
    expected = 1 - math.exp(-p.gamma_phi * 12.8e-6 / 2)
    sigma = math.sqrt(expected * (1 - expected) / 4000)
    assert abs(budget.fractions["dephasing"] - expected) < 3 * sigma
    for event in ("relaxation", "thermal", "missed_excursion", "flipped_outcome"):
        assert budget.fractions[event] == 0.0


def test_experimental_dwell_matches_closed_form(dwell_store):
    exp = ts.dwell_histogram_experimental(dwell_store, bins=40, min_survivors=20)
    omega = dwell_store.params.omega_s
    tp = im.fixed_points(1.5).theta_plus
    checked = 0
    for a, b, v in zip(exp.bin_edges[:-1], exp.bin_edges[1:], exp.values):
        if a < tp + exp.width or b > 1e-9:
            continue
        want, _ = quad(lambda th: im.dwell_density(th, 1.5, omega, theta0=0.0), a, b, limit=200)
        assert v == pytest.approx(want / (b - a), rel=0.05)
        checked += 1
    assert checked >= 2


def test_experimental_dwell_counts_first_clicks(dwell_store):
    exp = ts.dwell_histogram_experimental(dwell_store, bins=40, min_survivors=20)
    n_clicks = int(np.sum(dwell_store.first_click_window < dwell_store.n_windows))
    assert 0.9 * n_clicks <= exp.counts.sum() <= n_clicks + 40
    tp = im.fixed_points(1.5).theta_plus
    assert np.all(exp.counts[exp.bin_edges[1:] < tp - exp.width] == 0)
    assert exp.bin_edges[np.argmax(exp.counts)] <= tp + exp.width


def test_store_keeps_bright_flags(tmp_path, realistic_store):
    flags = realistic_store.bright
    assert flags.shape == (realistic_store.n_traj, realistic_store.n_windows + 1)
    assert flags.any()
    assert np.array_equal(flags, np.isnan(realistic_store.theta))
    realistic_store.save(tmp_path / "store.npz")
    assert np.array_equal(ts.TrajectoryStore.load(tmp_path / "store.npz").bright, flags)
