import math

import numpy as np
import pytest

from qzeno import ideal_model as im
from qzeno import liouvillian as lv
from qzeno.errors import DomainError, NumericalError


@pytest.mark.parametrize("lam", [1.2, 1.5, 3.0])
def test_ideal_postselected_spectrum_matches_closed_form(ideal_params, lam):
    p = ideal_params.with_lambda(lam)
    got = lv.spectrum(lv.build_postselected(p))
    want = im.ideal_spectrum(lam, p.omega_s)
    for a, b in zip(got.values, want.values):
        assert a == pytest.approx(b, rel=1e-9)


def test_postselected_entries(realistic_params):
    p = realistic_params.replace(p_fn=0.1, kappa_fp=3e3).with_lambda(1.3)
    m = lv.build_postselected(p)
    ae = p.alpha * 0.9
    assert m[0, 0] == pytest.approx(-ae / 2 - 3e3)
    assert m[1, 1] == pytest.approx(-p.gamma2 - p.alpha / 2 - 3e3)
    assert m[2, 0] == pytest.approx(ae / 2 - p.gamma1)
    assert m[1, 2] == p.omega_s and m[2, 1] == -p.omega_s
    assert sum(lv.spectrum(m).values).real == pytest.approx(np.trace(m), rel=1e-10)


def test_sorted_convention(ideal_params):
    s = lv.spectrum(lv.build_postselected(ideal_params.with_lambda(0.5)))
    assert s.has_pair
    assert s.e1.imag < 0 and s.e2 == s.e1.conjugate()
    assert s.e3.imag == 0.0


def test_spectrum_rejects_bad_shape():
    with pytest.raises(DomainError):
        lv.spectrum(np.eye(2))


def test_discriminant_sign(ideal_params):
    om = ideal_params.omega_s
    assert lv.discriminant(lv.build_postselected(ideal_params.with_lambda(0.5)) / om) < 0
    assert lv.discriminant(lv.build_postselected(ideal_params.with_lambda(2.0)) / om) > 0


@pytest.mark.parametrize("lam", [1.3, 2.0, 4.0])
def test_xi_from_spectrum_matches_ideal_exponent(lam):
    assert lv.xi_from_spectrum(im.ideal_spectrum(lam, 1.0)) == pytest.approx(im.critical_exponent(lam))


def test_xi_from_spectrum_singular():
    with pytest.raises(NumericalError):
        lv.xi_from_spectrum(lv.SortedSpectrum(-1 + 0j, -1 + 0j, -1 + 0j))


def test_ideal_transitions(ideal_params):
    c1, c2, c3 = lv.find_transitions(ideal_params)
    assert c1 == pytest.approx(1.0, abs=1e-4)
    assert c2 == pytest.approx(2 / math.sqrt(3), abs=1e-5)
    assert c3 == pytest.approx(2.0, abs=1e-3)


def test_realistic_transitions(realistic_params):
    c1, c2, c3 = lv.find_transitions(realistic_params)
    assert c1 == pytest.approx(1.18, abs=0.01)
    assert c2 == pytest.approx(1.01, abs=0.01)
    assert c3 == pytest.approx(1.25, abs=0.01)
    assert c2 < c1


def test_false_positives_leave_first_transition(realistic_params):
    base = lv.find_lambda_c1(realistic_params)
    shifted = lv.find_lambda_c1(realistic_params.replace(kappa_fp=0.2 * realistic_params.omega_s))
    assert shifted == pytest.approx(base, abs=1e-5)


def test_long_waiting_time_ensemble_follows_postselected(realistic_params):
    p = realistic_params.replace(tau_b=1e6 / realistic_params.omega_s).with_lambda(0.7)
    om = p.omega_s
    ens = lv.spectrum(lv.build_ensemble(p) / om, scale=1.0)
    post = lv.spectrum(lv.build_postselected(p) / om, scale=1.0)
    for a, b in zip(ens.values, post.values):
        assert a == pytest.approx(b, abs=1e-4)
    assert abs(ens.e0) < 1e-9
    c3 = lv.find_lambda_c3(realistic_params.replace(tau_b=1e4 / om))
    assert c3 == pytest.approx(lv.find_lambda_c1(realistic_params), abs=5e-3)


def test_lindblad_zeno_point(ideal_params):
    om = ideal_params.omega_s
    below = np.linalg.eigvals(lv.build_lindblad(ideal_params.with_lambda(1.9)) / om)
    above = np.linalg.eigvals(lv.build_lindblad(ideal_params.with_lambda(2.1)) / om)
    assert np.max(np.abs(below.imag)) > 0.1
    assert np.max(np.abs(above.imag)) < 1e-12


def test_steady_state_and_master_equation(realistic_params):
    p = realistic_params.with_lambda(1.0)
    ss = lv.steady_state(p)
    assert ss.p_b + ss.p_s == pytest.approx(1.0)
    assert np.allclose(lv.build_ensemble(p) @ np.array(ss), 0.0, atol=1e-6 * p.omega_s)

    times, states = lv.integrate_master(p, lv.GROUND4, duration=200e-6)
    assert times[1] == pytest.approx(p.t_int)
    assert np.allclose(states[:, 0] + states[:, 1], 1.0)
    assert lv.excited_population(states[0]) == 0.0
    assert np.allclose(states[-1], np.array(ss), atol=1e-6)


def test_lambda_scan(realistic_params):
    grid = [0.02, 0.06, 0.1]
    rows = lv.lambda_scan(realistic_params, "gamma_phi", grid)
    assert [r["param_value"] for r in rows] == grid
    c1 = [r["lambda_c1"] for r in rows]
    assert all(b >= a - 1e-6 for a, b in zip(c1, c1[1:]))
    assert [r["lambda_c1"] for r in lv.lambda_scan(realistic_params, "gamma_phi", grid, workers=2)] == c1
    with pytest.raises(DomainError):
        lv.lambda_scan(realistic_params, "omega_s", grid)


def scan_column(params, name, grid, key):
    rows = lv.lambda_scan(params, name, grid)
    values = [r[key] for r in rows]
    assert None not in values
    return np.array(values)


def test_false_positive_rate_raises_second_transition_only(realistic_params):
    grid = [0.0, 0.05, 0.1, 0.2]
    c1 = scan_column(realistic_params, "kappa_fp", grid, "lambda_c1")
    c2 = scan_column(realistic_params, "kappa_fp", grid, "lambda_c2")
    assert np.ptp(c1) < 1e-4
    assert np.all(np.diff(c2) >= -1e-6)
    assert c2[-1] > c2[0] + 0.02


def test_relaxation_delays_first_transition(realistic_params):
    c1 = scan_column(realistic_params, "gamma1", [0.005, 0.01, 0.02, 0.04], "lambda_c1")
    assert np.all(np.diff(c1) >= -1e-6)
    assert c1[-1] > c1[0]


def test_dephasing_advances_second_transition(realistic_params):
    c2 = scan_column(realistic_params, "gamma_phi", [0.02, 0.04, 0.06, 0.08, 0.1], "lambda_c2")
    assert np.all(np.diff(c2) <= 1e-6)
    assert c2[-1] < c2[0]


def test_zeno_point_falls_with_detector_waiting_time(realistic_params):
    c3 = scan_column(realistic_params, "kappa", [0.5, 1.0, 2.5, 5.0, 10.0], "lambda_c3")
    c1 = lv.find_lambda_c1(realistic_params)
    assert np.all(np.diff(c3) <= 1e-6) and c3[-1] < c3[0]
    assert c3[0] <= 2.0
    assert np.all(c3 >= c1 - 0.05)


def test_master_equation_rabi_without_measurement(realistic_params):
    p = realistic_params.replace(gamma1=0.0, gamma_phi=0.0)
    assert p.alpha == 0.0
    times, states = lv.integrate_master(p, lv.GROUND4, duration=20e-6)
    assert np.allclose(states[:, 3], -np.cos(p.omega_s * times), atol=1e-9)
    assert np.allclose(states[:, 0], 0.0, atol=1e-12)


@pytest.mark.parametrize("lam", [0.5, 1.2, 2.2])
def test_master_equation_stays_physical(realistic_params, lam):
    _, states = lv.integrate_master(realistic_params.with_lambda(lam), lv.GROUND4, duration=40e-6)
    p_b, p_s, x, z = states.T
    assert np.all((p_b >= -1e-12) & (p_b <= 1 + 1e-12))
    assert np.allclose(p_b + p_s, 1.0)
    assert np.all(np.hypot(x, z) <= p_s + 1e-9)
