import math

import numpy as np
import pytest

from qzeno.errors import DomainError, FitError, NotFoundError
from qzeno.estimation import (extraction_bias_study, fit_coalescence, fit_xi_curve, matrix_pencil, track_pair,
                              xi_curve)
from qzeno.ideal_model import critical_exponent, ideal_spectrum, noclick_survival
from qzeno.params import realistic_params


def ideal_delta(lambdas):
    return track_pair(lambdas, [np.array(ideal_spectrum(lam, 1.0).values) for lam in lambdas])


def test_coalescence_of_ideal_pair():
    lambdas = np.round(np.arange(0.80, 1.205, 0.01), 10)
    fit = fit_coalescence(lambdas, ideal_delta(lambdas))
    assert fit.lambda_c == pytest.approx(1.0, abs=5e-3)
    assert fit.a == pytest.approx(math.sqrt(2), rel=0.1)
    assert fit.sigma_lambda_c > 0
    assert len(fit.sensitivity) == 2
    rec = fit.to_record(seed=1, n_boot=100)
    assert rec["params"]["lambda_c"] == fit.lambda_c and rec["n_boot"] == 100


def test_coalescence_needs_a_crossing():
    lambdas = np.linspace(0.2, 0.8, 12)
    with pytest.raises(FitError):
        fit_coalescence(lambdas, ideal_delta(lambdas))
    with pytest.raises(DomainError):
        fit_coalescence(lambdas[:3], ideal_delta(lambdas[:3]))


def test_ideal_xi_curve_is_critical_exponent():
    lam = np.linspace(1.05, 3.0, 9)
    assert np.allclose(xi_curve(lam, 0.0), [critical_exponent(x) for x in lam])


def test_xi_curve_fit_recovers_shift():
    lambdas = np.linspace(1.0, 2.0, 21)
    fit = fit_xi_curve(lambdas, xi_curve(lambdas, -0.05))
    assert fit.delta == pytest.approx(-0.05, abs=1e-6)
    assert fit.lambda_c2 == pytest.approx(2 / math.sqrt(3) - 0.05, abs=1e-6)
    assert fit.n_points == 21


def test_xi_crossing_outside_range():
    lambdas = np.linspace(1.5, 2.5, 11)
    with pytest.raises(NotFoundError):
        fit_xi_curve(lambdas, xi_curve(lambdas, 0.0))


@pytest.mark.slow
def test_extraction_bias_is_small_at_scale():
    lambdas = np.round(np.arange(0.96, 1.42, 0.02), 10)
    out = extraction_bias_study(realistic_params(), lambdas, n_traj=20_000, n_repeats=2, seed=1)
    assert out["n_ok"] >= 1
    assert abs(out["mean_offset"]) < 0.1


def test_pencil_poles_of_ideal_survival_give_first_transition():
    lambdas = np.round(np.arange(0.805, 1.2, 0.02), 10)
    t = np.arange(200) * 0.05
    poles = [matrix_pencil(noclick_survival(t, lam, 1.0), 0.05, order=3, threshold=1e-10).poles for lam in lambdas]
    for lam, p in zip(lambdas[::4], poles[::4]):
        for w in ideal_spectrum(lam, 1.0).values:
            assert np.min(np.abs(p - w)) < 1e-4
    fit = fit_coalescence(lambdas, track_pair(lambdas, poles))
    assert fit.lambda_c == pytest.approx(1.0, abs=5e-3)


def test_coalescence_ignores_common_mode_shift():
    lambdas = np.round(np.arange(0.80, 1.205, 0.01), 10)
    poles = [np.array(ideal_spectrum(lam, 1.0).values) for lam in lambdas]
    delta = track_pair(lambdas, poles)
    shifted = track_pair(lambdas, [p - 0.35 for p in poles])
    assert np.allclose(shifted, delta, atol=1e-12)
    assert fit_coalescence(lambdas, shifted).lambda_c == pytest.approx(fit_coalescence(lambdas, delta).lambda_c,
                                                                       abs=1e-9)
