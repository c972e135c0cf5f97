import dataclasses

import numpy as np
import pytest

from qzeno.errors import DomainError, RecordParseError
from qzeno.estimation import (HmmParams, empirical_click_calibration, hmm_baum_welch, initial_hmm_guess,
                              sample_hmm_record)
from qzeno.estimation.hmm import params_from_probabilities

DT = 320e-9
TRUE = HmmParams(gamma_b_up=2e4, gamma_b_down=1 / 4e-6, gamma_1_up=0.0, gamma_1_down=0.0, p_fp=0.04, p_fn=0.04,
                 dt=DT)


def test_transition_matrix_structure():
    p = dataclasses.replace(TRUE, gamma_1_up=1e3, gamma_1_down=5e3)
    trans = p.transition_matrix()
    assert np.allclose(trans.sum(axis=1), 1.0)
    assert trans[1, 2] == 0.0 and trans[2, 1] == 0.0
    back = params_from_probabilities(trans, p.emission_matrix(), DT)
    for name in ("gamma_b_up", "gamma_b_down", "gamma_1_up", "gamma_1_down", "p_fp", "p_fn"):
        assert getattr(back, name) == pytest.approx(getattr(p, name), rel=1e-9)


def test_invalid_params():
    with pytest.raises(DomainError):
        dataclasses.replace(TRUE, p_fp=1.0)
    with pytest.raises(DomainError):
        dataclasses.replace(TRUE, gamma_b_up=-1.0)


def test_sampled_click_fraction():
    clean = dataclasses.replace(TRUE, p_fp=0.0, p_fn=0.0)
    rec = sample_hmm_record(clean, 200_000, seed=1)
    expected = (1 / clean.gamma_b_down) / (1 / clean.gamma_b_down + 1 / clean.gamma_b_up)
    assert rec.mean() == pytest.approx(expected, rel=0.1)
    guess = initial_hmm_guess(rec, DT)
    assert guess.gamma_b_up == pytest.approx(clean.gamma_b_up, rel=0.2)
    assert guess.tau_b == pytest.approx(4e-6, rel=0.2)


def test_baum_welch_recovers_detector_parameters():
    rec = sample_hmm_record(TRUE, 400_000, seed=2)
    res = hmm_baum_welch(rec, initial_hmm_guess(rec, DT), tol=1e-9)
    ll = np.array(res.loglik)
    assert np.all(np.diff(ll) >= -1e-6 * np.abs(ll[1:]))
    assert res.params.alpha == pytest.approx(2e4, rel=0.05)
    assert res.params.tau_b == pytest.approx(4e-6, rel=0.05)
    assert res.params.p_fp == pytest.approx(0.04, abs=0.01)
    assert res.params.p_fn == pytest.approx(0.04, abs=0.01)


def test_baum_welch_empty_record():
    with pytest.raises(DomainError):
        hmm_baum_welch(np.zeros(0, dtype=bool), TRUE)


def test_calibration_quadratic_in_label():
    sets = {}
    for i, label in enumerate((1.0, 1.5)):
        p = dataclasses.replace(TRUE, gamma_b_up=1e4 * label ** 2, p_fp=0.0, p_fn=0.0)
        sets[label] = sample_hmm_record(p, 200_000, seed=10 + i)
    cal = empirical_click_calibration(sets, DT)
    assert [r.label for r in cal.rows] == [1.0, 1.5]
    assert cal.quad_coeff == pytest.approx(1e4, rel=0.1)
    with pytest.raises(RecordParseError):
        empirical_click_calibration({}, DT)


def test_baum_welch_on_silent_record_removes_clicks():
    res = hmm_baum_welch(np.zeros(20_000, dtype=bool), TRUE)
    assert res.converged
    assert res.params.alpha < 0.01 * TRUE.alpha
    assert res.params.p_fp == pytest.approx(0.0, abs=1e-9)
    assert res.loglik[-1] == pytest.approx(0.0, abs=1e-3)
