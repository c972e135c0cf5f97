"""Inference chain shared by simulated and measured click data."""
from .coalescence import (CoalescenceFit, XiCurveFit, extraction_bias_study, fit_coalescence, fit_xi_curve,
                          xi_curve)
from .dwell import DwellFit, bin_average, dwell_law, fit_dwell
from .hmm import (BaumWelchResult, Calibration, HmmParams, empirical_click_calibration, hmm_baum_welch,
                  initial_hmm_guess, sample_hmm_record)
from .pencil import PoleBands, PoleSet, matrix_pencil, pole_bands_to_records, residual_bootstrap, track_pair

__all__ = [
    "BaumWelchResult", "Calibration", "CoalescenceFit", "DwellFit", "HmmParams", "PoleBands", "PoleSet",
    "XiCurveFit", "bin_average", "dwell_law", "empirical_click_calibration", "extraction_bias_study",
    "fit_coalescence", "fit_dwell", "fit_xi_curve", "hmm_baum_welch", "initial_hmm_guess", "matrix_pencil",
    "pole_bands_to_records", "residual_bootstrap", "sample_hmm_record", "track_pair", "xi_curve",
]
