"""
Exceptional-point fits: square-root coalescence of the tracked pair (λc₁, λc₃)
and the zero crossing of the dwell exponent ξ(λ) (λc₂).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from ..errors import DomainError, FitError, NotFoundError
from ..liouvillian import find_lambda_c1
from ..trajectory_sim import run_ensemble
from .pencil import matrix_pencil, track_pair

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 0.15
SENSITIVITY = (0.67, 1.5)
XI_CROSSING = 2.0 / math.sqrt(3.0)


@dataclass
class CoalescenceFit:
    lambda_c: float
    a: float
    b: float
    sigma_lambda_c: float
    window: tuple
    n_points: int
    residual_norm: float
    sensitivity: dict = field(default_factory=dict)  # window half-width -> λc

    def to_record(self, estimator="coalescence", seed=None, n_boot=None):
        return {"estimator": estimator,
                "params": {"lambda_c": self.lambda_c, "a": self.a, "b": self.b},
                "sigmas": {"lambda_c": self.sigma_lambda_c},
                "window": list(self.window), "seed": seed, "n_boot": n_boot,
                "residual_norm": self.residual_norm,
                "sensitivity": {str(k): v for k, v in self.sensitivity.items()}}


def _coarse_crossing(lambdas, re, im):
    # last imaginary-dominated point followed by a real-dominated one
    imag_dom = im > re
    for i in range(len(lambdas) - 1):
        if imag_dom[i] and not imag_dom[i + 1]:
            return 0.5 * (lambdas[i] + lambdas[i + 1])
    return None


def _model(x, lam):
    lc, a, b = x
    d = lam - lc
    below = d < 0
    ad = np.abs(d)
    branch = a * np.sqrt(ad)
    pred_im = np.where(below, branch - b * ad ** 1.5, 0.0)
    pred_re = np.where(below, 0.0, branch + b * ad ** 1.5)
    return pred_re, pred_im


def _jacobian_sigma(res, n_data):
    J = res.jac
    dof = max(n_data - len(res.x), 1)
    s2 = 2.0 * res.cost / dof
    cov = np.linalg.pinv(J.T @ J) * s2
    return np.sqrt(np.maximum(np.diag(cov), 0.0))


def _fit_window(lambdas, re, im, sigma, center, half):
    sel = np.abs(lambdas - center) <= half + 1e-12
    lam, r, m, s = lambdas[sel], re[sel], im[sel], sigma[sel]
    if np.sum(m[lam < center] > r[lam < center]) < 1 or np.sum(r[lam > center] >= m[lam > center]) < 1:
        raise FitError(f"window {center:.4g}±{half:.3g} lacks points on both sides of the coalescence")
    if len(lam) < 4:
        raise FitError(f"only {len(lam)} points inside window {center:.4g}±{half:.3g}")
    scale = max(np.max(np.hypot(r, m)), 1e-300)
    r, m, s = r / scale, m / scale, s / scale

    d0 = np.sqrt(np.abs(lam - center))
    mag = np.where(lam < center, m, r)
    a0 = float(np.dot(d0, mag) / max(np.dot(d0, d0), 1e-300))

    def resid(x):
        pr, pi = _model(x, lam)
        return np.concatenate([(r - pr) / s, (m - pi) / s])

    lo = float(lam.min())
    hi = float(lam.max())
    res = least_squares(resid, x0=[center, max(a0, 1e-6), 0.0], method="trf",
                        bounds=([lo, 0.0, -np.inf], [hi, np.inf, np.inf]),
                        x_scale=[max(half, 1e-3), 1.0, 1.0], xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
    if res.status <= 0:
        raise FitError(f"coalescence fit did not converge: {res.message}", last=res.x)
    sig = _jacobian_sigma(res, 2 * len(lam))
    return res, sig, scale, len(lam)


def fit_coalescence(lambdas, delta_e12, window=DEFAULT_WINDOW, sigma=None, center=None):
    """
    Joint least squares of Δe₁₂(λ) = (e₁ − e₂)/2 to
        |Im Δ| = a√(λc−λ) − b(λc−λ)^1.5   (λ < λc)
        |Re Δ| = a√(λ−λc) + b(λ−λc)^1.5   (λ > λc)
    within ±window of the coarse crossing. sigma: optional per-point 1σ of |Δ|.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    delta = np.asarray(delta_e12, dtype=complex)
    ok = np.isfinite(delta)
    lambdas, delta = lambdas[ok], delta[ok]
    if len(lambdas) < 4:
        raise DomainError("fit_coalescence needs at least 4 points")
    order = np.argsort(lambdas)
    lambdas, delta = lambdas[order], delta[order]
    re, im = np.abs(delta.real), np.abs(delta.imag)
    sig = np.ones_like(re) if sigma is None else np.asarray(sigma, dtype=float)[ok][order]
    sig = np.where(sig > 0, sig, np.min(sig[sig > 0]) if np.any(sig > 0) else 1.0)

    c = center if center is not None else _coarse_crossing(lambdas, re, im)
    if c is None:
        raise FitError("no change from imaginary- to real-dominated Δe12 across the grid")
    res, sig_x, scale, n = _fit_window(lambdas, re, im, sig, c, window)
    lc, a, b = res.x
    sigma_lc = max(float(sig_x[0]), 1e-12 * max(abs(lc), 1.0))
    fit = CoalescenceFit(float(lc), float(a * scale), float(b * scale), sigma_lc, (c - window, c + window), n,
                         float(np.sqrt(2 * res.cost)))

    for factor in SENSITIVITY:
        try:
            r2, _, _, _ = _fit_window(lambdas, re, im, sig, c, window * factor)
            fit.sensitivity[round(window * factor, 6)] = float(r2.x[0])
        except FitError as e:
            logger.info(f"[fit] window x{factor} skipped: {e}")
    logger.info(f"[fit] lambda_c = {fit.lambda_c:.5f} +/- {fit.sigma_lambda_c:.2g} ({n} points)")
    return fit


@dataclass
class XiCurveFit:
    delta: float
    sigma_delta: float
    lambda_c2: float
    sigma_lambda_c2: float
    n_points: int


def xi_curve(lam, delta):
    u = np.asarray(lam, dtype=float) - delta
    return u / np.sqrt(u * u - 1.0) - 2.0


def fit_xi_curve(lambdas, xi, sigma=None):
    """One-parameter fit ξ(λ) = (λ−δ)/√((λ−δ)²−1) − 2; crossing at δ + 2/√3."""
    lambdas = np.asarray(lambdas, dtype=float)
    xi = np.asarray(xi, dtype=float)
    ok = np.isfinite(xi) & np.isfinite(lambdas)
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        ok &= np.isfinite(sigma) & (sigma > 0)
    lambdas, xi = lambdas[ok], xi[ok]
    s = np.ones_like(xi) if sigma is None else sigma[ok]
    if len(lambdas) < 4:
        raise DomainError("fit_xi_curve needs at least 4 points")
    upper = float(lambdas.min()) - 1.0 - 1e-9

    def resid(x):
        return (xi_curve(lambdas, x[0]) - xi) / s

    res = least_squares(resid, x0=[min(0.0, upper - 1e-3)], bounds=([-np.inf], [upper]), method="trf",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if res.status <= 0:
        raise FitError(f"xi curve fit did not converge: {res.message}", last=res.x)
    delta = float(res.x[0])
    sd = float(_jacobian_sigma(res, len(xi))[0]) if len(xi) > 1 else 0.0
    crossing = delta + XI_CROSSING
    if not lambdas.min() <= crossing <= lambdas.max():
        raise NotFoundError(f"xi zero crossing {crossing:.4g} outside [{lambdas.min():.3g}, {lambdas.max():.3g}]")
    return XiCurveFit(delta, sd, crossing, sd, len(xi))


def extraction_bias_study(params, lambdas, n_traj, n_repeats=5, seed=0, window=DEFAULT_WINDOW, duration=20e-6,
                          workers=1):
    """
    λ₁ᵒᵇˢ − λc₁ over repeated finite-shot runs: no-click survival → pencil poles
    → tracked pair → coalescence fit. The bias is reported, not corrected.
    """
    truth = find_lambda_c1(params)
    offsets = []
    for rep in range(n_repeats):
        poles = []
        for i, lam in enumerate(lambdas):
            store = run_ensemble(params.with_lambda(lam), duration=duration, n_traj=n_traj,
                                 seed=int(np.random.SeedSequence([seed, rep, i]).generate_state(1)[0]),
                                 keep_records=False, workers=workers)
            p0 = store.snap["cond_n"] / store.n_traj
            poles.append(matrix_pencil(p0, params.t_int, order=3).poles)
        try:
            fit = fit_coalescence(lambdas, track_pair(lambdas, poles), window=window)
            offsets.append(fit.lambda_c - truth)
        except (FitError, DomainError) as e:
            logger.warning(f"[warn] bias study repeat {rep}: {e}")
    offsets = np.asarray(offsets)
    return {"lambda_c1": truth, "n_ok": int(len(offsets)),
            "mean_offset": float(offsets.mean()) if len(offsets) else float("nan"),
            "std_offset": float(offsets.std(ddof=1)) if len(offsets) > 1 else float("nan"),
            "offsets": offsets.tolist()}
