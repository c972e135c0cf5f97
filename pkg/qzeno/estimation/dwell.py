"""
Bin-averaged fit of the dwell law near the stable fixed point,

    τ_θ(θ) = A (T − T₊)^ξ / (cos⁴(θ/2) (T − cot(θ₊/2))^(ξ+4)),   T = tan(θ/2),

on θ₊ ≤ θ ≤ 0, with τ_θ = 0 below θ₊.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import least_squares

from ..errors import DomainError, FitError

logger = logging.getLogger(__name__)

XI_BOUNDS = (-0.99, 5.0)
THETA_BOUNDS = (-math.pi / 2, 0.0)
_NODES, _WEIGHTS = leggauss(16)


@dataclass
class DwellFit:
    A: float
    theta_plus: float
    xi: float
    sigma_A: float
    sigma_theta_plus: float
    sigma_xi: float
    n_bins: int
    residual_norm: float

    def to_record(self, lam=None):
        return {"estimator": "dwell_law", "lambda": lam,
                "params": {"A": self.A, "theta_plus": self.theta_plus, "xi": self.xi},
                "sigmas": {"A": self.sigma_A, "theta_plus": self.sigma_theta_plus, "xi": self.sigma_xi},
                "n_bins": self.n_bins, "residual_norm": self.residual_norm}


def dwell_law(theta, A, theta_plus, xi):
    th = np.asarray(theta, dtype=float)
    T = np.tan(th / 2)
    tp = math.tan(theta_plus / 2)
    tm = 1.0 / tp
    inside = th > theta_plus
    with np.errstate(invalid="ignore", divide="ignore"):
        val = A * np.abs(T - tp) ** xi / (np.cos(th / 2) ** 4 * (T - tm) ** (xi + 4))
    return np.where(inside, val, 0.0)


def bin_average(edges, A, theta_plus, xi):
    """Mean of dwell_law over each bin; θ = θ₊ + u^(1/(ξ+1)) removes the edge singularity."""
    edges = np.asarray(edges, dtype=float)
    lo = np.maximum(edges[:-1], theta_plus)
    hi = edges[1:]
    out = np.zeros(len(lo))
    p = xi + 1.0
    for i, (a, b) in enumerate(zip(lo, hi)):
        if b <= a:
            continue
        ua, ub = (a - theta_plus) ** p, (b - theta_plus) ** p
        u = 0.5 * (ub - ua) * _NODES + 0.5 * (ub + ua)
        du = 0.5 * (ub - ua) * _WEIGHTS
        d = u ** (1.0 / p)
        th = theta_plus + d
        # τ(θ)·dθ/du with the (θ−θ₊)^ξ factor cancelled analytically
        T = np.tan(th / 2)
        tp = math.tan(theta_plus / 2)
        ratio = np.where(d > 0, (T - tp) / np.where(d > 0, d, 1.0), 0.5 / math.cos(theta_plus / 2) ** 2)
        smooth = A * ratio ** xi / (np.cos(th / 2) ** 4 * (T - 1.0 / tp) ** (xi + 4)) / p
        out[i] = np.sum(smooth * du)
    return out / (edges[1:] - edges[:-1])


def fit_dwell(hist, theta_start=None, theta_stop=0.0, x0=None):
    """
    Fit (A, θ₊, ξ) to a DwellHistogram on the bins between the first nonzero
    bin at or below 0 (one empty bin of margin) and theta_stop.
    """
    edges = np.asarray(hist.bin_edges, dtype=float)
    values = np.asarray(hist.values, dtype=float)
    sigma = np.asarray(hist.sigma, dtype=float)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    neg = (centers > -math.pi / 2 - width) & (edges[1:] <= theta_stop + 1e-12)
    if theta_start is None:
        nz = np.nonzero(neg & (values > 0))[0]
        if len(nz) == 0:
            raise FitError("no nonzero dwell bins in (-pi/2, 0)")
        first = nz[0]
        theta_start = edges[max(first - 1, 0)]
    sel = neg & (edges[:-1] >= theta_start - 1e-12)
    if sel.sum() < 4:
        raise DomainError(f"only {int(sel.sum())} bins in the fit range")
    sub_edges = np.append(edges[:-1][sel], edges[1:][sel][-1])
    v = values[sel]
    s = sigma[sel]
    s = np.where(s > 0, s, np.min(s[s > 0]) if np.any(s > 0) else 1.0)
    if np.all(sigma[sel] <= 0):
        s = np.full_like(v, max(np.max(np.abs(v)), 1e-300))

    if x0 is None:
        nz = np.nonzero(v > 0)[0]
        tp0 = sub_edges[nz[0]] + 0.5 * width if len(nz) else -0.5
        tp0 = min(max(tp0, THETA_BOUNDS[0] + 1e-3), THETA_BOUNDS[1] - 1e-3)
        shape = bin_average(sub_edges, 1.0, tp0, -0.5)
        a0 = float(np.dot(shape, v) / max(np.dot(shape, shape), 1e-300))
        x0 = (math.log(max(a0, 1e-300)), tp0, -0.5)
    else:
        x0 = (math.log(x0[0]), x0[1], x0[2])

    def resid(x):
        return (bin_average(sub_edges, math.exp(x[0]), x[1], x[2]) - v) / s

    lower = [-np.inf, THETA_BOUNDS[0] + 1e-9, XI_BOUNDS[0]]
    upper = [np.inf, THETA_BOUNDS[1] - 1e-9, XI_BOUNDS[1]]
    try:
        res = least_squares(resid, x0=x0, bounds=(lower, upper), method="trf", diff_step=1e-6,
                            xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=500)
    except ValueError as e:
        raise FitError(f"dwell fit failed: {e}", last=np.asarray(x0)) from e
    last = np.array([math.exp(res.x[0]), res.x[1], res.x[2]])
    if res.status <= 0:
        raise FitError(f"dwell fit did not converge: {res.message}", last=last)

    J = res.jac
    dof = max(len(v) - 3, 1)
    cov = np.linalg.pinv(J.T @ J) * (2.0 * res.cost / dof)
    err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    fit = DwellFit(last[0], last[1], last[2], last[0] * err[0], err[1], err[2], int(len(v)),
                   float(np.sqrt(2 * res.cost)))
    logger.info(f"[fit] dwell: theta_plus={fit.theta_plus:.4f} xi={fit.xi:.4f} +/- {fit.sigma_xi:.2g}")
    return fit
