"""
Matrix-pencil pole estimation, residual bootstrap and pair tracking.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from ..errors import DomainError

logger = logging.getLogger(__name__)

MAX_ORDER = 6
SV_THRESHOLD = 1e-3
DEFAULT_BOOT = 2000


@dataclass
class PoleSet:
    poles: np.ndarray        # complex, 1/s, sorted by (real, imag)
    amplitudes: np.ndarray   # complex
    model_order: int
    sampling: float
    residual: float          # ||y − model|| / ||y||
    requested_order: Optional[int] = None
    reduced: bool = False
    singular_values: Optional[np.ndarray] = None

    def reconstruct(self, n):
        z = np.exp(self.poles * self.sampling)
        return (np.vander(z, n, increasing=True).T @ self.amplitudes).real


def _sort_poles(poles, amps=None):
    order = np.lexsort((poles.imag, poles.real))
    return (poles[order], None if amps is None else amps[order])


def matrix_pencil(series, sampling, order="auto", pencil=None, threshold=SV_THRESHOLD, max_order=MAX_ORDER):
    """
    Fit y[n] = Σ_k c_k exp(s_k n·sampling) by the SVD matrix pencil.

    order     : 1..max_order or "auto" (singular values above threshold·s_max)
    pencil    : pencil parameter L, default N//3

    A requested order above the numerical rank is reduced to the rank and
    flagged with reduced=True.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if sampling <= 0:
        raise DomainError("sampling must be > 0")
    auto = isinstance(order, str)
    if not auto and not 1 <= order <= max_order:
        raise DomainError(f"order must lie in 1..{max_order}, got {order}")
    if not auto and n < 2 * order + 1:
        raise DomainError(f"series of {n} samples is too short for order {order}")
    if n < 3:
        raise DomainError("matrix pencil needs at least 3 samples")

    L = pencil or max(n // 3, 1)
    Y = la.hankel(y[:n - L], y[n - L - 1:])
    _, s, VT = la.svd(Y, full_matrices=False)
    if s[0] == 0.0:
        raise DomainError("series is identically zero")
    rank = int(np.sum(s / s[0] > threshold))
    rank = max(1, min(rank, max_order, L))
    reduced = False
    if auto:
        m = rank
    elif order > rank:
        m = rank
        reduced = True
        logger.warning(f"[warn] matrix pencil: rank {rank} below requested order {order}; order reduced")
    else:
        m = order

    Vhat = VT[:m, :]
    V1T = Vhat[:, :-1]
    V2T = Vhat[:, 1:]
    A = V2T @ la.pinv(V1T)
    z = la.eigvals(A).astype(complex)
    poles = np.log(z) / sampling

    V = np.vander(z, n, increasing=True).T
    amps, *_ = la.lstsq(V, y.astype(complex))
    poles, amps = _sort_poles(poles, amps)
    model = (np.vander(np.exp(poles * sampling), n, increasing=True).T @ amps).real
    residual = float(np.linalg.norm(y - model) / max(np.linalg.norm(y), 1e-300))
    return PoleSet(poles, amps, m, sampling, residual, None if auto else order, reduced, s)


@dataclass
class PoleBands:
    fit: PoleSet
    median: np.ndarray   # complex per pole label
    lower: np.ndarray    # 16th percentile (real and imaginary parts separately)
    upper: np.ndarray    # 84th percentile
    samples: np.ndarray  # (n_boot, order), NaN where a refit lost a pole
    seed: int = 0

    @property
    def sigma(self):
        half = 0.5 * (self.upper - self.lower)
        return half.real + 1j * half.imag


def _complex_percentile(x, q):
    return np.nanpercentile(x.real, q, axis=0) + 1j * np.nanpercentile(x.imag, q, axis=0)


def residual_bootstrap(series, sampling, order="auto", n_boot=DEFAULT_BOOT, seed=0, workers=1, **pencil_kw):
    """
    Resample the residuals of the pencil fit with replacement, refit at the
    same order and collect pole statistics. Iteration i draws from
    default_rng([seed, i]), so results do not depend on `workers`.
    """
    if n_boot < 100:
        raise DomainError("n_boot must be >= 100")
    y = np.asarray(series, dtype=float)
    fit = matrix_pencil(y, sampling, order, **pencil_kw)
    model = fit.reconstruct(len(y))
    resid = y - model
    m = fit.model_order

    def one(i):
        rng = np.random.default_rng([seed, i])
        y_star = model + rng.choice(resid, size=len(y), replace=True)
        out = np.full(m, np.nan + 1j * np.nan)
        try:
            refit = matrix_pencil(y_star, sampling, m, **pencil_kw)
        except DomainError:
            return out
        out[:refit.model_order] = refit.poles
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(one, range(n_boot)))
    else:
        rows = [one(i) for i in range(n_boot)]
    samples = np.vstack(rows)
    return PoleBands(fit, _complex_percentile(samples, 50), _complex_percentile(samples, 16),
                     _complex_percentile(samples, 84), samples, seed)


def pole_bands_to_records(bands: PoleBands, estimator="matrix_pencil", window=None, extra=None):
    """JSON-ready record per fit."""
    rec = {
        "estimator": estimator,
        "params": {"poles_re": bands.median.real.tolist(), "poles_im": bands.median.imag.tolist(),
                   "model_order": bands.fit.model_order, "reduced": bands.fit.reduced},
        "sigmas": {"poles_re": bands.sigma.real.tolist(), "poles_im": bands.sigma.imag.tolist()},
        "window": window,
        "seed": bands.seed,
        "n_boot": int(bands.samples.shape[0]),
        "residual_norm": bands.fit.residual,
    }
    if extra:
        rec.update(extra)
    return rec


def track_pair(lambdas, poles, drop_slowest=False, imag_tol=1e-9):
    """
    Half difference Δe₁₂ of the coalescing pair at each λ.

    poles        : sequence (one entry per λ) of pole arrays
    drop_slowest : discard the pole closest to 0 first (steady-state mode)

    With a complex pair Δ = (e₁ − e₂)/2 = −i|Im e|. With three real poles
    the pair is what remains after removing the isolated real pole, followed
    by continuity from the previous λ; Δ is then (e_low − e_high)/2 < 0.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if len(lambdas) != len(poles):
        raise DomainError("lambdas and poles differ in length")
    out = np.full(len(lambdas), np.nan + 0j)
    history = []  # (λ, isolated real pole)
    for i, (lam, p) in enumerate(zip(lambdas, poles)):
        p = np.asarray(p, dtype=complex)
        p = p[np.isfinite(p)]
        if drop_slowest and len(p):
            p = np.delete(p, np.argmin(np.abs(p)))
        if len(p) < 2:
            continue
        scale = max(np.max(np.abs(p)), 1e-300)
        cplx = p[np.abs(p.imag) > imag_tol * scale]
        if len(cplx) >= 2:
            pair = cplx[np.argsort(-np.abs(cplx.imag))][:2]
            out[i] = -1j * 0.5 * (abs(pair[0].imag) + abs(pair[1].imag))
            rest = p[np.abs(p.imag) <= imag_tol * scale]
            if len(rest):
                history.append((lam, rest.real[0]))
            continue
        re = np.sort(p.real)
        if len(re) == 2:
            out[i] = 0.5 * (re[0] - re[1])
            continue
        if len(history) >= 2:
            (l0, v0), (l1, v1) = history[-2:]
            guess = v1 + (v1 - v0) * (lam - l1) / (l1 - l0) if l1 != l0 else v1
        elif history:
            guess = history[-1][1]
        else:
            guess = re[len(re) // 2]
        k = int(np.argmin(np.abs(re - guess)))
        history.append((lam, re[k]))
        pair = np.delete(re, k)[:2]
        out[i] = 0.5 * (pair[0] - pair[-1])
    return out
