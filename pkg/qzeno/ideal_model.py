"""
Closed forms of the ideal (decoherence-free) monitored qubit.

Conventions:
  θ = π  <-> |0⟩, the state that clicks at the full rate α
  θ = 0  <-> |1⟩, dark
  λ = α/(2Ω_S); no-click motion dθ/dt = −Ω_S(1 + λ sin θ)

Every function accepts scalars or numpy arrays for t / θ and returns the same
shape (a float for scalar input).
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError
from .liouvillian import SortedSpectrum

# below this |1 - λ²| the λ = 1 series limit replaces the closed forms
SERIES_EPS = 1e-6


@dataclass(frozen=True)
class FixedPoints:
    theta_plus: float   # stable
    theta_minus: float  # unstable


def _check_lambda(lam):
    if not np.isfinite(lam) or lam < 0:
        raise DomainError(f"lambda must be finite and >= 0, got {lam}")


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("t must be finite and >= 0")
    return t


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def fold_angle(theta):
    """Map angles onto (−π, π]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2 * np.pi)


def drift(theta, lam, omega_s):
    return -omega_s * (1.0 + lam * np.sin(theta))


def fixed_points(lam):
    _check_lambda(lam)
    if lam < 1:
        return None
    q = math.sqrt((lam - 1.0) * (lam + 1.0))
    return FixedPoints(2.0 * math.atan(-lam + q), 2.0 * math.atan(-lam - q))


def _theta_from_pi(t, lam, omega_s):
    # tan(θ/2) = C/S − λ written with arctan2 so the cot() poles never appear;
    # k counts completed half periods of the oscillatory branch
    x = 0.5 * omega_s * t
    eps = 1.0 - lam * lam
    k = np.zeros_like(x)
    if eps > 0:
        s = math.sqrt(eps)
        phi = s * x
        k = np.floor(phi / np.pi)
        phi = phi - k * np.pi
        c, sn = np.cos(phi), np.sin(phi) / s
    elif eps < 0:
        q = math.sqrt(-eps)
        c, sn = np.ones_like(x), np.tanh(q * x) / q
    else:
        c, sn = np.ones_like(x), x
    psi = np.arctan2(c - lam * sn, sn) - k * np.pi
    return fold_angle(2.0 * psi)


def noclick_theta(t, lam, omega_s, theta0=np.pi):
    """Polar angle under no-click evolution, folded to (−π, π]."""
    _check_lambda(lam)
    tt = _check_time(t)
    if abs(abs(float(fold_angle(theta0))) - np.pi) < 1e-15:
        return _out(_theta_from_pi(tt, lam, omega_s), t)

    flat = np.atleast_1d(tt).ravel()
    order = np.argsort(flat)
    t_eval = flat[order]
    if t_eval[-1] == 0.0:
        res = np.full_like(flat, float(theta0))
    else:
        sol = solve_ivp(lambda _t, y: drift(y, lam, omega_s), (0.0, t_eval[-1]), [float(theta0)],
                        t_eval=t_eval, method="DOP853", rtol=1e-10, atol=1e-12)
        if not sol.success:
            raise DomainError(f"theta(t) integration failed: {sol.message}")
        res = np.empty_like(flat)
        res[order] = sol.y[0]
    return _out(fold_angle(res).reshape(np.shape(tt)), t)


def click_rate(theta, alpha):
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    return alpha * np.sin(np.asarray(theta, dtype=float) / 2.0) ** 2


def noclick_survival(t, lam, omega_s):
    """P⁰(t): probability of no click up to t, starting in |0⟩."""
    _check_lambda(lam)
    tt = _check_time(t)
    y = omega_s * tt
    if lam == 0:
        return _out(np.ones_like(y), t)
    eps = 1.0 - lam * lam
    if abs(eps) < SERIES_EPS:
        b = 1 - lam * y + y ** 2 / 2 + eps * (-y ** 2 / 2 - y ** 4 / 24 + lam * y ** 3 / 6)
        p0 = np.exp(-lam * y) * b
    elif eps > 0:
        s = math.sqrt(eps)
        phi = s * y
        p0 = np.exp(-lam * y) * (-1 + lam ** 2 * np.cos(phi) + lam * s * np.sin(phi)) / (lam ** 2 - 1)
    else:
        q = math.sqrt(-eps)
        p0 = (lam * (lam - q) * np.exp(-(lam - q) * y) + lam * (lam + q) * np.exp(-(lam + q) * y)
              - 2 * np.exp(-lam * y)) / (2 * q * q)
    return _out(np.clip(p0, 0.0, 1.0), t)


def first_click_density(t, lam, omega_s):
    """−dP⁰/dt in 1/s."""
    _check_lambda(lam)
    tt = _check_time(t)
    y = omega_s * tt
    if lam == 0:
        return _out(np.zeros_like(y), t)
    eps = 1.0 - lam * lam
    if abs(eps) < SERIES_EPS:
        b = 1 - lam * y + y ** 2 / 2 + eps * (-y ** 2 / 2 - y ** 4 / 24 + lam * y ** 3 / 6)
        db = -lam + y + eps * (-y - y ** 3 / 6 + lam * y ** 2 / 2)
        dens = omega_s * np.exp(-lam * y) * (lam * b - db)
    elif eps > 0:
        s = math.sqrt(eps)
        phi = s * y
        dens = (omega_s * lam * np.exp(-lam * y)
                * (-1 + (2 * lam ** 2 - 1) * np.cos(phi) + 2 * lam * s * np.sin(phi)) / (lam ** 2 - 1))
    else:
        q = math.sqrt(-eps)
        dens = omega_s * (lam * (lam - q) ** 2 * np.exp(-(lam - q) * y)
                          + lam * (lam + q) ** 2 * np.exp(-(lam + q) * y)
                          - 2 * lam * np.exp(-lam * y)) / (2 * q * q)
    return _out(np.maximum(dens, 0.0), t)


def _angular_parts(theta, lam, theta0):
    """R^{λ/q}·norm, 1 + λ sin θ and the support mask on (θ₊, θ₀]."""
    if not np.isfinite(lam) or lam <= 1:
        raise DomainError(f"closed-form angular densities need lambda > 1, got {lam}")
    upper = float(fold_angle(theta0))
    if abs(upper) > 1e-15 and abs(abs(upper) - np.pi) > 1e-15:
        raise DomainError("angular densities are defined for theta0 = pi or theta0 = 0")
    upper = abs(upper)
    q = math.sqrt((lam - 1.0) * (lam + 1.0))
    tp = fixed_points(lam).theta_plus
    t_plus = math.tan(tp / 2.0)
    t_minus = 1.0 / t_plus
    th = np.asarray(theta, dtype=float)
    inside = (th > tp) & (th <= upper)
    sh, ch = np.sin(th / 2.0), np.cos(th / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(inside, (sh - t_plus * ch) / (sh - t_minus * ch), 1.0)
        weight = np.where(inside, ratio ** (lam / q), 0.0)
    if upper == 0.0:
        weight = weight * abs(t_plus) ** (-2.0 * lam / q)
    denom = np.where(inside, 1.0 + lam * np.sin(th), 1.0)
    return weight, denom, inside


def angular_first_click_density(theta, lam, theta0=np.pi):
    """ρ(θ) in 1/rad: density of the angle at which the first click happens, r·τ_θ."""
    # Ω_S cancels between r = α sin²(θ/2) and τ_θ ∝ 1/Ω_S
    tau = dwell_density(theta, lam, 1.0, theta0)
    return _out(click_rate(theta, 2.0 * lam) * np.asarray(tau, dtype=float), theta)


def dwell_density(theta, lam, omega_s, theta0=np.pi):
    """τ_θ(θ) in s/rad: mean no-click time spent per unit angle, ρ/r."""
    weight, denom, inside = _angular_parts(theta, lam, theta0)
    tau = np.where(inside, weight / (omega_s * denom ** 2), 0.0)
    return _out(tau, theta)


def steady_state_density(theta, lam):
    """P∞(θ): long-time angular distribution of the relax-and-jump cycle."""
    weight, denom, inside = _angular_parts(theta, lam, np.pi)
    return _out(np.where(inside, lam * weight / denom ** 2, 0.0), theta)


def critical_exponent(lam):
    """ξ = λ/√(λ²−1) − 2, exponent of τ_θ near θ₊."""
    if np.isnan(lam) or lam <= 1:
        raise DomainError(f"critical exponent needs lambda > 1, got {lam}")
    if np.isinf(lam):
        return -1.0
    return lam / math.sqrt((lam - 1.0) * (lam + 1.0)) - 2.0


def ideal_transitions():
    return 1.0, 2.0 / math.sqrt(3.0), 2.0


def ideal_spectrum(lam, omega_s):
    """Eigenvalues of the ideal postselected generator in the sorted convention."""
    _check_lambda(lam)
    if lam < 1:
        w = math.sqrt(1.0 - lam * lam)
        return SortedSpectrum(complex(-omega_s * lam, -omega_s * w),
                              complex(-omega_s * lam, omega_s * w),
                              complex(-omega_s * lam, 0.0))
    q = math.sqrt((lam - 1.0) * (lam + 1.0))
    return SortedSpectrum(complex(-omega_s * (lam + q)), complex(-omega_s * lam), complex(-omega_s * (lam - q)))
