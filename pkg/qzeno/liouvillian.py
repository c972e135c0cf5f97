"""
Matrix generators of the realistic monitored-qubit model and their spectra.

Bases:
  postselected L̃_P : (p_s, x, z)          p_s = no-click probability
  ensemble     L_B : (p_b, p_s, x, z)     p_b = detector (Bright) population
  lindblad         : (p, x, z)            instant-reset detector limit

The Bloch components of a pure state at polar angle θ are x = −sin θ, z = cos θ,
so the excited population is P₁ = (p_s + z)/2.

The transition finders scan λ on a coarse grid, then refine the first sign
change of the relevant spectral criterion to 1e-6 in λ.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import expm, null_space
from scipy.optimize import bisect, brentq

from .errors import DomainError, NotFoundError, NumericalError
from .params import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_BRACKET = (0.5, 3.0)
SCAN_POINTS = 200
LAMBDA_TOL = 1e-6
# |Im e| below this fraction of Ω_S counts as real
REAL_SNAP = 1e-9


class BlochVector3(NamedTuple):
    p_s: float
    x: float
    z: float


class BlochVector4(NamedTuple):
    p_b: float
    p_s: float
    x: float
    z: float


GROUND4 = BlochVector4(0.0, 1.0, 0.0, -1.0)


@dataclass(frozen=True)
class SortedSpectrum:
    """
    Ordering: Re e1 <= Re e2 <= e3. When a conjugate pair exists it is (e1, e2)
    with Im e1 <= 0 and e3 is the remaining real eigenvalue. e0 is the steady
    state eigenvalue of the 4x4 ensemble generator (None otherwise).
    """
    e1: complex
    e2: complex
    e3: complex
    e0: Optional[complex] = None

    @property
    def values(self):
        return (self.e1, self.e2, self.e3)

    @property
    def has_pair(self):
        return self.e1.imag != 0.0


# ---------------- generators ----------------
def build_postselected(params: ModelParams):
    a, ae, k = params.alpha, params.alpha_eff, params.kappa_fp
    g1, g2, gu, om = params.gamma1, params.gamma2, params.gamma_up, params.omega_s
    return np.array([
        [-ae / 2 - k, 0.0, ae / 2],
        [0.0, -g2 - a / 2 - k - gu / 2, om],
        [ae / 2 - g1 + gu, -om, -ae / 2 - g1 - k - gu],
    ])


def build_ensemble(params: ModelParams):
    if params.tau_b <= 0:
        raise DomainError(f"tau_b must be > 0, got {params.tau_b}")
    r = 1.0 / params.tau_b
    a = params.alpha
    g1, g2, gu, om = params.gamma1, params.gamma2, params.gamma_up, params.omega_s
    return np.array([
        [-r, a / 2, 0.0, -a / 2],
        [r, -a / 2, 0.0, a / 2],
        [0.0, 0.0, -g2 - a / 2 - gu / 2, om],
        [-r, a / 2 - g1 + gu, -om, -a / 2 - g1 - gu],
    ])


def build_lindblad(params: ModelParams):
    """Ensemble generator with an instantly resetting detector (τ_B → 0)."""
    a = params.alpha
    g1, g2, gu, om = params.gamma1, params.gamma2, params.gamma_up, params.omega_s
    return np.array([
        [0.0, 0.0, 0.0],
        [0.0, -g2 - a / 2 - gu / 2, om],
        [-g1 + gu, -om, -g1 - gu],
    ])


# ---------------- spectra ----------------
def _eigvals(matrix):
    try:
        vals = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"eigen-solve did not converge: {e}", matrix) from e
    if not np.all(np.isfinite(vals)):
        raise NumericalError("eigen-solve returned non-finite values", matrix)
    return vals


def sort_eigenvalues(vals, scale):
    """Three eigenvalues -> SortedSpectrum; scale sets the real-snapping threshold."""
    vals = np.asarray(vals, dtype=complex)
    tol = REAL_SNAP * scale
    cplx = [v for v in vals if abs(v.imag) >= tol]
    real = sorted(v.real for v in vals if abs(v.imag) < tol)
    if len(cplx) == 2:
        re = 0.5 * (cplx[0].real + cplx[1].real)
        im = 0.5 * (abs(cplx[0].imag) + abs(cplx[1].imag))
        return SortedSpectrum(complex(re, -im), complex(re, im), complex(real[0]))
    if len(real) != 3:
        raise NumericalError(f"cannot pair eigenvalues {vals}")
    return SortedSpectrum(complex(real[0]), complex(real[1]), complex(real[2]))


def trace_complement():
    """Orthonormal basis of the complement of the trace direction (1, 1, 0, 0)."""
    return np.array([
        [1 / math.sqrt(2), 0.0, 0.0],
        [-1 / math.sqrt(2), 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])


def deflate(matrix):
    """Restrict the 4x4 generator to its trace-free invariant subspace."""
    q = trace_complement()
    return q.T @ matrix @ q


def spectrum(matrix, scale=None, deflate_zero=False):
    """
    Sorted eigenvalues of a 3x3 or 4x4 generator. For 4x4 the eigenvalue
    closest to zero is reported as e0; with deflate_zero the remaining three
    come from the trace-free restriction instead of the full solve.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or n not in (3, 4):
        raise DomainError(f"expected a 3x3 or 4x4 matrix, got shape {matrix.shape}")
    if scale is None:
        scale = max(np.abs(matrix).max(), 1e-300)
    if n == 3:
        return sort_eigenvalues(_eigvals(matrix), scale)
    vals = _eigvals(matrix)
    i0 = int(np.argmin(np.abs(vals)))
    rest = _eigvals(deflate(matrix)) if deflate_zero else np.delete(vals, i0)
    s = sort_eigenvalues(rest, scale)
    return SortedSpectrum(s.e1, s.e2, s.e3, complex(vals[i0]))


def discriminant(matrix3):
    """Discriminant of the characteristic cubic; < 0 iff a complex pair exists."""
    m = np.asarray(matrix3, dtype=float)
    a = -np.trace(m)
    b = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
         + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
         + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    c = -np.linalg.det(m)
    return 18 * a * b * c - 4 * a ** 3 * c + a * a * b * b - 4 * b ** 3 - 27 * c * c


def xi_from_spectrum(spec: SortedSpectrum):
    """Critical exponent (2e3 − Re e2)/(Re e2 − e3)."""
    e2, e3 = spec.e2.real, spec.e3.real
    den = e2 - e3
    if abs(den) <= 1e-14 * max(abs(e2), abs(e3), 1e-300):
        raise NumericalError(f"singular configuration: Re(e2) = e3 = {e3}")
    return (2 * e3 - e2) / den


# ---------------- transition finders ----------------
def _first_crossing(fn, bracket, n_scan, name):
    lo, hi = bracket
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([fn(x) for x in grid])
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    for i in flips:
        if vals[i] == 0.0:
            return float(grid[i])
        return float(grid[i]), float(grid[i + 1])
    raise NotFoundError(f"{name}: no sign change in lambda bracket [{lo}, {hi}]")


def _refine(fn, bracket, n_scan, name, solver=bisect):
    hit = _first_crossing(fn, bracket, n_scan, name)
    if isinstance(hit, float):
        return hit
    return float(solver(fn, hit[0], hit[1], xtol=LAMBDA_TOL))


def find_lambda_c1(params: ModelParams, bracket=DEFAULT_BRACKET, n_scan=SCAN_POINTS):
    """Oscillation cessation: the postselected pair turns real."""
    om = params.omega_s
    return _refine(lambda lam: discriminant(build_postselected(params.with_lambda(lam)) / om),
                   bracket, n_scan, "lambda_c1")


def find_lambda_c2(params: ModelParams, bracket=DEFAULT_BRACKET, n_scan=SCAN_POINTS):
    """State freezing: Re e2 = 2 e3, i.e. the critical exponent vanishes."""
    om = params.omega_s

    def g(lam):
        s = spectrum(build_postselected(params.with_lambda(lam)) / om, scale=1.0)
        return s.e2.real - 2 * s.e3.real

    return _refine(g, bracket, n_scan, "lambda_c2", solver=brentq)


def find_lambda_c3(params: ModelParams, bracket=DEFAULT_BRACKET, n_scan=SCAN_POINTS):
    """Zeno onset: the ensemble pair turns real once the steady state is deflated."""
    om = params.omega_s
    return _refine(lambda lam: discriminant(deflate(build_ensemble(params.with_lambda(lam)) / om)),
                   bracket, n_scan, "lambda_c3")


def find_transitions(params: ModelParams, bracket=DEFAULT_BRACKET):
    return (find_lambda_c1(params, bracket), find_lambda_c2(params, bracket),
            find_lambda_c3(params, bracket))


# ---------------- ensemble evolution ----------------
def steady_state(params: ModelParams):
    ns = null_space(build_ensemble(params))
    if ns.shape[1] != 1:
        raise NumericalError(f"expected a single steady state, found {ns.shape[1]}", build_ensemble(params))
    v = ns[:, 0]
    return BlochVector4(*(v / (v[0] + v[1])))


def integrate_master(params: ModelParams, initial=GROUND4, duration=10e-6, spacing=None):
    """
    Propagate v' = L_B v with the exact one-step propagator expm(L_B·spacing).

    Returns (times, states) with states of shape (n + 1, 4), n = round(duration/spacing).
    """
    spacing = params.t_int if spacing is None else spacing
    if spacing <= 0 or duration < 0:
        raise DomainError("spacing must be > 0 and duration >= 0")
    n = int(round(duration / spacing))
    prop = expm(build_ensemble(params) * spacing)
    states = np.empty((n + 1, 4))
    states[0] = np.asarray(initial, dtype=float)
    for i in range(n):
        states[i + 1] = prop @ states[i]
    return np.arange(n + 1) * spacing, states


def excited_population(states):
    """P₁ = (p_s + z)/2 from 4-component ensemble states."""
    states = np.asarray(states)
    return 0.5 * (states[..., 1] + states[..., 3])


# ---------------- parameter sweeps ----------------
SCAN_PARAMS = ("gamma_phi", "gamma1", "kappa_fp", "p_fn", "kappa")


def vary(params: ModelParams, name, value):
    """Apply a scan value; rates are given in units of Ω_S, kappa is Ω_S·τ_B."""
    om = params.omega_s
    if name in ("gamma_phi", "gamma1", "kappa_fp"):
        return params.replace(**{name: value * om})
    if name == "p_fn":
        return params.replace(p_fn=value)
    if name == "kappa":
        return params.replace(tau_b=value / om)
    raise DomainError(f"unknown scan parameter {name!r}; expected one of {SCAN_PARAMS}")


def _scan_point(args):
    params, name, value, bracket = args
    p = vary(params, name, value)
    row = {"param_name": name, "param_value": value}
    for key, finder in (("lambda_c1", find_lambda_c1), ("lambda_c2", find_lambda_c2),
                        ("lambda_c3", find_lambda_c3)):
        try:
            row[key] = finder(p, bracket)
        except NotFoundError as e:
            logger.warning(f"[warn] {name}={value}: {e}")
            row[key] = float("nan")
    return row


def lambda_scan(params: ModelParams, varying, grid, bracket=DEFAULT_BRACKET, workers=1):
    """Transition locations versus one decoherence/detector parameter, ordered as grid."""
    if varying not in SCAN_PARAMS:
        raise DomainError(f"unknown scan parameter {varying!r}; expected one of {SCAN_PARAMS}")
    jobs = [(params, varying, float(v), bracket) for v in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_scan_point, jobs))
    return [_scan_point(j) for j in jobs]
