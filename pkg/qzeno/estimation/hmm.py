"""
Baum-Welch calibration of click records on the constrained three-state chain.

States: 0 = |0⟩ (clicks at α), 1 = |B⟩ (detector bright), 2 = |1⟩ (dark).
Allowed transitions 0↔B and 0↔1 only; |0⟩ and |1⟩ share the false-positive
emission p_FP, |B⟩ emits a click with probability 1 − p_FN.

Each pair of rates maps to per-window probabilities through
    p_up = (γ_up/Γ)(1 − e^{−Γ dt}),  p_down = (γ_down/Γ)(1 − e^{−Γ dt}),  Γ = γ_up + γ_down.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numba as nb
import numpy as np
from scipy.ndimage import median_filter
from scipy.optimize import curve_fit

from ..errors import DomainError, HmmFaultError, RecordParseError

logger = logging.getLogger(__name__)

N_STATES = 3
LL_TOL = 1e-8


@dataclass
class HmmParams:
    gamma_b_up: float     # α
    gamma_b_down: float   # 1/τ_B
    gamma_1_up: float
    gamma_1_down: float
    p_fp: float
    p_fn: float
    dt: float

    def __post_init__(self):
        for name in ("gamma_b_up", "gamma_b_down", "gamma_1_up", "gamma_1_down"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0")
        for name in ("p_fp", "p_fn"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in [0, 1)")
        if not self.dt > 0:
            raise DomainError("dt must be > 0")

    @property
    def alpha(self):
        return self.gamma_b_up

    @property
    def tau_b(self):
        return 1.0 / self.gamma_b_down if self.gamma_b_down > 0 else math.inf

    def transition_matrix(self):
        pu_b, pd_b = _pair_probabilities(self.gamma_b_up, self.gamma_b_down, self.dt)
        pu_1, pd_1 = _pair_probabilities(self.gamma_1_up, self.gamma_1_down, self.dt)
        return np.array([[1.0 - pu_b - pu_1, pu_b, pu_1],
                         [pd_b, 1.0 - pd_b, 0.0],
                         [pd_1, 0.0, 1.0 - pd_1]])

    def emission_matrix(self):
        # columns: no_click, click
        return np.array([[1.0 - self.p_fp, self.p_fp],
                         [self.p_fn, 1.0 - self.p_fn],
                         [1.0 - self.p_fp, self.p_fp]])

    def to_dict(self):
        return asdict(self)


def _pair_probabilities(up, down, dt):
    total = up + down
    if total == 0:
        return 0.0, 0.0
    f = -math.expm1(-total * dt)
    return up / total * f, down / total * f


def _pair_rates(p_up, p_down, dt):
    s = p_up + p_down
    if s <= 0:
        return 0.0, 0.0
    if s >= 1:
        raise DomainError(f"transition probabilities {p_up}+{p_down} >= 1 cannot be mapped to rates")
    total = -math.log1p(-s) / dt
    return p_up * total / s, p_down * total / s


def params_from_probabilities(trans, emit, dt):
    b_up, b_down = _pair_rates(trans[0, 1], trans[1, 0], dt)
    one_up, one_down = _pair_rates(trans[0, 2], trans[2, 0], dt)
    return HmmParams(b_up, b_down, one_up, one_down, float(emit[0, 1]), float(emit[1, 0]), dt)


@nb.njit(cache=True)
def _forward_backward(obs, trans, emit, pi):  # pragma: no cover
    n = obs.shape[0]
    k = trans.shape[0]
    alpha = np.empty((n, k))
    scale = np.empty(n)
    for j in range(k):
        alpha[0, j] = pi[j] * emit[j, obs[0]]
    scale[0] = alpha[0].sum()
    alpha[0] /= scale[0]
    for t in range(1, n):
        for j in range(k):
            acc = 0.0
            for i in range(k):
                acc += alpha[t - 1, i] * trans[i, j]
            alpha[t, j] = acc * emit[j, obs[t]]
        scale[t] = alpha[t].sum()
        alpha[t] /= scale[t]

    beta = np.ones(k)
    occ = np.zeros(k)
    occ_click = np.zeros(k)
    xi = np.zeros((k, k))
    first = np.zeros(k)
    for t in range(n - 1, -1, -1):
        g = alpha[t] * beta
        g /= g.sum()
        for j in range(k):
            occ[j] += g[j]
            if obs[t] == 1:
                occ_click[j] += g[j]
        if t == 0:
            first[:] = g
            break
        nb_ = np.empty(k)
        for i in range(k):
            acc = 0.0
            for j in range(k):
                w = trans[i, j] * emit[j, obs[t]] * beta[j]
                xi[i, j] += alpha[t - 1, i] * w / scale[t]
                acc += w
            nb_[i] = acc / scale[t]
        beta = nb_
    loglik = np.log(scale).sum()
    return loglik, first, occ, occ_click, xi


@dataclass
class BaumWelchResult:
    params: HmmParams
    loglik: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0


def _as_obs(record):
    outcomes = getattr(record, "outcomes", record)
    return np.ascontiguousarray(np.asarray(outcomes, dtype=np.int64))


def hmm_baum_welch(record, init: HmmParams, max_iter=500, tol=1e-7, pi=None):
    """
    EM on the constrained chain. Raises HmmFaultError if the log-likelihood
    drops by more than LL_TOL·|LL|; returns converged=False at max_iter.
    """
    obs = _as_obs(record)
    if obs.size == 0:
        raise DomainError("empty click record")
    if obs.size < 10_000:
        logger.warning(f"[warn] record of {obs.size} windows; >= 1e4 recommended for calibration")
    dt = init.dt
    trans = init.transition_matrix()
    emit = init.emission_matrix()
    start = np.array([1.0, 0.0, 0.0]) if pi is None else np.asarray(pi, dtype=float)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ll, first, occ, occ_click, xi = _forward_backward(obs, trans, emit, start)
        if trace and ll < trace[-1] - LL_TOL * max(abs(trace[-1]), 1.0):
            raise HmmFaultError(f"log-likelihood decreased at iteration {it}: {trace[-1]:.10g} -> {ll:.10g}")
        trace.append(float(ll))

        row0 = xi[0].sum()
        trans = np.zeros((N_STATES, N_STATES))
        if row0 > 0:
            trans[0, 1] = xi[0, 1] / row0
            trans[0, 2] = xi[0, 2] / row0
        rowb = xi[1, 0] + xi[1, 1]
        trans[1, 0] = xi[1, 0] / rowb if rowb > 0 else 0.0
        row1 = xi[2, 0] + xi[2, 2]
        trans[2, 0] = xi[2, 0] / row1 if row1 > 0 else 0.0
        trans[0, 0] = 1.0 - trans[0, 1] - trans[0, 2]
        trans[1, 1] = 1.0 - trans[1, 0]
        trans[2, 2] = 1.0 - trans[2, 0]

        dark = occ[0] + occ[2]
        p_fp = (occ_click[0] + occ_click[2]) / dark if dark > 0 else 0.0
        p_fn = (occ[1] - occ_click[1]) / occ[1] if occ[1] > 0 else 0.0
        emit = np.array([[1 - p_fp, p_fp], [p_fn, 1 - p_fn], [1 - p_fp, p_fp]])
        start = first

        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * max(abs(trace[-1]), 1.0):
            converged = True
            break
    if not converged:
        logger.warning(f"[warn] Baum-Welch stopped at max_iter={max_iter} without convergence")
    p_fp = min(float(emit[0, 1]), 1.0 - 1e-12)
    p_fn = min(float(emit[1, 0]), 1.0 - 1e-12)
    fitted = params_from_probabilities(trans, np.array([[1 - p_fp, p_fp], [p_fn, 1 - p_fn]]), dt)
    logger.info(f"[hmm] alpha={fitted.alpha:.4g}/s tau_B={fitted.tau_b:.4g}s p_fp={fitted.p_fp:.3g} "
                f"p_fn={fitted.p_fn:.3g} ({it} iterations)")
    return BaumWelchResult(fitted, trace, converged, it)


def sample_hmm_record(params: HmmParams, n_windows, seed=0):
    """Draw a ClickRecord-compatible outcome array from the chain."""
    rng = np.random.default_rng(seed)
    cum = np.cumsum(params.transition_matrix(), axis=1).tolist()
    emit = params.emission_matrix()
    states = np.empty(n_windows, dtype=np.int64)
    s = 0
    for t, u in enumerate(rng.random(n_windows).tolist()):
        states[t] = s
        row = cum[s]
        s = 0 if u < row[0] else 1 if u < row[1] else 2
    return rng.random(n_windows) < emit[states, 1]


def _run_lengths(obs, value):
    padded = np.concatenate([[1 - value], obs, [1 - value]])
    d = np.diff((padded == value).astype(np.int64))
    starts = np.nonzero(d == 1)[0]
    stops = np.nonzero(d == -1)[0]
    return stops - starts


def _exp_rate(lengths, dt):
    if len(lengths) == 0:
        return 0.0
    counts = np.bincount(lengths)[1:]
    k = np.arange(1, len(counts) + 1)
    sel = counts > 0
    if sel.sum() >= 3:
        try:
            (rate, amp), _ = curve_fit(lambda x, r, a: a * np.exp(-r * x * dt), k[sel], counts[sel],
                                       p0=[1.0 / (lengths.mean() * dt), counts[sel][0]], maxfev=2000)
            if rate > 0:
                return float(rate)
        except RuntimeError:
            pass
    return 1.0 / (lengths.mean() * dt)


def initial_hmm_guess(record, dt):
    """
    Starting point from exponential fits of the click / no-click run lengths.
    Isolated flips are removed with a 3-window median filter first; the
    windows it changed give the starting error probabilities.
    """
    obs = _as_obs(record)
    if obs.size == 0:
        raise DomainError("empty click record")
    smooth = median_filter(obs, size=3, mode="nearest")
    down = _exp_rate(_run_lengths(smooth, 1), dt)
    up = _exp_rate(_run_lengths(smooth, 0), dt)
    up = up if up > 0 else 1.0 / (obs.size * dt)
    down = down if down > 0 else 1.0 / dt
    dark, bright = smooth == 0, smooth == 1
    p_fp = float(obs[dark].mean()) if dark.any() else 0.0
    p_fn = float(1 - obs[bright].mean()) if bright.any() else 0.0
    return HmmParams(up, down, 0.01 * up, 0.01 * up, min(max(p_fp, 1e-3), 0.2), min(max(p_fn, 1e-3), 0.2), dt)


@dataclass
class CalibrationRow:
    label: float
    alpha: float
    tau_b: float
    p_fp: float
    p_fn: float
    n_windows: int
    converged: bool


@dataclass
class Calibration:
    rows: list
    quad_coeff: float        # α ≈ c·label²
    quad_residual: float     # relative rms of the quadratic fit


def empirical_click_calibration(record_sets, dt, max_iter=500, tol=1e-7):
    """
    record_sets : mapping label -> outcome array (label is a detector-drive tag)
    Runs Baum-Welch per label and fits α = c·label².
    """
    if not record_sets:
        raise RecordParseError("no records to calibrate")
    rows = []
    for label, outcomes in record_sets.items():
        obs = _as_obs(outcomes)
        res = hmm_baum_welch(obs, initial_hmm_guess(obs, dt), max_iter=max_iter, tol=tol)
        p = res.params
        rows.append(CalibrationRow(float(label), p.alpha, p.tau_b, p.p_fp, p.p_fn, int(obs.size), res.converged))
    x = np.array([r.label for r in rows]) ** 2
    y = np.array([r.alpha for r in rows])
    c = float(np.dot(x, y) / np.dot(x, x)) if np.dot(x, x) > 0 else float("nan")
    rel = float(np.sqrt(np.mean((y - c * x) ** 2)) / np.mean(np.abs(y))) if np.any(y) else float("nan")
    logger.info(f"[hmm] calibration: alpha = {c:.4g} * label^2 (rel rms {rel:.2%})")
    return Calibration(rows, c, rel)
