"""
Windowed Monte Carlo trajectories of the driven qubit with a click detector.

A trajectory is either a pure XZ-plane qubit state (polar angle θ, carried as
the half-angle pair (sin θ/2, cos θ/2)) or the detector's Bright state. Each
dt_sim step applies the no-click drift, then at most one collapse:
measurement -> Bright, dephasing θ -> −θ, relaxation -> θ = π, thermal
excitation -> θ = 0; Bright returns to θ = π with probability dt_sim/τ_B.

Every T_int window is classified from the time spent in Bright (click when
T_B >= T_int/2) and then flipped with p_FN / p_FP.

Trajectories are simulated in blocks of BLOCK; block b draws from
Philox(SeedSequence([seed, b])) and always consumes BLOCK uniforms per draw,
so a trajectory's history depends only on (seed, trajectory_id, params).
Snapshot averages and histograms are reduced inside each block and merged
by addition.
"""
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.linalg import expm
from scipy.stats import chi2

from .errors import ConfigError, DomainError, MappingError, StorageError
from .ideal_model import fold_angle
from .io import write_npz
from .params import ModelParams

logger = logging.getLogger(__name__)

BLOCK = 4096
EVENTS = ("dephasing", "relaxation", "thermal", "missed_excursion", "flipped_outcome")
DEFAULT_BINS = 80
# per-trajectory outcomes/snapshots are kept below this many cells
KEEP_RECORDS_LIMIT = 20_000_000


@dataclass(frozen=True)
class QubitAngle:
    theta: float


@dataclass(frozen=True)
class Bright:
    pass


BRIGHT = Bright()
TrajectoryState = Union[QubitAngle, Bright]


@dataclass
class ClickRecord:
    outcomes: np.ndarray  # bool, True = click
    window: float
    seed: int
    trajectory_id: int = 0

    def __len__(self):
        return len(self.outcomes)


@dataclass
class DwellAccumulator:
    """Per-bin sums over trajectories of steps spent before the first true click."""
    bins: int
    n: int = 0
    base_sum: np.ndarray = None
    base_sumsq: np.ndarray = None
    shift_sum: np.ndarray = None
    shift_sumsq: np.ndarray = None

    def __post_init__(self):
        for name in ("base_sum", "base_sumsq", "shift_sum", "shift_sumsq"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.bins))

    def add(self, other):
        self.n += other.n
        self.base_sum += other.base_sum
        self.base_sumsq += other.base_sumsq
        self.shift_sum += other.shift_sum
        self.shift_sumsq += other.shift_sumsq


_SNAP_KEYS = ("ens_sum", "ens_sumsq", "cond_n", "cond_sum", "cond_sumsq", "cond_q", "cond_sin", "cond_cos")


@dataclass
class TrajectoryStore:
    params: ModelParams
    init_theta: Optional[float]  # None = started in Bright
    n_windows: int
    seed: int
    n_traj: int = 0
    snap: dict = field(default_factory=dict)
    run_first: np.ndarray = None
    run_later: np.ndarray = None
    first_click_window: np.ndarray = None
    first_true_click_step: np.ndarray = None
    first_event: np.ndarray = None
    dwell: Optional[DwellAccumulator] = None
    outcomes: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    bright: Optional[np.ndarray] = None  # detector Bright at each snapshot

    @property
    def snapshot_times(self):
        return np.arange(self.n_windows + 1) * self.params.t_int

    @property
    def duration(self):
        return self.n_windows * self.params.t_int

    def record(self, trajectory_id):
        if self.outcomes is None:
            raise DomainError("store was built without per-trajectory records")
        return ClickRecord(self.outcomes[trajectory_id].copy(), self.params.t_int, self.seed, trajectory_id)

    def save(self, path):
        arrays = {f"snap_{k}": v for k, v in self.snap.items()}
        for name in ("run_first", "run_later", "first_click_window", "first_true_click_step",
                     "first_event", "outcomes", "theta", "bright"):
            v = getattr(self, name)
            if v is not None:
                arrays[name] = v
        if self.dwell is not None:
            for name in ("base_sum", "base_sumsq", "shift_sum", "shift_sumsq"):
                arrays[f"dwell_{name}"] = getattr(self.dwell, name)
        meta = {"params": self.params.to_dict(), "init_theta": self.init_theta, "n_windows": self.n_windows,
                "seed": self.seed, "n_traj": self.n_traj,
                "dwell": None if self.dwell is None else {"bins": self.dwell.bins, "n": self.dwell.n}}
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
        write_npz(path, arrays)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            store = cls(ModelParams(**meta["params"]), meta["init_theta"], meta["n_windows"], meta["seed"],
                        meta["n_traj"])
            store.snap = {k[5:]: data[k] for k in data.files if k.startswith("snap_")}
            for name in ("run_first", "run_later", "first_click_window", "first_true_click_step",
                         "first_event", "outcomes", "theta", "bright"):
                if name in data.files:
                    setattr(store, name, data[name])
            if meta["dwell"] is not None:
                store.dwell = DwellAccumulator(meta["dwell"]["bins"], meta["dwell"]["n"],
                                               *(data[f"dwell_{n}"] for n in
                                                 ("base_sum", "base_sumsq", "shift_sum", "shift_sumsq")))
        return store


# ---------------- step kernel ----------------
def window_steps(params: ModelParams):
    n = int(round(params.t_int / params.dt_sim))
    if n < 1 or abs(n * params.dt_sim - params.t_int) > 1e-9 * params.t_int:
        raise ConfigError(f"t_int={params.t_int} is not a multiple of dt_sim={params.dt_sim}")
    return n


def check_step_size(params: ModelParams):
    dt = params.dt_sim
    rates = [params.alpha, params.gamma1, params.gamma_phi, params.omega_s]
    if params.tau_b > dt:
        rates.append(1.0 / params.tau_b)
    worst = dt * max(rates)
    if worst > 0.05:
        msg = f"dt_sim * max rate = {worst:.3g} exceeds 0.05; first-order jump probabilities are biased"
        logger.warning(f"[warn] {msg}")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return worst


@lru_cache(maxsize=64)
def _drift_map(params: ModelParams):
    # dθ/dt = −Ω − β sin θ is a Riccati flow in tan(θ/2); on (sin θ/2, cos θ/2) it is linear
    beta = 0.5 * (params.alpha - params.gamma1 + params.gamma_up)
    om = params.omega_s
    return expm(np.array([[-beta / 2, -om / 2], [om / 2, beta / 2]]) * params.dt_sim)


def _return_probability(params):
    return 1.0 if params.tau_b <= params.dt_sim else params.dt_sim / params.tau_b


def _advance(su, sv, bright, u, params):
    m = _drift_map(params)
    nu = m[0, 0] * su + m[0, 1] * sv
    nv = m[1, 0] * su + m[1, 1] * sv
    norm = np.hypot(nu, nv)
    su, sv = nu / norm, nv / norm

    # single uniform partitioned as sequential "first drawn wins" draws
    dt = params.dt_sim
    s2 = su * su
    p_m = np.minimum(params.alpha * s2 * dt, 1.0)
    p_d = min(0.5 * params.gamma_phi * dt, 1.0)
    p_r = np.minimum(params.gamma1 * (1.0 - s2) * dt, 1.0)
    p_t = np.minimum(params.gamma_up * s2 * dt, 1.0)
    t1 = p_m
    rest = 1.0 - p_m
    t2 = t1 + rest * p_d
    rest = rest * (1.0 - p_d)
    t3 = t2 + rest * p_r
    rest = rest * (1.0 - p_r)
    t4 = t3 + rest * p_t

    q = ~bright
    meas = q & (u < t1)
    deph = q & (u >= t1) & (u < t2)
    relax = q & (u >= t2) & (u < t3)
    therm = q & (u >= t3) & (u < t4)
    ret = bright & (u < _return_probability(params))

    su = np.where(deph, -su, su)
    to_ground = relax | ret
    su = np.where(to_ground, 1.0, np.where(therm, 0.0, su))
    sv = np.where(to_ground, 0.0, np.where(therm, 1.0, sv))
    bright = (bright & ~ret) | meas
    return su, sv, bright, (meas, deph, relax, therm)


def _angle(su, sv):
    return fold_angle(2.0 * np.arctan2(su, sv))


def step(state: TrajectoryState, params: ModelParams, rng: np.random.Generator) -> TrajectoryState:
    """Advance a single trajectory by dt_sim."""
    if isinstance(state, Bright):
        su, sv, br = np.ones(1), np.zeros(1), np.ones(1, dtype=bool)
    else:
        su, sv = np.array([math.sin(state.theta / 2)]), np.array([math.cos(state.theta / 2)])
        br = np.zeros(1, dtype=bool)
    su, sv, br, _ = _advance(su, sv, br, rng.random(1), params)
    if br[0]:
        return BRIGHT
    return QubitAngle(float(_angle(su, sv)[0]))


def _classify(bright_steps, n_w, u, p_fp, p_fn):
    raw = 2 * bright_steps >= n_w
    return raw, np.where(raw, u >= p_fn, u < p_fp)


def classify_windows(bright_flags, params: ModelParams, rng: np.random.Generator, seed=0, trajectory_id=0):
    """Per-step Bright flags of one trajectory -> ClickRecord (flips applied last)."""
    n_w = window_steps(params)
    flags = np.asarray(bright_flags, dtype=bool)
    n_windows = len(flags) // n_w
    steps = flags[:n_windows * n_w].reshape(n_windows, n_w).sum(axis=1)
    _, click = _classify(steps, n_w, rng.random(n_windows), params.p_fp, params.p_fn)
    return ClickRecord(click, params.t_int, seed, trajectory_id)


# ---------------- ensemble runs ----------------
def block_rng(seed, block):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _simulate_block(job):
    params, init_theta, n_windows, seed, block, m, keep, bins = job
    n_w = window_steps(params)
    rng = block_rng(seed, block)
    if init_theta is None:
        su, sv, bright = np.ones(m), np.zeros(m), np.ones(m, dtype=bool)
    else:
        su = np.full(m, math.sin(init_theta / 2))
        sv = np.full(m, math.cos(init_theta / 2))
        bright = np.zeros(m, dtype=bool)

    n_snap = n_windows + 1
    snap = {k: np.zeros(n_snap) for k in _SNAP_KEYS}
    alive = np.ones(m, dtype=bool)
    first_click_window = np.full(m, n_windows, dtype=np.int32)
    first_true = np.full(m, -1, dtype=np.int64)
    first_event = np.full((m, len(EVENTS)), n_windows, dtype=np.int32)
    run = np.zeros(m, dtype=np.int64)
    seen_click = np.zeros(m, dtype=bool)
    run_first = np.zeros(n_snap, dtype=np.int64)
    run_later = np.zeros(n_snap, dtype=np.int64)
    outcomes = np.zeros((m, n_windows), dtype=bool) if keep else None
    theta_snap = np.empty((m, n_snap), dtype=np.float32) if keep else None
    bright_snap = np.zeros((m, n_snap), dtype=bool) if keep else None
    rows = np.arange(m)
    half = 2 * bins if bins else 0
    dwell_steps = np.zeros((m, half), dtype=np.int32) if bins else None

    def snapshot(k):
        theta = np.where(bright, np.nan, _angle(su, sv))
        p1 = np.where(bright, 0.0, sv * sv)
        snap["ens_sum"][k] = p1.sum()
        snap["ens_sumsq"][k] = (p1 * p1).sum()
        snap["cond_n"][k] = alive.sum()
        snap["cond_sum"][k] = p1[alive].sum()
        snap["cond_sumsq"][k] = (p1[alive] ** 2).sum()
        aq = alive & ~bright
        snap["cond_q"][k] = aq.sum()
        snap["cond_sin"][k] = np.sin(theta[aq]).sum()
        snap["cond_cos"][k] = np.cos(theta[aq]).sum()
        if keep:
            theta_snap[:, k] = theta
            bright_snap[:, k] = bright

    def mark(events, col, w):
        hit = events & (first_event[:, col] == n_windows)
        first_event[hit, col] = w

    snapshot(0)
    step_idx = 0
    for w in range(n_windows):
        bsteps = np.zeros(m, dtype=np.int64)
        for _ in range(n_w):
            if bins:
                track = ~bright & (first_true < 0)
                if track.any():
                    th = _angle(su[track], sv[track])
                    idx = np.floor((th + np.pi) / (np.pi / bins)).astype(np.int64) % half
                    dwell_steps[rows[track], idx] += 1
            u = rng.random(BLOCK)[:m]
            su, sv, bright, (meas, deph, relax, therm) = _advance(su, sv, bright, u, params)
            first_true[meas & (first_true < 0)] = step_idx
            mark(deph, 0, w)
            mark(relax, 1, w)
            mark(therm, 2, w)
            bsteps += bright
            step_idx += 1

        raw, click = _classify(bsteps, n_w, rng.random(BLOCK)[:m], params.p_fp, params.p_fn)
        mark((bsteps > 0) & ~raw, 3, w)
        mark(raw & ~click, 4, w)

        lengths = run[click]
        was_first = ~seen_click[click]
        np.add.at(run_first, lengths[was_first], 1)
        np.add.at(run_later, lengths[~was_first], 1)
        seen_click |= click
        run = np.where(click, 0, run + 1)
        first_click_window[click & alive] = w
        alive &= ~click
        if keep:
            outcomes[:, w] = click
        snapshot(w + 1)

    dwell = None
    if bins:
        base = dwell_steps[:, 0::2] + dwell_steps[:, 1::2]
        shifted = dwell_steps[:, 1::2] + np.roll(dwell_steps, -1, axis=1)[:, 1::2]
        base, shifted = base.astype(float), shifted.astype(float)
        dwell = DwellAccumulator(bins, m, base.sum(0), (base ** 2).sum(0), shifted.sum(0), (shifted ** 2).sum(0))
    return dict(snap=snap, run_first=run_first, run_later=run_later, first_click_window=first_click_window,
                first_true_click_step=first_true, first_event=first_event, outcomes=outcomes,
                theta=theta_snap, bright=bright_snap, dwell=dwell, m=m)


def _merge(store, part):
    if store.n_traj == 0:
        store.snap = {k: v.copy() for k, v in part["snap"].items()}
        store.run_first = part["run_first"].copy()
        store.run_later = part["run_later"].copy()
        store.dwell = part["dwell"]
        for name in ("first_click_window", "first_true_click_step", "first_event", "outcomes", "theta", "bright"):
            setattr(store, name, part[name])
    else:
        for k, v in part["snap"].items():
            store.snap[k] += v
        store.run_first += part["run_first"]
        store.run_later += part["run_later"]
        if part["dwell"] is not None:
            store.dwell.add(part["dwell"])
        for name in ("first_click_window", "first_true_click_step", "first_event", "outcomes", "theta", "bright"):
            if part[name] is not None:
                setattr(store, name, np.concatenate([getattr(store, name), part[name]]))
    store.n_traj += part["m"]


def run_ensemble(params: ModelParams, init: TrajectoryState = QubitAngle(math.pi), duration=20e-6, n_traj=1000,
                 seed=0, keep_records=None, dwell_bins=None, workers=1, flush_path=None):
    """
    Simulate n_traj independent trajectories for floor(duration/T_int) windows.

    keep_records : keep per-trajectory outcomes and θ snapshots (default: only
                   when n_traj·windows stays below KEEP_RECORDS_LIMIT)
    dwell_bins   : accumulate angular dwell before the first true click on
                   this many bins (base and half-bin-shifted grids)
    flush_path   : where completed blocks are saved if memory runs out
    """
    if n_traj < 1:
        raise DomainError("n_traj must be >= 1")
    window_steps(params)
    check_step_size(params)
    n_windows = int(math.floor(duration / params.t_int + 1e-9))
    if keep_records is None:
        keep_records = n_traj * (n_windows + 1) <= KEEP_RECORDS_LIMIT
    init_theta = None if isinstance(init, Bright) else float(init.theta)
    n_blocks = (n_traj + BLOCK - 1) // BLOCK
    jobs = [(params, init_theta, n_windows, seed, b, min(BLOCK, n_traj - b * BLOCK), keep_records, dwell_bins)
            for b in range(n_blocks)]
    logger.info(f"[sim] lambda={params.lam:.4g} n_traj={n_traj} windows={n_windows} blocks={n_blocks} seed={seed}")

    store = TrajectoryStore(params, init_theta, n_windows, seed)
    try:
        if workers > 1 and n_blocks > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                for part in ex.map(_simulate_block, jobs):
                    _merge(store, part)
        else:
            for job in jobs:
                _merge(store, _simulate_block(job))
    except MemoryError as e:
        if flush_path and store.n_traj:
            store.save(flush_path)
            logger.error(f"[ERR] out of memory after {store.n_traj} trajectories; partial store -> {flush_path}")
        raise StorageError(f"out of memory after {store.n_traj} of {n_traj} trajectories") from e
    return store


def bright_dwell_times(params: ModelParams, n=100_000, seed=0):
    """Durations of single Bright excursions (entry step to return step)."""
    rng = block_rng(seed, 0)
    su, sv, bright = np.ones(n), np.zeros(n), np.ones(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int64)
    while active.any():
        su, sv, bright, _ = _advance(su, sv, bright, rng.random(n), params)
        steps += active
        active &= bright
    return steps * params.dt_sim


def first_click_times(store: TrajectoryStore):
    """Times of the first measurement collapse (true click), for trajectories that had one."""
    s = store.first_true_click_step
    return (s[s >= 0] + 1) * store.params.dt_sim


# ---------------- observables ----------------
@dataclass
class PopulationSeries:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    omitted: np.ndarray  # bool, no surviving trajectory


def _mean_and_error(total, total_sq, n):
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = total / n
        var = np.maximum(total_sq / n - mean ** 2, 0.0)
        return mean, np.sqrt(var / n)


def conditional_population(store: TrajectoryStore):
    """P₁ averaged over trajectories with no registered click before each snapshot."""
    n = store.snap["cond_n"]
    mean, err = _mean_and_error(store.snap["cond_sum"], store.snap["cond_sumsq"], n)
    omitted = n == 0
    if omitted.any():
        logger.warning(f"[warn] conditional population: {int(omitted.sum())} snapshots without survivors omitted")
    mean = np.where(omitted, np.nan, mean)
    err = np.where(omitted, np.nan, err)
    return PopulationSeries(store.snapshot_times, mean, err, n.astype(np.int64), omitted)


def ensemble_population(store: TrajectoryStore):
    """Unconditional P₁ (Bright counts as 0)."""
    n = float(store.n_traj)
    mean, err = _mean_and_error(store.snap["ens_sum"], store.snap["ens_sumsq"], n)
    counts = np.full(len(mean), store.n_traj, dtype=np.int64)
    return PopulationSeries(store.snapshot_times, mean, err, counts, np.zeros(len(mean), dtype=bool))


def conditional_theta(store: TrajectoryStore):
    """Tomography angle atan2(⟨sin θ⟩, ⟨cos θ⟩) of surviving qubit trajectories."""
    with np.errstate(invalid="ignore"):
        theta = np.arctan2(store.snap["cond_sin"], store.snap["cond_cos"])
    return np.where(store.snap["cond_q"] > 0, theta, np.nan)


@dataclass
class NoClickHistogram:
    edges: np.ndarray  # seconds
    counts: np.ndarray
    n_runs: int


def noclick_duration_histogram(store: TrajectoryStore, edges=None, include_first=True):
    """Maximal no-click runs closed by a click, binned by run length × T_int."""
    by_len = store.run_later + (store.run_first if include_first else 0)
    t_int = store.params.t_int
    durations = np.arange(len(by_len)) * t_int
    if edges is None:
        edges = np.arange(len(by_len) + 1) * t_int
        counts = by_len.astype(np.int64)
    else:
        edges = np.asarray(edges, dtype=float)
        counts, _ = np.histogram(durations, bins=edges, weights=by_len)
        counts = counts.astype(np.int64)
    return NoClickHistogram(edges, counts, int(by_len.sum()))


@dataclass
class ChiSquareTest:
    statistic: float
    dof: int
    p_value: float
    n_bins: int


def _pool(observed, expected, min_expected):
    """Merge neighbouring bins left to right until each expects at least min_expected."""
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed.tolist(), expected.tolist()):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    if exp:
        obs[-1] += o_acc
        exp[-1] += e_acc
    return np.array(obs), np.array(exp)


def first_click_chi2(store: TrajectoryStore, survival, min_expected=5.0):
    """
    χ² goodness of fit of the first no-click runs against a survival curve.

    survival : callable t -> P⁰(t); run length k expects N·(P⁰(kT) − P⁰((k+1)T))
               and the trajectories that never click expect N·P⁰(duration).
    """
    if store.init_theta is None or abs(abs(fold_angle(store.init_theta)) - np.pi) > 1e-12:
        logger.warning("[warn] first-click survival curves assume trajectories started at theta = pi")
    n = store.n_traj
    s = np.clip(np.asarray(survival(store.snapshot_times), dtype=float), 0.0, 1.0)
    if s.shape != (store.n_windows + 1,):
        raise DomainError(f"survival returned shape {s.shape}, expected ({store.n_windows + 1},)")
    observed = np.append(store.run_first[:store.n_windows], n - store.run_first.sum()).astype(float)
    expected = n * np.append(np.maximum(-np.diff(s), 0.0), s[-1])
    obs, exp = _pool(observed, expected, min_expected)
    if len(exp) < 2:
        raise DomainError("fewer than two populated bins for a chi-square test")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(exp) - 1
    p_value = float(chi2.sf(stat, dof))
    logger.info(f"[chi2] first clicks: chi2={stat:.1f} dof={dof} p={p_value:.3g}")
    return ChiSquareTest(stat, dof, p_value, len(exp))


# ---------------- dwell histograms ----------------
@dataclass
class DwellHistogram:
    bin_edges: np.ndarray  # radians
    values: np.ndarray     # s/rad
    sigma: np.ndarray
    counts: np.ndarray
    grid_offset: float = 0.0
    estimator: str = "direct"
    fallback: bool = False

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def width(self):
        return self.bin_edges[1] - self.bin_edges[0]


def grid_edges(bins, offset=0.0):
    return -np.pi + offset + np.arange(bins + 1) * (2 * np.pi / bins)


def select_grid(base: DwellHistogram, shifted: DwellHistogram, window=(-np.pi / 2, 0.0)):
    """Keep the grid with the larger single-bin value among bins centred in window."""
    def peak(h):
        c = fold_angle(h.centers)
        sel = (c > window[0]) & (c < window[1])
        return h.values[sel].max() if sel.any() else -np.inf
    return shifted if peak(shifted) > peak(base) else base


def dwell_histogram_direct(store: TrajectoryStore, grid="auto"):
    """Mean time per unit angle before the first true click; grid in {"base", "shifted", "auto"}."""
    acc = store.dwell
    if acc is None:
        raise DomainError("store has no dwell accumulators; run_ensemble(..., dwell_bins=N)")
    if store.init_theta is None or abs(fold_angle(store.init_theta)) > 1e-12:
        logger.warning("[warn] dwell histogram protocol expects trajectories started at theta = 0")
    dt = store.params.dt_sim
    width = 2 * np.pi / acc.bins

    def build(total, total_sq, offset):
        mean, err = _mean_and_error(total, total_sq, float(acc.n))
        return DwellHistogram(grid_edges(acc.bins, offset), mean * dt / width, err * dt / width,
                              total.astype(np.int64), offset, "direct")

    base = build(acc.base_sum, acc.base_sumsq, 0.0)
    shifted = build(acc.shift_sum, acc.shift_sumsq, width / 2)
    if grid == "base":
        return base
    if grid == "shifted":
        return shifted
    return select_grid(base, shifted)


def _spread(lo, hi, weight, edges, out):
    """Add weight over the angular interval [lo, hi] proportionally to bin overlap."""
    n = len(edges) - 1
    period = 2 * np.pi
    start = edges[0] + np.mod(lo - edges[0], period)
    length = hi - lo
    if length <= 0:
        i = int(np.floor((start - edges[0]) / (edges[1] - edges[0]))) % n
        out[i] += weight
        return
    ext = np.concatenate([edges[:-1], edges[:-1] + period, [edges[-1] + period]])
    left, right = ext[:-1], ext[1:]
    overlap = np.clip(np.minimum(start + length, right) - np.maximum(start, left), 0.0, None)
    np.add.at(out, np.arange(len(left)) % n, weight * overlap / length)


def dwell_histogram_experimental(store: TrajectoryStore, bins=DEFAULT_BINS, theta_map=None,
                                 min_survivors=100, monotone_tol=0.05):
    """
    Dwell density from the click records alone, τ(θ) = ρ(θ)/r(θ).

    ρ(θ) counts first registered clicks per trajectory and radian; the clicks
    of window k are spread over the angle the tomography curve θ(t) sweeps in
    that window. r(θ) is the click rate −(dP⁰/dt)/P⁰ of the empirical survival,
    averaged over the time the curve spends in the bin. Bins without a first
    click take the rate-free limit P⁰·dt/dθ. Falls back to the direct
    estimator (fallback=True) when θ(t) is not monotone.
    """
    n = float(store.n_traj)
    p0 = store.snap["cond_n"] / n
    usable = np.nonzero(store.snap["cond_n"] >= min_survivors)[0]
    if len(usable) < 2:
        raise MappingError("fewer than two snapshots with enough surviving trajectories")
    k_max = usable[-1]
    theta = conditional_theta(store) if theta_map is None else np.asarray(theta_map, dtype=float)
    theta = np.unwrap(theta[:k_max + 1])
    if np.any(np.isnan(theta)) or np.any(np.diff(theta) > monotone_tol):
        msg = "empirical theta(t) is not monotone over the mapping range"
        if store.dwell is not None:
            logger.warning(f"[warn] {msg}; falling back to the direct estimator")
            h = dwell_histogram_direct(store)
            h.fallback = True
            return h
        raise MappingError(msg)

    dt = store.params.t_int
    first = store.first_click_window
    clicks = np.bincount(first[first < k_max], minlength=k_max)[:k_max].astype(float)
    p_mid = 0.5 * (p0[:k_max] + p0[1:k_max + 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        rate_t = np.where(p_mid > 0, (p0[:k_max] - p0[1:k_max + 1]) / (dt * p_mid), 0.0)
    var_t = p_mid * (1 - p_mid) / n

    width = 2 * np.pi / bins

    def build(offset):
        edges = grid_edges(bins, offset)
        click_w, time_w, rate_w, surv_w, var = (np.zeros(bins) for _ in range(5))
        share = np.zeros(bins)
        for k in range(k_max):
            share[:] = 0.0
            lo, hi = min(theta[k], theta[k + 1]), max(theta[k], theta[k + 1])
            _spread(lo, hi, 1.0, edges, share)
            click_w += clicks[k] * share
            time_w += dt * share
            rate_w += rate_t[k] * dt * share
            surv_w += p_mid[k] * dt * share
            var += var_t[k] * (dt * share) ** 2
        rho = click_w / (n * width)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = rate_w / time_w
            tau = np.where(click_w > 0, rho / r, surv_w / width)
        tau = np.where(time_w > 0, tau, 0.0)
        return DwellHistogram(edges, tau, np.sqrt(var) / width, np.rint(click_w).astype(np.int64), offset,
                              "experimental")

    return select_grid(build(0.0), build(width / 2))


# ---------------- error budget ----------------
@dataclass
class ErrorBudget:
    target_duration: float
    n_postselected: int
    fractions: dict


def error_budget(store: TrajectoryStore, target_duration):
    """Fraction of trajectories with no click through target_duration that saw each event."""
    k = int(math.floor(target_duration / store.params.t_int + 1e-9))
    if k > store.n_windows:
        raise DomainError(f"target {target_duration} s exceeds simulated duration {store.duration} s")
    post = store.first_click_window >= k
    n_post = int(post.sum())
    if n_post == 0:
        logger.warning(f"[warn] error budget: no trajectory survives {target_duration} s")
        return ErrorBudget(target_duration, 0, {e: float("nan") for e in EVENTS})
    hits = store.first_event[post] < k
    return ErrorBudget(target_duration, n_post, {e: float(hits[:, i].mean()) for i, e in enumerate(EVENTS)})
