"""
Batch command line: python -m qzeno.pipeline_cli <verb> [flags]

Verbs:
  ideal        closed-form tables (θ(t), P⁰(t), ρ(θ), τ_θ(θ), ξ(λ), transitions)
  transitions  λc₁, λc₂, λc₃ for ideal, realistic and configured parameters
  simulate     trajectory ensembles over the λ grid (+ master-equation oracle)
  extract      λ₁ᵒᵇˢ, λ₂ᵒᵇˢ, λ₃ᵒᵇˢ from stored ensembles
  calibrate    Baum-Welch calibration of click records (CSV label,outcome)
  scan         transition locations versus one decoherence parameter

Output:
  <out root>/<RUN_ID>/
    config.json  _meta.json  manifest.json
    <verb tables>.csv|json
    stores/*.npz            (simulate)
    hmm.csv  model_transitions.json   (simulate, when the analyses are enabled)
"""
import argparse
import glob
import logging
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import ideal_model as im
from .config import ExperimentConfig, env_defaults, load_config, parse_frequency, parse_grid, parse_time
from .errors import ConfigError, QzenoError
from .estimation import (fit_coalescence, fit_dwell, fit_xi_curve, empirical_click_calibration, hmm_baum_welch,
                         initial_hmm_guess, pole_bands_to_records, residual_bootstrap, track_pair)
from .io import (RunManifest, config_hash, ensure_dir, histogram_to_csv, read_records_csv, write_config, write_csv,
                 write_json, write_meta)
from .liouvillian import (GROUND4, SCAN_PARAMS, excited_population, find_lambda_c1, find_lambda_c2,
                          find_lambda_c3, integrate_master, lambda_scan)
from .log import BANNER, progress, setup_logging
from .params import ideal_params, realistic_params
from .trajectory_sim import (BRIGHT, QubitAngle, TrajectoryStore, conditional_population, dwell_histogram_direct,
                             dwell_histogram_experimental, ensemble_population, noclick_duration_histogram,
                             run_ensemble)

logger = logging.getLogger("qzeno.cli")

# pencil inputs are thinned to at most this many samples
PENCIL_SAMPLES = 200
# Baum-Welch sees at most this many windows per lambda
HMM_WINDOWS = 200_000
INIT_MAP = {"ground": (QubitAngle(math.pi), GROUND4),
            "excited": (QubitAngle(0.0), (0.0, 1.0, 0.0, 1.0)),
            "bright": (BRIGHT, (1.0, 0.0, 0.0, 0.0))}


@dataclass
class RunContext:
    config: ExperimentConfig
    run_id: str
    run_dir: str
    fmt: str
    manifest: RunManifest
    started: float

    def emit(self, name, rows, fieldnames):
        path = os.path.join(self.run_dir, f"{name}.{self.fmt}")
        if self.fmt == "json":
            write_json(path, [{k: r.get(k) for k in fieldnames} for r in rows])
        else:
            write_csv(path, rows, fieldnames)
        return self.manifest.add(path)

    def emit_json(self, name, obj):
        return self.manifest.add(write_json(os.path.join(self.run_dir, f"{name}.json"), obj))


# ---------------- context ----------------
def _global(flag, env_name, cfg_value, cast):
    if flag is not None:
        return flag
    if os.getenv(env_name):
        try:
            return cast(os.environ[env_name])
        except ValueError as e:
            raise ConfigError(f"{env_name}: {e}") from e
    return cfg_value


def _verb_overrides(args):
    kw = {}
    if getattr(args, "lambda_grid", None):
        kw["lambda_grid"] = parse_grid(args.lambda_grid)
    if getattr(args, "n_traj", None) is not None:
        kw["n_traj"] = args.n_traj
    if getattr(args, "duration", None) and args.command == "simulate":
        kw["duration"] = parse_time(args.duration)
    if getattr(args, "init", None):
        kw["init_state"] = args.init
    if getattr(args, "dwell_bins", None) is not None:
        kw["dwell_bins"] = args.dwell_bins
    if getattr(args, "n_boot", None) is not None:
        kw["n_boot"] = args.n_boot
    return kw


def resolve_out_root(flag, cfg: ExperimentConfig):
    """--out, then $QZENO_OUT_ROOT, then the config's output_dir, then "outputs"."""
    return flag or os.getenv("QZENO_OUT_ROOT") or cfg.output_dir or env_defaults()["out_root"]


def make_context(args):
    env = env_defaults()
    cfg = load_config(args.config, **_verb_overrides(args))
    seed = _global(args.seed, "QZENO_SEED", cfg.seed, int)
    threads = _global(args.threads, "QZENO_THREADS", cfg.threads, int)
    out_root = resolve_out_root(args.out, cfg)
    cfg = cfg.replace(seed=seed, threads=threads, output_dir=out_root)
    run_dir = ensure_dir(os.path.join(out_root, env["run_id"]))
    manifest = RunManifest(run_dir, config_hash(cfg.to_dict()), seed)
    return RunContext(cfg, env["run_id"], run_dir, args.format, manifest, time.time())


def finish(ctx: RunContext):
    ctx.manifest.add(write_config(ctx.run_dir, ctx.config))
    ctx.manifest.add(write_meta(ctx.run_dir, ctx.run_id))
    ctx.manifest.wall_clock = time.time() - ctx.started
    ctx.manifest.write()
    logger.info(BANNER)
    logger.info(f"[done] {len(ctx.manifest.outputs)} outputs -> {ctx.run_dir}")
    logger.info(f"[time] Elapsed: {round(ctx.manifest.wall_clock, 1)}s")
    logger.info(BANNER)


def _banner(ctx, command):
    c = ctx.config
    logger.info(BANNER)
    logger.info(f"[cfg] RUN_ID   = {ctx.run_id}")
    logger.info(f"[cfg] COMMAND  = {command}")
    logger.info(f"[cfg] SEED     = {c.seed}")
    logger.info(f"[cfg] THREADS  = {c.threads}")
    logger.info(f"[cfg] LAMBDAS  = {len(c.lambda_grid)} points [{c.lambda_grid[0]:.3g}, {c.lambda_grid[-1]:.3g}]")
    logger.info(f"[cfg] OUT      = {ctx.run_dir}")
    logger.info(BANNER)


# ---------------- ideal ----------------
def cmd_ideal(args, ctx: RunContext):
    omega = parse_frequency(args.omega)
    lam = args.lam
    theta0 = math.pi if args.theta0 == "pi" else 0.0
    wanted = [k for k in ("theta", "survival", "dwell", "xi", "transitions") if getattr(args, k)]
    wanted = wanted or ["theta", "survival", "dwell", "xi", "transitions"]
    t = np.linspace(0.0, parse_time(args.duration), args.points)

    if "theta" in wanted:
        th = im.noclick_theta(t, lam, omega, theta0)
        ctx.emit("ideal_theta", [{"t_s": a, "theta_rad": b, "p1": math.cos(b / 2) ** 2} for a, b in zip(t, th)],
                 ["t_s", "theta_rad", "p1"])
    if "survival" in wanted:
        if theta0 != math.pi:
            logger.warning("[warn] survival tables are defined for theta0 = pi; using pi")
        p0 = im.noclick_survival(t, lam, omega)
        dens = im.first_click_density(t, lam, omega)
        ctx.emit("ideal_survival", [{"t_s": a, "p0": b, "first_click_density_per_s": c}
                                    for a, b, c in zip(t, p0, dens)], ["t_s", "p0", "first_click_density_per_s"])
    if "dwell" in wanted:
        if lam <= 1:
            logger.warning(f"[warn] angular densities need lambda > 1 (got {lam}); dwell table skipped")
        else:
            grid = np.linspace(-math.pi, math.pi, args.points)
            rho = im.angular_first_click_density(grid, lam, theta0)
            tau = im.dwell_density(grid, lam, omega, theta0)
            pinf = im.steady_state_density(grid, lam)
            fp = im.fixed_points(lam)
            logger.info(f"[ok] fixed points: theta+ = {fp.theta_plus:.6f}, theta- = {fp.theta_minus:.6f}")
            ctx.emit("ideal_angular", [{"theta_rad": a, "rho_per_rad": b, "tau_s_per_rad": c, "p_inf_per_rad": d}
                                       for a, b, c, d in zip(grid, rho, tau, pinf)],
                     ["theta_rad", "rho_per_rad", "tau_s_per_rad", "p_inf_per_rad"])
    if "xi" in wanted:
        rows = []
        for x in ctx.config.lambda_grid:
            if x > 1:
                fp = im.fixed_points(x)
                rows.append({"lambda": x, "xi": im.critical_exponent(x), "theta_plus_rad": fp.theta_plus,
                             "theta_minus_rad": fp.theta_minus})
        ctx.emit("ideal_xi", rows, ["lambda", "xi", "theta_plus_rad", "theta_minus_rad"])
    if "transitions" in wanted:
        c1, c2, c3 = im.ideal_transitions()
        logger.info(f"[ok] ideal transitions: {c1:.4f}, {c2:.4f}, {c3:.4f}")
        ctx.emit_json("ideal_transitions", {"lambda_c1": c1, "lambda_c2": c2, "lambda_c3": c3})
    return 0


# ---------------- transitions ----------------
def _transitions_of(params):
    out = {}
    for key, finder in (("lambda_c1", find_lambda_c1), ("lambda_c2", find_lambda_c2),
                        ("lambda_c3", find_lambda_c3)):
        try:
            out[key] = finder(params)
        except QzenoError as e:
            logger.error(f"[ERR] {key}: {e}")
            out[key] = None
            out.setdefault("errors", {})[key] = str(e)
    return out


def cmd_transitions(args, ctx: RunContext):
    sets = {"ideal": ideal_params(ctx.config.params.omega_s)}
    if not args.ideal:
        sets["realistic"] = realistic_params(omega_s=ctx.config.params.omega_s)
        if ctx.config.params != sets["realistic"]:
            sets["custom"] = ctx.config.params
        else:
            logger.info("[cfg] configured params equal the realistic preset; no custom row")
    result = {}
    for name, p in sets.items():
        result[name] = _transitions_of(p)
        r = result[name]
        logger.info(f"[ok] {name:9s} lambda_c1={r['lambda_c1']} lambda_c2={r['lambda_c2']} "
                    f"lambda_c3={r['lambda_c3']}")
        if r["lambda_c1"] is not None and r["lambda_c2"] is not None and r["lambda_c2"] < r["lambda_c1"]:
            logger.info(f"[ok] {name}: lambda_c2 < lambda_c1 (ordering inverted by decoherence)")
    ctx.emit("transitions", [dict(params=k, **{c: v.get(c) for c in ("lambda_c1", "lambda_c2", "lambda_c3")})
                             for k, v in result.items()], ["params", "lambda_c1", "lambda_c2", "lambda_c3"])
    ctx.emit_json("transitions_detail", result)
    return 0 if any(v["lambda_c1"] is not None for v in result.values()) else 1


# ---------------- simulate ----------------
def _store_name(prefix, lam):
    return f"{prefix}_{lam:.4f}.npz"


def _hmm_row(store, lam):
    """Baum-Welch on the store's records laid end to end (each trajectory restarts in |0⟩)."""
    row = {"lambda": lam, "alpha_true_per_s": store.params.alpha, "tau_b_true_s": store.params.tau_b}
    if store.outcomes is None:
        logger.warning(f"[warn] hmm skipped | lambda={lam:.4f} | store kept no per-trajectory records")
        return dict(row, error="no records")
    record = store.outcomes.reshape(-1)[:HMM_WINDOWS]
    try:
        res = hmm_baum_welch(record, initial_hmm_guess(record, store.params.t_int))
    except QzenoError as e:
        logger.error(f"[ERR] hmm failed | lambda={lam:.4f} | {e}")
        return dict(row, n_windows=record.size, error=str(e))
    p = res.params
    return dict(row, alpha_per_s=p.alpha, tau_b_s=p.tau_b, p_fp=p.p_fp, p_fn=p.p_fn, n_windows=record.size,
                converged=int(res.converged), loglik=res.loglik[-1])


def cmd_simulate(args, ctx: RunContext):
    cfg = ctx.config
    init, init4 = INIT_MAP[cfg.init_state]
    store_dir = ensure_dir(os.path.join(ctx.run_dir, "stores"))
    cond_rows, ens_rows, master_rows, hist_rows, hmm_rows = [], [], [], [], []
    failures = []
    total = len(cfg.lambda_grid)
    for i, lam in enumerate(cfg.lambda_grid):
        params = cfg.params.with_lambda(lam)
        path = os.path.join(store_dir, _store_name("store", lam))
        try:
            store = run_ensemble(params, init, cfg.duration, cfg.n_traj, seed=cfg.seed + i,
                                 workers=cfg.threads, flush_path=path + ".partial.npz")
            store.save(path)
            ctx.manifest.add(path)
            if "conditional" in cfg.analyses:
                s = conditional_population(store)
                cond_rows += [{"lambda": lam, "t_s": t, "p1_cond": v, "stderr": e, "survivors": n}
                              for t, v, e, n in zip(s.times, s.values, s.stderr, s.counts)]
            if "ensemble" in cfg.analyses:
                s = ensemble_population(store)
                ens_rows += [{"lambda": lam, "t_s": t, "p1_ens": v, "stderr": e}
                             for t, v, e in zip(s.times, s.values, s.stderr)]
                times, states = integrate_master(params, init4, store.duration, params.t_int)
                master_rows += [{"lambda": lam, "t_s": t, "p1_master": v}
                                for t, v in zip(times, excited_population(states))]
            if "noclick_hist" in cfg.analyses:
                h = noclick_duration_histogram(store)
                hist_rows += [{"lambda": lam, "duration_s": a, "count": c}
                              for a, c in zip(h.edges[:-1], h.counts) if c > 0]
            if "dwell" in cfg.analyses:
                dpath = os.path.join(store_dir, _store_name("store_dwell", lam))
                dstore = run_ensemble(params, QubitAngle(0.0), cfg.duration, cfg.n_traj, seed=cfg.seed + total + i,
                                      dwell_bins=cfg.dwell_bins, keep_records=False, workers=cfg.threads,
                                      flush_path=dpath + ".partial.npz")
                dstore.save(dpath)
                ctx.manifest.add(dpath)
                hpath = os.path.join(ctx.run_dir, f"dwell_{lam:.4f}.csv")
                ctx.manifest.add(histogram_to_csv(dwell_histogram_direct(dstore), hpath))
            if "hmm" in cfg.analyses:
                hmm_rows.append(_hmm_row(store, lam))
        except QzenoError as e:
            failures.append({"lambda": lam, "error": str(e)})
            logger.error(f"[ERR] simulate failed | lambda={lam:.4f} | {e}")
        finally:
            progress(logger, i + 1, total)

    if cond_rows:
        ctx.emit("conditional", cond_rows, ["lambda", "t_s", "p1_cond", "stderr", "survivors"])
    if ens_rows:
        ctx.emit("ensemble", ens_rows, ["lambda", "t_s", "p1_ens", "stderr"])
        ctx.emit("master", master_rows, ["lambda", "t_s", "p1_master"])
    if hist_rows:
        ctx.emit("noclick_hist", hist_rows, ["lambda", "duration_s", "count"])
    if hmm_rows:
        ctx.emit("hmm", hmm_rows, ["lambda", "alpha_true_per_s", "alpha_per_s", "tau_b_true_s", "tau_b_s", "p_fp",
                                   "p_fn", "n_windows", "converged", "loglik", "error"])
    if "transitions" in cfg.analyses:
        result = _transitions_of(cfg.params)
        logger.info(f"[ok] model transitions: lambda_c1={result['lambda_c1']} lambda_c2={result['lambda_c2']} "
                    f"lambda_c3={result['lambda_c3']}")
        ctx.emit_json("model_transitions", result)
    if failures:
        ctx.emit("failures", failures, ["lambda", "error"])
    return 1 if len(failures) == total else 0


# ---------------- extract ----------------
def _thin(series):
    stride = max(1, int(math.ceil(len(series) / PENCIL_SAMPLES)))
    return series[::stride], stride


def _load_stores(stores_dir, prefix):
    out = []
    for path in sorted(glob.glob(os.path.join(stores_dir, f"{prefix}_*.npz"))):
        if path.endswith(".partial.npz"):
            continue
        name = os.path.basename(path)
        if prefix == "store" and name.startswith("store_dwell"):
            continue
        out.append(TrajectoryStore.load(path))
    out.sort(key=lambda s: s.params.lam)
    return out


def _pole_stage(stores, series_of, ctx, label, drop_slowest):
    cfg = ctx.config
    lams, poles, records = [], [], []
    for k, store in enumerate(stores):
        y, stride = _thin(series_of(store))
        try:
            bands = residual_bootstrap(y, store.params.t_int * stride, order=3, n_boot=cfg.n_boot,
                                       seed=cfg.seed + k, workers=cfg.threads)
        except QzenoError as e:
            logger.error(f"[ERR] {label} poles failed | lambda={store.params.lam:.4f} | {e}")
            continue
        lams.append(store.params.lam)
        poles.append(bands.fit.poles)
        records.append(pole_bands_to_records(bands, extra={"lambda": store.params.lam, "series": label}))
    delta = track_pair(lams, poles, drop_slowest=drop_slowest)
    fit = fit_coalescence(lams, delta)
    return fit, records


def _dwell_stage(stores, ctx):
    rows = []
    for store in stores:
        lam = store.params.lam
        if lam <= 1:
            continue
        try:
            hist = dwell_histogram_experimental(store, bins=store.dwell.bins if store.dwell else 80)
            fit = fit_dwell(hist)
            rows.append({"lambda": lam, "xi": fit.xi, "sigma_xi": fit.sigma_xi, "theta_plus_rad": fit.theta_plus,
                         "sigma_theta_plus_rad": fit.sigma_theta_plus,
                         "estimator": "direct" if hist.fallback else hist.estimator})
        except QzenoError as e:
            logger.error(f"[ERR] dwell fit failed | lambda={lam:.4f} | {e}")
    return rows


def cmd_extract(args, ctx: RunContext):
    stores_dir = args.stores or os.path.join(ctx.run_dir, "stores")
    stores = _load_stores(stores_dir, "store")
    dwell_stores = _load_stores(stores_dir, "store_dwell")
    if not stores and not dwell_stores:
        raise ConfigError(f"no stores found in {stores_dir}")
    logger.info(f"[cfg] {len(stores)} stores, {len(dwell_stores)} dwell stores from {stores_dir}")
    result = {"poles": []}
    stages_ok = 0

    for key, series_of, drop in (("lambda_1", lambda s: s.snap["cond_n"] / s.n_traj, False),
                                 ("lambda_3", lambda s: s.snap["ens_sum"] / s.n_traj, True)):
        try:
            fit, records = _pole_stage(stores, series_of, ctx, key, drop)
            result[key] = fit.to_record(estimator=f"coalescence_{key}", seed=ctx.config.seed,
                                        n_boot=ctx.config.n_boot)
            result["poles"] += records
            stages_ok += 1
            logger.info(f"[ok] {key}_obs = {fit.lambda_c:.4f} +/- {fit.sigma_lambda_c:.2g}")
        except QzenoError as e:
            logger.error(f"[ERR] {key} stage failed | {e}")
            result[key] = {"error": str(e)}

    rows = _dwell_stage(dwell_stores, ctx)
    ctx.emit("xi_curve", rows, ["lambda", "xi", "sigma_xi", "theta_plus_rad", "sigma_theta_plus_rad", "estimator"])
    try:
        xfit = fit_xi_curve([r["lambda"] for r in rows], [r["xi"] for r in rows],
                            [r["sigma_xi"] for r in rows] if all(r["sigma_xi"] > 0 for r in rows) else None)
        result["lambda_2"] = {"estimator": "xi_zero_crossing", "params": {"lambda_c": xfit.lambda_c2,
                                                                          "delta": xfit.delta},
                              "sigmas": {"lambda_c": xfit.sigma_lambda_c2}, "n_points": xfit.n_points}
        stages_ok += 1
        logger.info(f"[ok] lambda_2_obs = {xfit.lambda_c2:.4f} +/- {xfit.sigma_lambda_c2:.2g}")
    except QzenoError as e:
        logger.error(f"[ERR] lambda_2 stage failed | {e}")
        result["lambda_2"] = {"error": str(e)}

    ctx.emit_json("extraction", result)
    return 0 if stages_ok else 1


# ---------------- calibrate ----------------
def cmd_calibrate(args, ctx: RunContext):
    records = read_records_csv(args.records)
    dt = parse_time(args.dt) if args.dt else ctx.config.params.t_int
    logger.info(f"[cfg] {len(records)} record sets, dt = {dt:g} s")
    cal = empirical_click_calibration(records, dt)
    rows = [{"label": r.label, "alpha_per_s": r.alpha, "tau_b_s": r.tau_b, "p_fp": r.p_fp, "p_fn": r.p_fn,
             "n_windows": r.n_windows, "converged": int(r.converged)} for r in cal.rows]
    ctx.emit("calibration", rows, ["label", "alpha_per_s", "tau_b_s", "p_fp", "p_fn", "n_windows", "converged"])
    omega = ctx.config.params.omega_s
    ctx.emit_json("calibration", {"quad_coeff_per_s": cal.quad_coeff, "quad_rel_rms": cal.quad_residual,
                                  "omega_s": omega, "dt": dt,
                                  "rows": [dict(r, **{"lambda": r["alpha_per_s"] / (2 * omega)}) for r in rows]})
    return 0


# ---------------- scan ----------------
def cmd_scan(args, ctx: RunContext):
    grid = parse_grid(args.values)
    total = len(grid)
    logger.info(f"[cfg] scanning {args.param} over {total} values (units of Omega_S for rates)")
    rows = lambda_scan(ctx.config.params, args.param, grid, workers=ctx.config.threads)
    progress(logger, total, total)
    ctx.emit("scan", rows, ["param_name", "param_value", "lambda_c1", "lambda_c2", "lambda_c3"])
    return 0


COMMANDS = {"ideal": cmd_ideal, "transitions": cmd_transitions, "simulate": cmd_simulate, "extract": cmd_extract,
            "calibrate": cmd_calibrate, "scan": cmd_scan}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output root (default $QZENO_OUT_ROOT or outputs)")
    common.add_argument("--threads", type=int)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qzeno", description="Monitored-qubit transitions: simulate and extract.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ideal", parents=[common], help="closed-form tables")
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--omega", default="2pi*100kHz")
    s.add_argument("--theta0", choices=("pi", "0"), default="pi")
    s.add_argument("--duration", default="20us")
    s.add_argument("--points", type=int, default=401)
    for flag in ("theta", "survival", "dwell", "xi", "transitions"):
        s.add_argument(f"--{flag}", action="store_true")

    s = sub.add_parser("transitions", parents=[common], help="transition locations")
    s.add_argument("--ideal", action="store_true", help="ideal model only")

    s = sub.add_parser("simulate", parents=[common], help="trajectory ensembles over the lambda grid")
    s.add_argument("--lambda-grid", help="lo:hi:n or comma list")
    s.add_argument("--n-traj", type=int)
    s.add_argument("--duration")
    s.add_argument("--init", choices=tuple(INIT_MAP))
    s.add_argument("--dwell-bins", type=int)

    s = sub.add_parser("extract", parents=[common], help="observed transitions from stores")
    s.add_argument("--stores", help="directory with store_*.npz (default <run dir>/stores)")
    s.add_argument("--n-boot", type=int)

    s = sub.add_parser("calibrate", parents=[common], help="HMM calibration of click records")
    s.add_argument("--records", required=True)
    s.add_argument("--dt", help="window length (default t_int of the config)")

    s = sub.add_parser("scan", parents=[common], help="transitions versus one parameter")
    s.add_argument("--param", choices=SCAN_PARAMS, required=True)
    s.add_argument("--values", required=True, help="lo:hi:n or comma list")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    setup_logging(level)
    try:
        ctx = make_context(args)
        _banner(ctx, args.command)
        code = COMMANDS[args.command](args, ctx)
        finish(ctx)
        return code
    except QzenoError as e:
        logger.error(f"[ERR] {args.command}: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
