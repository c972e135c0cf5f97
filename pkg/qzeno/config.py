"""
Run configuration.

Env (read after load_dotenv()):
  RUN_ID         : run tag, default run_YYYYmmdd_HHMM
  QZENO_OUT_ROOT : output root, default "outputs"
  QZENO_THREADS  : default worker count (1)
  QZENO_SEED     : default seed (20240101)
  SEEDS          : comma-separated seeds for scripts/run_sweep.py

Config files are INI with [params], [run] and [analyses] sections. Units:
  frequencies  2pi*100kHz | bare rad/s
  times        320ns | 4us | bare seconds
  rates        20/ms | 1/93us | bare 1/s
"""
import configparser
import datetime
import io
import math
import os
import re
from dataclasses import dataclass, field, fields

import numpy as np
from dotenv import load_dotenv

from .errors import ConfigError, DomainError
from .params import ModelParams, ideal_params, realistic_params

ANALYSES = ("conditional", "ensemble", "noclick_hist", "dwell", "transitions", "hmm")
INIT_STATES = ("ground", "excited", "bright")
DEFAULT_GRID = tuple(float(x) for x in np.linspace(0.1, 3.1, 31))
DEFAULT_SEED = 20240101

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
_FREQ_RE = re.compile(rf"^2\s*\*?\s*pi\s*\*\s*{_NUM}\s*([a-zA-Z]*)$")
_TIME_RE = re.compile(rf"^{_NUM}\s*([a-zA-Zµ]*)$")
_RATE_RE = re.compile(rf"^{_NUM}\s*/\s*{_NUM}?\s*([a-zA-Zµ]+)$")

_FREQ_KEYS = ("omega_s",)
_TIME_KEYS = ("tau_b", "t_int", "dt_sim")
_RATE_KEYS = ("alpha", "gamma1", "gamma_phi", "kappa_fp")


def env_defaults():
    load_dotenv()
    try:
        return {
            "run_id": os.getenv("RUN_ID") or datetime.datetime.now().strftime("run_%Y%m%d_%H%M"),
            "out_root": os.getenv("QZENO_OUT_ROOT", "outputs"),
            "threads": int(os.getenv("QZENO_THREADS", "1")),
            "seed": int(os.getenv("QZENO_SEED", str(DEFAULT_SEED))),
            "seeds": [int(s) for s in os.getenv("SEEDS", "").split(",") if s.strip()],
        }
    except ValueError as e:
        raise ConfigError(f"bad numeric environment variable: {e}") from e


def _plain(text):
    try:
        return float(text)
    except ValueError:
        return None


def parse_frequency(text):
    """'2pi*100kHz' or bare rad/s -> rad/s."""
    s = str(text).strip()
    v = _plain(s)
    if v is not None:
        return v
    m = _FREQ_RE.match(s.replace(" ", ""))
    if not m:
        raise ConfigError(f"cannot parse frequency {text!r}; use 2pi*<value><unit> or rad/s")
    unit = m.group(2).lower() or "hz"
    if unit not in _FREQ_UNITS:
        raise ConfigError(f"unknown frequency unit {m.group(2)!r}")
    return 2.0 * math.pi * float(m.group(1)) * _FREQ_UNITS[unit]


def parse_time(text):
    s = str(text).strip()
    v = _plain(s)
    if v is not None:
        return v
    m = _TIME_RE.match(s.replace(" ", ""))
    if not m or m.group(2).lower() not in _TIME_UNITS:
        raise ConfigError(f"cannot parse time {text!r}; use <value><s|ms|us|ns>")
    return float(m.group(1)) * _TIME_UNITS[m.group(2).lower()]


def parse_rate(text):
    """'20/ms', '1/93us' or bare 1/s."""
    s = str(text).strip()
    v = _plain(s)
    if v is not None:
        return v
    m = _RATE_RE.match(s.replace(" ", ""))
    if not m or m.group(3).lower() not in _TIME_UNITS:
        raise ConfigError(f"cannot parse rate {text!r}; use <value>/<unit>")
    per = float(m.group(2)) if m.group(2) else 1.0
    return float(m.group(1)) / (per * _TIME_UNITS[m.group(3).lower()])


def parse_grid(text):
    """'0.1:3.1:31' (linspace) or a comma-separated list."""
    s = str(text).strip()
    try:
        if ":" in s:
            lo, hi, n = s.split(":")
            return tuple(float(x) for x in np.linspace(float(lo), float(hi), int(n)))
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError as e:
        raise ConfigError(f"cannot parse grid {text!r}") from e


def parse_param(key, value):
    if key in _FREQ_KEYS:
        return parse_frequency(value)
    if key in _TIME_KEYS:
        return parse_time(value)
    if key in _RATE_KEYS:
        return parse_rate(value)
    v = _plain(str(value).strip())
    if v is None:
        raise ConfigError(f"[params] {key} = {value!r} is not a number")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams = field(default_factory=realistic_params)
    lambda_grid: tuple = DEFAULT_GRID
    n_traj: int = 10_000
    duration: float = 20e-6
    init_state: str = "ground"
    seed: int = DEFAULT_SEED
    analyses: frozenset = frozenset(ANALYSES[:4])
    output_dir: str = ""
    threads: int = 1
    n_boot: int = 2000
    dwell_bins: int = 80

    def __post_init__(self):
        grid = tuple(float(x) for x in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "analyses", frozenset(self.analyses))
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("lambda_grid must be non-empty and strictly increasing")
        if any(x < 0 for x in grid):
            raise ConfigError("lambda_grid values must be >= 0")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.init_state not in INIT_STATES:
            raise ConfigError(f"init_state must be one of {INIT_STATES}")
        bad = self.analyses - set(ANALYSES)
        if bad:
            raise ConfigError(f"unknown analyses {sorted(bad)}")
        if self.threads < 1 or self.dwell_bins < 4:
            raise ConfigError("threads must be >= 1 and dwell_bins >= 4")

    def replace(self, **changes):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ExperimentConfig(**d)

    def to_dict(self):
        return {"params": self.params.to_dict(), "lambda_grid": list(self.lambda_grid), "n_traj": self.n_traj,
                "duration": self.duration, "init_state": self.init_state, "seed": self.seed,
                "analyses": sorted(self.analyses), "output_dir": self.output_dir, "threads": self.threads,
                "n_boot": self.n_boot, "dwell_bins": self.dwell_bins}

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["params"] = {k: repr(float(v)) for k, v in self.params.to_dict().items()}
        cp["run"] = {"lambda_grid": ",".join(repr(x) for x in self.lambda_grid), "n_traj": str(self.n_traj),
                     "duration": repr(self.duration), "init_state": self.init_state, "seed": str(self.seed),
                     "output_dir": self.output_dir, "threads": str(self.threads), "n_boot": str(self.n_boot),
                     "dwell_bins": str(self.dwell_bins)}
        cp["analyses"] = {"enabled": ",".join(sorted(self.analyses))}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"malformed config: {e}") from e
        p = dict(cp["params"]) if cp.has_section("params") else {}
        preset = p.pop("preset", "realistic").strip().lower()
        known = {f.name for f in fields(ModelParams)} | {"kappa", "lambda"}
        unknown = set(p) - known
        if unknown:
            raise ConfigError(f"unknown [params] keys {sorted(unknown)}")
        vals = {k: parse_param(k, v) for k, v in p.items()}
        lam = vals.pop("lambda", None)
        try:
            if preset == "ideal":
                kappa = vals.pop("kappa", None)
                params = ideal_params(**vals)
                if kappa is not None:
                    params = params.replace(tau_b=kappa / params.omega_s)
            elif preset == "realistic":
                params = realistic_params(**vals)
            else:
                raise ConfigError(f"unknown preset {preset!r}")
            if lam is not None:
                params = params.with_lambda(lam)
        except DomainError as e:
            raise ConfigError(f"[params]: {e}") from e
        kw = {"params": params}
        r = cp["run"] if cp.has_section("run") else {}
        try:
            if "lambda_grid" in r:
                kw["lambda_grid"] = parse_grid(r["lambda_grid"])
            for key in ("n_traj", "seed", "threads", "n_boot", "dwell_bins"):
                if key in r:
                    kw[key] = int(r[key])
            if "duration" in r:
                kw["duration"] = parse_time(r["duration"])
            for key in ("init_state", "output_dir"):
                if key in r:
                    kw[key] = r[key].strip()
        except ValueError as e:
            raise ConfigError(f"[run]: {e}") from e
        if cp.has_section("analyses"):
            kw["analyses"] = frozenset(a.strip() for a in cp["analyses"].get("enabled", "").split(",") if a.strip())
        return cls(**kw)


def load_config(path=None, **overrides):
    if path is None:
        cfg = ExperimentConfig()
    else:
        try:
            with open(path, "r", encoding="utf-8") as f:
                cfg = ExperimentConfig.from_ini(f.read())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**overrides) if overrides else cfg
