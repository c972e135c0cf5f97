"""
Physical and detector parameters of the monitored qubit.

All quantities are SI: angular frequencies in rad/s, rates in 1/s, times in s.
"""
import math
from dataclasses import asdict, dataclass, replace

from .errors import DomainError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """
    omega_s   : Rabi drive Ω_S (rad/s)
    alpha     : click rate of the ground state (1/s), λ = α/(2Ω_S)
    gamma1    : relaxation rate 1/T1
    gamma_phi : pure dephasing rate 1/Tφ
    kappa_fp  : false-positive rate entering the postselected generator
    p_fn      : probability that a detected click is lost
    p_fp      : per-window false-positive probability used by the simulator
    tau_b     : mean waiting time in the detector's Bright state
    n_th      : thermal excited population of the qubit
    t_int     : integration window of the click record
    dt_sim    : Monte Carlo step
    """
    omega_s: float
    alpha: float = 0.0
    gamma1: float = 0.0
    gamma_phi: float = 0.0
    kappa_fp: float = 0.0
    p_fn: float = 0.0
    p_fp: float = 0.0
    tau_b: float = 4e-6
    n_th: float = 0.0
    t_int: float = 320e-9
    dt_sim: float = 10e-9

    def __post_init__(self):
        for name in ("omega_s", "alpha", "gamma1", "gamma_phi", "kappa_fp", "tau_b", "t_int", "dt_sim"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {v}")
        if not 0.0 <= self.p_fn < 1.0:
            raise DomainError(f"p_fn must lie in [0, 1), got {self.p_fn}")
        if not 0.0 <= self.p_fp <= 1.0:
            raise DomainError(f"p_fp must lie in [0, 1], got {self.p_fp}")
        if not 0.0 <= self.n_th < 1.0:
            raise DomainError(f"n_th must lie in [0, 1), got {self.n_th}")
        if self.dt_sim > self.t_int * (1 + 1e-12):
            raise DomainError(f"dt_sim={self.dt_sim} exceeds t_int={self.t_int}")

    # derived
    @property
    def lam(self):
        if self.omega_s == 0:
            return math.inf if self.alpha > 0 else 0.0
        return self.alpha / (2.0 * self.omega_s)

    @property
    def gamma2(self):
        return self.gamma_phi + self.gamma1 / 2.0

    @property
    def gamma_up(self):
        return self.gamma1 * self.n_th / (1.0 - self.n_th)

    @property
    def alpha_eff(self):
        return self.alpha * (1.0 - self.p_fn)

    @property
    def kappa(self):
        """Dimensionless detector waiting time Ω_S·τ_B."""
        return self.omega_s * self.tau_b

    def with_lambda(self, lam):
        if not math.isfinite(lam) or lam < 0:
            raise DomainError(f"lambda must be finite and >= 0, got {lam}")
        return replace(self, alpha=2.0 * lam * self.omega_s)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


def ideal_params(omega_s=TWO_PI * 100e3, **overrides):
    """Decoherence-free qubit with a perfect, instantly resetting detector."""
    base = dict(omega_s=omega_s, tau_b=1e-6 / omega_s if omega_s > 0 else 1e-12,
                t_int=10e-9, dt_sim=10e-9)
    base.update(overrides)
    return ModelParams(**base)


def realistic_params(**overrides):
    """Device-derived values: T1 = 93 µs, Tφ = 26 µs, Ω_S/2π = 100 kHz, Ω_S·τ_B = 2.5."""
    omega_s = overrides.pop("omega_s", TWO_PI * 100e3)
    kappa = overrides.pop("kappa", 2.5)
    base = dict(omega_s=omega_s, gamma1=1.0 / 93e-6, gamma_phi=1.0 / 26e-6,
                tau_b=kappa / omega_s, t_int=320e-9, dt_sim=10e-9)
    base.update(overrides)
    return ModelParams(**base)


def kappa_fp_from_probability(p_fp, t_int):
    """False-positive rate κ_FP = p_FP/T_int."""
    if t_int <= 0:
        raise DomainError("t_int must be > 0")
    return p_fp / t_int
