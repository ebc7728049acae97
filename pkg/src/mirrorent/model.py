"""Physical parameters of the two-mirror cavity and the derived couplings.

All quantities are SI. Rates and frequencies are angular (rad/s); `kappa` and
`gamma` are amplitude decay rates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import C_LIGHT, HBAR, K_B
from .errors import InvalidParams


class MarkovLimitWarning(UserWarning):
    """Mechanical quality factor below one; the white-noise bath is a poor model."""


@dataclass(frozen=True)
class MirrorMode:
    omega: float
    gamma: float
    mass: float


@dataclass(frozen=True)
class PhysicalParams:
    """Raw experimental inputs.

    At most one of `delta` (effective detuning) and `delta0` (bare detuning,
    omega_c - omega_L) may be set; both may be left out when the detuning is
    passed explicitly to the functions that need it.
    """

    cavity_length: float
    kappa: float
    laser_wavelength: float
    laser_power: float
    mirror1: MirrorMode
    mirror2: MirrorMode
    temperature: float = 0.0
    delta: float | None = None
    delta0: float | None = None

    def __post_init__(self):
        validate(self)

    @property
    def mirrors(self) -> tuple[MirrorMode, MirrorMode]:
        return (self.mirror1, self.mirror2)

    @property
    def equal_mirrors(self) -> bool:
        """Equal frequencies and damping rates (masses may differ)."""
        m1, m2 = self.mirrors
        return m1.omega == m2.omega and m1.gamma == m2.gamma

    def with_detuning(self, delta=None, delta0=None) -> "PhysicalParams":
        return replace(self, delta=delta, delta0=delta0)


def _finite(name, value):
    if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
        raise InvalidParams(f"{name} must be a finite number, got {value!r}")


def validate(params: PhysicalParams) -> None:
    for name in ("cavity_length", "kappa", "laser_wavelength", "laser_power", "temperature"):
        _finite(name, getattr(params, name))
    for name in ("cavity_length", "kappa", "laser_wavelength"):
        if getattr(params, name) <= 0:
            raise InvalidParams(f"{name} must be > 0")
    if params.laser_power < 0:
        raise InvalidParams("laser_power must be >= 0")
    if params.temperature < 0:
        raise InvalidParams("temperature must be >= 0")
    if params.delta is not None and params.delta0 is not None:
        raise InvalidParams("give either delta or delta0, not both")
    for name in ("delta", "delta0"):
        if getattr(params, name) is not None:
            _finite(name, getattr(params, name))
    for k, m in enumerate(params.mirrors, start=1):
        for attr in ("omega", "gamma", "mass"):
            _finite(f"mirror{k}.{attr}", getattr(m, attr))
        if m.omega <= 0 or m.mass <= 0:
            raise InvalidParams(f"mirror{k}: omega and mass must be > 0")
        if m.gamma < 0:
            raise InvalidParams(f"mirror{k}: gamma must be >= 0")
        if m.gamma >= m.omega:
            warnings.warn(
                f"mirror{k}: gamma >= omega (Q < 1), outside the weak-damping regime",
                MarkovLimitWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class DerivedParams:
    omega_c: float
    E_amp: float
    alpha_s: float
    G: float
    G1: float
    G2: float
    nbar1: float
    nbar2: float
    M_T: float
    mu: float
    r1: float
    r2: float
    eta: float
    delta: float
    params: PhysicalParams = field(repr=False, compare=False)

    @property
    def couplings(self) -> tuple[float, float]:
        return (self.G1, self.G2)

    @property
    def nbars(self) -> tuple[float, float]:
        return (self.nbar1, self.nbar2)


def thermal_occupancy(omega, T):
    """Bose-Einstein occupancy 1/(exp(hbar*omega/kB*T) - 1); exactly 0 at T = 0."""
    omega = np.asarray(omega, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(omega <= 0) or np.any(T < 0):
        raise InvalidParams("thermal_occupancy needs omega > 0 and T >= 0")
    out = np.zeros(np.broadcast(omega, T).shape)
    hot = np.broadcast_to(T > 0, out.shape)
    x = np.broadcast_to(HBAR * omega, out.shape)[hot] / (K_B * np.broadcast_to(T, out.shape)[hot])
    # exp(-x)/(1 - exp(-x)) never overflows, even for x -> inf
    out[hot] = np.exp(-x) / -np.expm1(-x)
    return float(out) if out.ndim == 0 else out


def kappa_from_finesse(length: float, finesse: float) -> float:
    """Cavity decay rate pi*c/(L*F).

    Convention chosen so that L = 1 cm, F = 1.9e5 gives kappa ~ 5e5 1/s; the
    usual half-width convention pi*c/(2*L*F) is a factor two smaller.
    """
    if length <= 0 or finesse <= 0:
        raise InvalidParams("length and finesse must be > 0")
    return math.pi * C_LIGHT / (length * finesse)


def laser_angular_frequency(params: PhysicalParams) -> float:
    return 2.0 * math.pi * C_LIGHT / params.laser_wavelength


def drive_amplitude(params: PhysicalParams) -> float:
    """|E| = sqrt(2 P kappa / (hbar omega_L))."""
    return math.sqrt(2.0 * params.laser_power * params.kappa / (HBAR * laser_angular_frequency(params)))


def derive(params: PhysicalParams, delta: float) -> DerivedParams:
    """All derived scalars at effective detuning `delta`.

    The cavity and laser frequencies differ by the detuning only, which is
    negligible at optical frequencies, so both are taken as 2*pi*c/lambda.
    """
    _finite("delta", delta)
    omega_c = laser_angular_frequency(params)
    E = drive_amplitude(params)
    kappa = params.kappa
    alpha_s = E / math.hypot(kappa, delta)
    m1, m2 = params.mirrors
    M_T = m1.mass + m2.mass
    mu = m1.mass * m2.mass / M_T
    pull = alpha_s * omega_c / params.cavity_length
    G = math.sqrt(2.0 * HBAR / (mu * m1.omega)) * pull
    G1 = math.sqrt(2.0 * HBAR / (m1.mass * m1.omega)) * pull
    G2 = math.sqrt(2.0 * HBAR / (m2.mass * m2.omega)) * pull
    r1 = math.sqrt(m1.mass / M_T)
    r2 = math.sqrt(m2.mass / M_T)
    return DerivedParams(
        omega_c=omega_c,
        E_amp=E,
        alpha_s=alpha_s,
        G=G,
        G1=G1,
        G2=G2,
        nbar1=thermal_occupancy(m1.omega, params.temperature),
        nbar2=thermal_occupancy(m2.omega, params.temperature),
        M_T=M_T,
        mu=mu,
        r1=r1,
        r2=r2,
        eta=min(1.0, 4.0 * mu / M_T),
        delta=float(delta),
        params=params,
    )


def figure2_params(temperature: float = 0.0, mass_ratio: float = 1.0) -> PhysicalParams:
    """The reference operating point: 1 cm cavity, 50 mW at 1064 nm, 10 MHz / 100 ng mirrors.

    `mass_ratio` > 1 shrinks mirror 2 to 100 ng / mass_ratio.
    """
    omega = 2.0 * math.pi * 1e7
    return PhysicalParams(
        cavity_length=0.01,
        kappa=5e5,
        laser_wavelength=1064e-9,
        laser_power=0.05,
        mirror1=MirrorMode(omega=omega, gamma=3e5, mass=1e-10),
        mirror2=MirrorMode(omega=omega, gamma=3e5, mass=1e-10 / mass_ratio),
        temperature=temperature,
    )
