"""Stationary intracavity field and the radiation-pressure shift of the detuning.

With |alpha_s|^2 = |E|^2 / (kappa^2 + Delta^2) the static mirror displacements
shift the bare detuning Delta0 to the effective Delta, which must satisfy the cubic

    (Delta0 - Delta) (kappa^2 + Delta^2) = chi |E|^2,
    chi = hbar (omega_c / L)^2 * sum_k 1 / (M_k Omega_k^2).

Up to three real roots exist (optical bistability).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .constants import HBAR
from .errors import InvalidParams, NoRealRoot
from .model import PhysicalParams, drive_amplitude, laser_angular_frequency

RESIDUAL_TOL = 1e-9
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class SemiclassicalBranch:
    delta_eff: float
    delta0: float
    alpha_s: float
    intensity: float
    Q1_s: float
    Q2_s: float
    residual: float
    unstable_heuristic: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class SemiclassicalSolution:
    branches: tuple[SemiclassicalBranch, ...]
    delta0: float

    @property
    def multistable(self) -> bool:
        return len(self.branches) > 1

    @property
    def degenerate(self) -> bool:
        return any(b.degenerate for b in self.branches)

    def __len__(self):
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def __getitem__(self, i):
        return self.branches[i]


def shift_coefficient(params: PhysicalParams) -> float:
    """chi, such that Delta0 - Delta = chi * |alpha_s|^2."""
    omega_c = laser_angular_frequency(params)
    stiff = sum(1.0 / (m.mass * m.omega**2) for m in params.mirrors)
    return HBAR * (omega_c / params.cavity_length) ** 2 * stiff


def cubic_residual(params: PhysicalParams, delta0: float, delta: float) -> float:
    """Normalized residual of the detuning cubic."""
    kappa = params.kappa
    lhs = (delta0 - delta) * (kappa**2 + delta**2)
    rhs = shift_coefficient(params) * drive_amplitude(params) ** 2
    return abs(lhs - rhs) / max(1.0, abs(delta0) * (kappa**2 + delta0**2))


def cubic_coefficients(params: PhysicalParams, delta0: float) -> np.ndarray:
    """Monic cubic in x = Delta/kappa: x^3 - d x^2 + x - (d - c)."""
    kappa = params.kappa
    d = delta0 / kappa
    c = shift_coefficient(params) * drive_amplitude(params) ** 2 / kappa**3
    return np.array([1.0, -d, 1.0, -(d - c)])


def _relative_discriminant(coeffs) -> float:
    a, b, c, d = coeffs
    terms = np.array([18 * a * b * c * d, -4 * b**3 * d, b**2 * c**2, -4 * a * c**3, -27 * a**2 * d**2])
    scale = np.abs(terms).sum()
    return float(terms.sum() / scale) if scale > 0 else 0.0


def _polish(coeffs, x, iters=50):
    p = np.poly1d(coeffs)
    dp = p.deriv()
    for _ in range(iters):
        slope = dp(x)
        if slope == 0:
            break
        step = p(x) / slope
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def _branch(params, delta0, delta, **flags) -> SemiclassicalBranch:
    E = drive_amplitude(params)
    intensity = E**2 / (params.kappa**2 + delta**2)
    omega_c = laser_angular_frequency(params)
    disp = [
        (-1) ** k * HBAR * omega_c / (m.mass * m.omega**2 * params.cavity_length) * intensity
        for k, m in enumerate(params.mirrors, start=1)
    ]
    return SemiclassicalBranch(
        delta_eff=float(delta),
        delta0=float(delta0),
        alpha_s=math.sqrt(intensity),
        intensity=intensity,
        Q1_s=disp[0],
        Q2_s=disp[1],
        residual=cubic_residual(params, delta0, delta),
        **flags,
    )


def solve_branches(params: PhysicalParams, delta0: float | None = None) -> SemiclassicalSolution:
    """All real effective detunings compatible with the bare detuning, sorted ascending.

    Roots come from companion-matrix eigenvalues and are Newton-polished. For a
    three-root set the middle one is labelled `unstable_heuristic` (usual
    bistability picture only; dynamical stability is decided elsewhere). A
    double root is reported once per distinct value with `degenerate=True`.
    """
    if delta0 is None:
        delta0 = params.delta0
    if delta0 is None:
        raise InvalidParams("solve_branches needs a bare detuning delta0")
    kappa = params.kappa
    coeffs = cubic_coefficients(params, delta0)
    eig = np.roots(coeffs)
    scale = max(1.0, np.abs(eig).max())
    candidates = sorted(float(z.real) for z in eig if abs(z.imag) <= 1e-6 * scale)
    roots = []
    for x in candidates:
        x = _polish(coeffs, x)
        if not any(abs(x - r) <= 1e-9 * max(1.0, abs(r)) for r in roots):
            roots.append(x)

    if not roots:
        lo = delta0 - shift_coefficient(params) * drive_amplitude(params) ** 2 / kappa**2 - kappa
        f = lambda d: (delta0 - d) * (kappa**2 + d**2) - shift_coefficient(params) * drive_amplitude(params) ** 2
        try:
            roots = [brentq(f, lo, delta0, xtol=1e-14 * max(1.0, abs(delta0)), maxiter=500) / kappa]
        except ValueError as exc:
            raise NoRealRoot(f"no real root in [{lo}, {delta0}]") from exc

    degenerate = abs(_relative_discriminant(coeffs)) <= DEGENERATE_TOL and len(roots) == 2
    branches = []
    for i, x in enumerate(sorted(roots)):
        branches.append(
            _branch(
                params,
                delta0,
                x * kappa,
                unstable_heuristic=len(roots) == 3 and i == 1,
                degenerate=degenerate,
            )
        )
    for b in branches:
        if b.residual >= RESIDUAL_TOL:
            raise NoRealRoot(f"root polishing failed, residual {b.residual:.3e}")
    return SemiclassicalSolution(tuple(branches), float(delta0))


def effective_detuning_direct(params: PhysicalParams, delta: float | None = None) -> SemiclassicalBranch:
    """Stationary field at a given effective detuning; the bare detuning is back-filled."""
    if delta is None:
        delta = params.delta
    if delta is None:
        raise InvalidParams("effective_detuning_direct needs an effective detuning delta")
    E = drive_amplitude(params)
    delta0 = delta + shift_coefficient(params) * E**2 / (params.kappa**2 + delta**2)
    return _branch(params, delta0, delta)
