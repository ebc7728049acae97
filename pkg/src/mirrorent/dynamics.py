"""Linearized quantum Langevin dynamics: drift matrix, diffusion matrix, stability.

Quadratures are dimensionless, each mirror scaled by its own mass and
frequency, so q_k-dot = Omega_k p_k. Cavity quadratures are
X = (da + da^+)/sqrt(2), Y = (da - da^+)/(i sqrt(2)) with alpha_s real.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import UnequalMirrors, WrongBasis
from .model import DerivedParams

STABILITY_RTOL = 1e-9


class Basis(enum.Enum):
    PER_MIRROR = ("q1", "p1", "q2", "p2", "X", "Y")
    CM_REL = ("q_cm", "p_cm", "q_r", "p_r", "X", "Y")

    @property
    def labels(self):
        return self.value


@dataclass(frozen=True)
class LinearModel:
    """dv/dt = A v + noise, noise correlations D delta(t - t'). Rates in rad/s."""

    A: np.ndarray
    D: np.ndarray
    basis: Basis
    derived: DerivedParams | None = field(default=None, repr=False, compare=False)
    delta: float | None = None

    @property
    def rate_scale(self) -> float:
        """Characteristic rate used to nondimensionalize linear algebra."""
        if self.derived is not None:
            return self.derived.params.mirror1.omega
        return float(np.abs(self.A).sum(axis=1).max()) or 1.0


@dataclass(frozen=True)
class StabilityReport:
    s1: float | None
    s2: float | None
    stable_rh: bool
    eigenvalues: np.ndarray
    stable_eig: bool
    margin: float
    eps: float

    @property
    def marginal(self) -> bool:
        return abs(self.margin) <= 10 * self.eps

    @property
    def stable(self) -> bool:
        return self.stable_eig and not self.marginal


def diffusion_per_mirror(derived: DerivedParams) -> np.ndarray:
    p = derived.params
    m1, m2 = p.mirrors
    return np.diag(
        [0.0, m1.gamma * (2 * derived.nbar1 + 1), 0.0, m2.gamma * (2 * derived.nbar2 + 1), p.kappa, p.kappa]
    )


def build_general(derived: DerivedParams, delta: float | None = None) -> LinearModel:
    """Drift and diffusion in the (q1, p1, q2, p2, X, Y) basis, any mirror pair."""
    if delta is None:
        delta = derived.delta
    p = derived.params
    m1, m2 = p.mirrors
    G1, G2, kappa = derived.G1, derived.G2, p.kappa
    A = np.array(
        [
            [0.0, m1.omega, 0.0, 0.0, 0.0, 0.0],
            [-m1.omega, -m1.gamma, 0.0, 0.0, -G1, 0.0],
            [0.0, 0.0, 0.0, m2.omega, 0.0, 0.0],
            [0.0, 0.0, -m2.omega, -m2.gamma, G2, 0.0],
            [0.0, 0.0, 0.0, 0.0, -kappa, delta],
            [-G1, 0.0, G2, 0.0, -delta, -kappa],
        ]
    )
    return LinearModel(A, diffusion_per_mirror(derived), Basis.PER_MIRROR, derived, float(delta))


def drift_cmrel(omega, gamma, kappa, delta, G) -> np.ndarray:
    """Equal-mirror drift matrix, variables (q_cm, p_cm, q_r, p_r, X, Y)."""
    return np.array(
        [
            [0.0, omega, 0.0, 0.0, 0.0, 0.0],
            [-omega, -gamma, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, omega, 0.0, 0.0],
            [0.0, 0.0, -omega, -gamma, G, 0.0],
            [0.0, 0.0, 0.0, 0.0, -kappa, delta],
            [0.0, 0.0, G, 0.0, -delta, -kappa],
        ]
    )


def build_cmrel(derived: DerivedParams, delta: float | None = None) -> LinearModel:
    """Drift and diffusion in the centre-of-mass / relative basis (equal Omega and gamma)."""
    if delta is None:
        delta = derived.delta
    p = derived.params
    if not p.equal_mirrors:
        raise UnequalMirrors("build_cmrel needs Omega_1 == Omega_2 and gamma_1 == gamma_2")
    m = p.mirror1
    A = drift_cmrel(m.omega, m.gamma, p.kappa, delta, derived.G)
    thermal = m.gamma * (2 * derived.nbar1 + 1)
    D = np.diag([0.0, thermal, 0.0, thermal, p.kappa, p.kappa])
    return LinearModel(A, D, Basis.CM_REL, derived, float(delta))


def cmrel_rotation(r1: float, r2: float) -> np.ndarray:
    """Orthogonal S with v_cmrel = S v_per_mirror; identity on the cavity quadratures."""
    S = np.eye(6)
    S[:4, :4] = [
        [r1, 0.0, r2, 0.0],
        [0.0, r1, 0.0, r2],
        [-r2, 0.0, r1, 0.0],
        [0.0, -r2, 0.0, r1],
    ]
    return S


def transform_basis(model: LinearModel) -> LinearModel:
    if model.basis is not Basis.PER_MIRROR:
        raise WrongBasis("transform_basis expects a per-mirror model")
    if model.derived is None:
        raise WrongBasis("mass ratios unknown: model carries no derived parameters")
    S = cmrel_rotation(model.derived.r1, model.derived.r2)
    D = S @ model.D @ S.T
    return LinearModel(S @ model.A @ S.T, (D + D.T) / 2, Basis.CM_REL, model.derived, model.delta)


def routh_hurwitz_s(omega, gamma, kappa, delta, G) -> tuple[float, float]:
    """The two nontrivial Routh-Hurwitz expressions of the equal-mirror system."""
    s1 = (
        2 * gamma * kappa
        * (
            delta**4
            + delta**2 * (gamma**2 + 2 * gamma * kappa + 2 * kappa**2 - 2 * omega**2)
            + (gamma * kappa + kappa**2 + omega**2) ** 2
        )
        + omega * G**2 * delta * (gamma + 2 * kappa) ** 2
    )
    s2 = omega * (delta**2 + kappa**2) - G**2 * delta
    return s1, s2


def routh_array_stable(coeffs) -> bool:
    """Routh test: True iff every root of the polynomial has negative real part.

    Any zero in the first column is treated as not stable.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c[0] < 0:
        c = -c
    n = len(c) - 1
    if n == 0:
        return True
    width = n // 2 + 1
    rows = [np.zeros(width), np.zeros(width)]
    rows[0][: len(c[0::2])] = c[0::2]
    rows[1][: len(c[1::2])] = c[1::2]
    for _ in range(n - 1):
        a, b = rows[-2], rows[-1]
        if b[0] <= 0:
            return False
        new = np.zeros(width)
        new[:-1] = (b[0] * a[1:] - a[0] * b[1:]) / b[0]
        rows.append(new)
    return all(r[0] > 0 for r in rows[: n + 1])


def stability(model: LinearModel) -> StabilityReport:
    """Eigenvalue and Routh-Hurwitz stability verdicts.

    eps = 1e-9 * ||A||_inf; a point is stable by eigenvalues when every real part
    is below -eps, and `marginal` when the largest real part is within 10*eps of 0.
    s1, s2 are evaluated only when both mirrors share Omega and gamma; otherwise
    the Routh-Hurwitz verdict comes from the Routh array of det(sI - A).
    """
    A = model.A
    norm = float(np.abs(A).sum(axis=1).max())
    eps = STABILITY_RTOL * norm
    eig = np.linalg.eigvals(A)
    margin = float(eig.real.max())
    s1 = s2 = None
    d = model.derived
    if d is not None and d.params.equal_mirrors:
        m = d.params.mirror1
        delta = d.delta if model.delta is None else model.delta
        s1, s2 = routh_hurwitz_s(m.omega, m.gamma, d.params.kappa, delta, d.G)
        stable_rh = s1 > 0 and s2 > 0 and m.gamma > 0 and d.params.kappa > 0
    else:
        scale = norm or 1.0
        stable_rh = routh_array_stable(np.poly(A / scale))
    return StabilityReport(
        s1=s1,
        s2=s2,
        stable_rh=bool(stable_rh),
        eigenvalues=eig,
        stable_eig=bool(margin < -eps),
        margin=margin,
        eps=eps,
    )
