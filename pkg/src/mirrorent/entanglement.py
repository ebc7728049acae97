"""Bipartite Gaussian entanglement of the two mirrors.

Logarithms are natural. `variances` arguments are any object exposing
q_cm_var, p_cm_var, q_r_var and p_r_var (see steadystate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import NonPhysicalCM
from .steadystate import MirrorCM

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class EntanglementReport:
    nu_minus: float
    log_negativity: float
    simon_entangled: bool
    squeezing_q: bool
    squeezing_p: bool
    stable: bool
    variances: object
    boundary: bool = False


def _as_matrix(V) -> np.ndarray:
    return V.V if isinstance(V, MirrorCM) else np.asarray(V, dtype=float)


def seralian(V) -> float:
    """det N1 + det N2 - 2 det N12."""
    V = _as_matrix(V)
    return np.linalg.det(V[:2, :2]) + np.linalg.det(V[2:, 2:]) - 2 * np.linalg.det(V[:2, 2:])


def _det2(M, rows, cols):
    (a, b), (c, d) = rows, cols
    return M[a][c] * M[b][d] - M[a][d] * M[b][c]


def _exact_invariants(V: np.ndarray) -> tuple[Fraction, Fraction]:
    """(Sigma, det V) in exact rational arithmetic on the stored doubles."""
    M = [[Fraction(float(x)) for x in row] for row in V]
    sigma = _det2(M, (0, 1), (0, 1)) + _det2(M, (2, 3), (2, 3)) - 2 * _det2(M, (0, 1), (2, 3))
    # Laplace expansion along the first two rows
    det = Fraction(0)
    for cols in combinations(range(4), 2):
        rest = tuple(c for c in range(4) if c not in cols)
        sign = -1 if (sum(cols) + 1) % 2 else 1
        det += sign * _det2(M, (0, 1), cols) * _det2(M, (2, 3), rest)
    return sigma, det


def nu_minus(V) -> float:
    """Smallest symplectic eigenvalue of the partially transposed mirror CM.

    Near separability both symplectic eigenvalues sit close to 1/2 and
    Sigma^2 - 4 det V cancels almost completely, so the invariants are
    formed exactly and the smaller root is taken as 2 det V / (Sigma + sqrt(.)).
    """
    V = _as_matrix(V)
    if not np.all(np.isfinite(V)):
        raise NonPhysicalCM("non-finite covariance matrix")
    sigma_q, det_q = _exact_invariants(V)
    sigma, det = float(sigma_q), float(det_q)
    radicand = float(sigma_q**2 - 4 * det_q)
    if radicand < -1e-9 * max(1.0, sigma**2):
        raise NonPhysicalCM(f"Sigma^2 - 4 det V = {radicand:.3e} < 0")
    root = math.sqrt(max(radicand, 0.0))
    if sigma - root < -1e-12 * max(1.0, abs(sigma)):
        raise NonPhysicalCM(f"Sigma - sqrt(Sigma^2 - 4 det V) = {sigma - root:.3e} < 0")
    if det <= 0 or sigma + root <= 0:
        return 0.0
    return math.sqrt(2 * det / (sigma + root))


def log_negativity_from_nu(nu: float) -> float:
    if abs(nu - 0.5) <= BOUNDARY_TOL:
        return 0.0
    return max(0.0, -math.log(2 * nu))


def log_negativity(V) -> float:
    return log_negativity_from_nu(nu_minus(V))


def min_form_log_negativity(variances) -> float:
    """E_N for equal masses, written through the four stationary variances."""
    v = variances
    return max(
        0.0,
        -math.log(2 * math.sqrt(v.q_r_var * v.p_cm_var)),
        -math.log(2 * math.sqrt(v.q_cm_var * v.p_r_var)),
    )


def simon_criterion(variances, eta: float) -> bool:
    """PPT condition for the stationary (decoupled) CM form; True means entangled."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    v = variances
    lhs = (v.q_r_var * v.p_cm_var - 0.25) * (v.p_r_var * v.q_cm_var - 0.25)
    rhs = (1 - 1 / eta) * (v.q_cm_var * v.p_cm_var - 0.25) * (v.q_r_var * v.p_r_var - 0.25)
    return bool(lhs < rhs)


def squeezing_threshold(nbar: float) -> float:
    return 1.0 / (2 * (1 + 2 * nbar))


def squeezing_condition(q_r_var: float, p_r_var: float, nbar: float) -> tuple[bool, bool]:
    """Relative-motion squeezing below the thermal centre-of-mass level, per quadrature."""
    t = squeezing_threshold(nbar)
    return bool(q_r_var < t), bool(p_r_var < t)


def optimal_detuning(omega: float, gamma: float, kappa: float) -> float:
    return omega * (gamma + 2 * kappa) / (2 * gamma + 2 * kappa)


def sufficient_condition(gamma: float, omega: float, kappa: float) -> bool:
    """Zero-temperature entanglement at the optimal detuning is guaranteed when this holds."""
    return bool(gamma * omega > 2 * kappa * (gamma + kappa))


def rwa_variances(G: float, gamma: float, kappa: float, nbar: float) -> tuple[float, float]:
    """Relative variances in the resonant, fast-mirror limit; never below 1/2."""
    d = gamma * (G**2 + 2 * gamma * kappa + 4 * kappa**2) / ((gamma + 2 * kappa) * (G**2 + 2 * gamma * kappa))
    v = 0.5 + nbar * d
    return v, v


def assess(V: MirrorCM, variances, eta: float, nbar: float, stable: bool = True) -> EntanglementReport:
    nu = nu_minus(V)
    sq_q, sq_p = squeezing_condition(variances.q_r_var, variances.p_r_var, nbar)
    return EntanglementReport(
        nu_minus=nu,
        log_negativity=log_negativity_from_nu(nu),
        simon_entangled=simon_criterion(variances, eta),
        squeezing_q=sq_q,
        squeezing_p=sq_p,
        stable=stable,
        variances=variances,
        boundary=abs(nu - 0.5) <= BOUNDARY_TOL,
    )
