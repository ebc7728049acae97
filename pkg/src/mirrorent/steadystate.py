"""Stationary covariance matrix: Lyapunov solve, closed forms, mirror reduction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .dynamics import (
    Basis,
    LinearModel,
    build_cmrel,
    cmrel_rotation,
    drift_cmrel,
    routh_hurwitz_s,
    stability,
)
from .errors import SingularSystem, Unstable
from .model import DerivedParams, PhysicalParams, derive

LYAP_RESIDUAL_RTOL = 1e-9


@dataclass(frozen=True)
class FullCM:
    C: np.ndarray
    basis: Basis


@dataclass(frozen=True)
class MirrorCM:
    """Reduced 4x4 covariance of the mirrors, order (q1, p1, q2, p2)."""

    V: np.ndarray

    @property
    def N1(self):
        return self.V[:2, :2]

    @property
    def N2(self):
        return self.V[2:, 2:]

    @property
    def N12(self):
        return self.V[:2, 2:]

    def symplectic_eigenvalues(self) -> np.ndarray:
        omega = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        ev = np.abs(np.linalg.eigvals(1j * omega @ self.V))
        return np.sort(ev)[::2]

    def is_physical(self, tol=1e-10) -> bool:
        return bool(np.all(self.symplectic_eigenvalues() >= 0.5 - tol))

    def swapped(self) -> "MirrorCM":
        """Same state with the mirror labels exchanged."""
        P = np.zeros((4, 4))
        P[0, 2] = P[1, 3] = P[2, 0] = P[3, 1] = 1.0
        return MirrorCM(P @ self.V @ P.T)


@dataclass(frozen=True)
class StationaryVariances:
    q_cm_var: float
    p_cm_var: float
    q_r_var: float
    p_r_var: float


@dataclass(frozen=True)
class AnalyticVariances:
    b_p: float
    d_p: float
    b_q: float
    d_q: float
    q_r_var: float
    p_r_var: float
    q_cm_var: float
    p_cm_var: float
    s1: float
    s2: float


def lyapunov_steady(model: LinearModel) -> FullCM:
    """Unique symmetric C with A C + C A^T = -D, by a 36x36 vectorized solve.

    Rates are divided by `model.rate_scale` first to keep the system well
    conditioned; C is dimensionless and unaffected.
    """
    report = stability(model)
    if not report.stable_eig:
        raise Unstable(f"drift matrix not Hurwitz (max Re lambda = {report.margin:.3e})")
    scale = model.rate_scale
    A = model.A / scale
    D = model.D / scale
    n = A.shape[0]
    eye = np.eye(n)
    K = np.kron(A, eye) + np.kron(eye, A)
    try:
        lu = lu_factor(K, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem("Lyapunov operator is singular", condition=np.inf) from exc
    C = lu_solve(lu, -D.reshape(-1)).reshape(n, n)
    C = (C + C.T) / 2
    # entanglement sits in nu_minus - 1/2, so squeeze out the last digits
    for _ in range(2):
        R = A @ C + C @ A.T + D
        C = C - lu_solve(lu, R.reshape(-1)).reshape(n, n)
        C = (C + C.T) / 2
    resid = np.abs(A @ C + C @ A.T + D).sum(axis=1).max()
    dnorm = np.abs(D).sum(axis=1).max()
    if resid >= LYAP_RESIDUAL_RTOL * max(dnorm, np.finfo(float).tiny):
        raise SingularSystem(
            f"Lyapunov residual {resid:.3e} too large", condition=float(np.linalg.cond(K))
        )
    return FullCM(C, model.basis)


def analytic_variances(omega, gamma, kappa, delta, G, nbar) -> AnalyticVariances:
    """Closed-form stationary variances of the equal-mirror system.

    The relative-position coefficient is

        b_q = G^2 { 2 kappa (Delta^2 + kappa^2) { [Delta^2 + (gamma + kappa)^2] (kappa Omega + gamma Delta)
                    + Omega^2 (gamma + kappa) (Omega - 2 Delta) }
                  + Delta G^2 Omega (gamma + 2 kappa) [Delta gamma - kappa (Omega - 2 Delta)] } / (2 s1 s2)

    i.e. '+' joins the two terms and the second carries a single power of
    Omega (dimensionally required); this form reproduces the Lyapunov solution.
    """
    s1, s2 = routh_hurwitz_s(omega, gamma, kappa, delta, G)
    if not (s1 > 0 and s2 > 0):
        raise Unstable(f"stability conditions violated: s1={s1:.3e}, s2={s2:.3e}")
    g, k, O, D = gamma, kappa, omega, delta
    b_p = G**2 * k * (D**2 * (g + k) + k * (g * k + k**2 + O**2) - D * O * (g + 2 * k)) / s1
    d_p = 1 - 2 * G**2 * k * O * D * (g + 2 * k) / s1
    brace = 2 * k * (D**2 + k**2) * ((D**2 + (g + k) ** 2) * (k * O + g * D) + O**2 * (g + k) * (O - 2 * D))
    b_q = G**2 * (brace + D * G**2 * O * (g + 2 * k) * (D * g - k * (O - 2 * D))) / (2 * s1 * s2)
    d_q = 1 + D * G**2 * (s1 - 2 * g * k * O**2 * (O**2 + 2 * g * k + 4 * k**2) - 4 * k**2 * O**2 * (D**2 + k**2)) / (s1 * s2)
    return AnalyticVariances(
        b_p=b_p,
        d_p=d_p,
        b_q=b_q,
        d_q=d_q,
        q_r_var=0.5 + b_q + d_q * nbar,
        p_r_var=0.5 + b_p + d_p * nbar,
        q_cm_var=0.5 + nbar,
        p_cm_var=0.5 + nbar,
        s1=s1,
        s2=s2,
    )


def analytic_variances_for(derived: DerivedParams) -> AnalyticVariances:
    p = derived.params
    m = p.mirror1
    return analytic_variances(m.omega, m.gamma, p.kappa, derived.delta, derived.G, derived.nbar1)


def cmrel_variances(full: FullCM, derived: DerivedParams) -> StationaryVariances:
    """Centre-of-mass and relative variances from a full CM in either basis."""
    C = full.C
    if full.basis is Basis.PER_MIRROR:
        S = cmrel_rotation(derived.r1, derived.r2)
        C = S @ C @ S.T
    return StationaryVariances(float(C[0, 0]), float(C[1, 1]), float(C[2, 2]), float(C[3, 3]))


def mirror_cm_from_variances(q_cm, p_cm, q_r, p_r, r1, r2) -> MirrorCM:
    """Mirror CM of the decoupled form: q-q and p-p blocks only."""
    V = np.zeros((4, 4))
    V[0, 0] = r1**2 * q_cm + r2**2 * q_r
    V[1, 1] = r1**2 * p_cm + r2**2 * p_r
    V[2, 2] = r2**2 * q_cm + r1**2 * q_r
    V[3, 3] = r2**2 * p_cm + r1**2 * p_r
    V[0, 2] = V[2, 0] = r1 * r2 * (q_cm - q_r)
    V[1, 3] = V[3, 1] = r1 * r2 * (p_cm - p_r)
    return MirrorCM(V)


def mirror_cm_from_full(full: FullCM, derived: DerivedParams) -> MirrorCM:
    """Trace out the cavity.

    A per-mirror CM is simply cut down to its leading 4x4 block. A cm/rel CM
    is reassembled from its four diagonal variances, which assumes the
    centre of mass decouples (equal frequencies and damping).
    """
    if full.basis is Basis.PER_MIRROR:
        V = full.C[:4, :4].copy()
        return MirrorCM((V + V.T) / 2)
    C = full.C
    return mirror_cm_from_variances(C[0, 0], C[1, 1], C[2, 2], C[3, 3], derived.r1, derived.r2)


@dataclass(frozen=True)
class CrossValidation:
    deviations: dict
    analytic: AnalyticVariances
    numeric: tuple

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())


def compare_routes(omega, gamma, kappa, delta, G, nbar) -> CrossValidation:
    """Relative deviation of the closed forms from the Lyapunov solution."""
    an = analytic_variances(omega, gamma, kappa, delta, G, nbar)
    thermal = gamma * (2 * nbar + 1)
    model = LinearModel(
        drift_cmrel(omega, gamma, kappa, delta, G),
        np.diag([0.0, thermal, 0.0, thermal, kappa, kappa]),
        Basis.CM_REL,
    )
    C = lyapunov_steady(model).C
    numeric = (C[0, 0], C[1, 1], C[2, 2], C[3, 3])
    pairs = {
        "q_cm": (an.q_cm_var, C[0, 0]),
        "p_cm": (an.p_cm_var, C[1, 1]),
        "q_r": (an.q_r_var, C[2, 2]),
        "p_r": (an.p_r_var, C[3, 3]),
    }
    dev = {k: abs(a - b) / max(b, 1e-30) for k, (a, b) in pairs.items()}
    return CrossValidation(dev, an, tuple(float(x) for x in numeric))


def cross_validate(params: PhysicalParams, delta: float) -> CrossValidation:
    derived = derive(params, delta)
    if not params.equal_mirrors:
        build_cmrel(derived, delta)  # raises UnequalMirrors
    m = params.mirror1
    return compare_routes(m.omega, m.gamma, params.kappa, delta, derived.G, derived.nbar1)
