"""Randomized self-consistency batteries behind the `validate` command."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Basis, LinearModel, drift_cmrel, routh_hurwitz_s, stability
from .entanglement import log_negativity, nu_minus, rwa_variances, simon_criterion
from .errors import Unstable
from .steadystate import (
    StationaryVariances,
    analytic_variances,
    compare_routes,
    mirror_cm_from_variances,
)


@dataclass(frozen=True)
class BatteryResult:
    name: str
    passed: bool
    checked: int
    failures: int
    worst: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.checked} checked, {self.failures} failed, worst {self.worst:.3e} {self.detail}".rstrip()


def random_equal_mirror_point(rng: np.random.Generator, decades: float = 4.0) -> tuple:
    """(omega, gamma, kappa, delta, G, nbar) with rates log-uniform over `decades` around omega."""
    omega = 10 ** rng.uniform(3, 8)
    half = decades / 2
    gamma, kappa, G = omega * 10 ** rng.uniform(-half, half, size=3)
    delta = omega * rng.uniform(0, 2)
    while delta == 0:
        delta = omega * rng.uniform(0, 2)
    nbar = 0.0 if rng.random() < 0.1 else float(rng.uniform(0, 1e3))
    return omega, gamma, kappa, delta, G, nbar


def _cmrel_model(omega, gamma, kappa, delta, G, nbar) -> LinearModel:
    thermal = gamma * (2 * nbar + 1)
    return LinearModel(
        drift_cmrel(omega, gamma, kappa, delta, G),
        np.diag([0.0, thermal, 0.0, thermal, kappa, kappa]),
        Basis.CM_REL,
    )


def random_stable_point(rng, decades: float = 4.0, max_tries: int = 10_000) -> tuple:
    for _ in range(max_tries):
        pt = random_equal_mirror_point(rng, decades)
        s1, s2 = routh_hurwitz_s(*pt[:5])
        if s1 > 0 and s2 > 0 and stability(_cmrel_model(*pt)).stable:
            return pt
    raise RuntimeError("no stable point found")


def cross_validate_battery(n: int = 200, seed: int = 1, rtol: float = 1e-8) -> BatteryResult:
    rng = np.random.default_rng(seed)
    worst, fails = 0.0, 0
    for _ in range(n):
        cv = compare_routes(*random_stable_point(rng))
        worst = max(worst, cv.max_deviation)
        fails += cv.max_deviation > rtol
    return BatteryResult("closed forms vs Lyapunov", fails == 0, n, fails, worst)


def random_stationary_variances(rng: np.random.Generator) -> StationaryVariances:
    """Physical decoupled-form variances: each (q, p) pair satisfies q p >= 1/4."""

    def pair():
        a = rng.uniform(-2.5, 2.5)
        excess = rng.exponential(0.3) if rng.random() < 0.8 else 0.0
        return 0.5 * math.exp(a + excess), 0.5 * math.exp(-a)

    q_cm, p_cm = pair()
    q_r, p_r = pair()
    return StationaryVariances(q_cm, p_cm, q_r, p_r)


def criterion_equivalence_battery(n: int = 2000, seed: int = 2, band: float = 1e-9) -> BatteryResult:
    """Simon's condition at eta = 1 against nu_minus < 1/2 for equal masses."""
    rng = np.random.default_rng(seed)
    r = math.sqrt(0.5)
    fails = skipped = 0
    for _ in range(n):
        v = random_stationary_variances(rng)
        nu = nu_minus(mirror_cm_from_variances(v.q_cm_var, v.p_cm_var, v.q_r_var, v.p_r_var, r, r))
        if abs(nu - 0.5) <= band:
            skipped += 1
            continue
        fails += simon_criterion(v, 1.0) != (nu < 0.5)
    return BatteryResult("Simon vs nu_minus", fails == 0, n - skipped, fails, float(fails), f"({skipped} on the boundary)")


def rwa_check(ratio: float = 1e3, nbar_values=(0.0, 1.0, 100.0), rtol: float = 0.01) -> BatteryResult:
    """Resonant fast-mirror limit: relative variances and E_N = 0."""
    G, kappa, gamma = 1.0, 0.7, 0.3
    omega = ratio * max(G, kappa, gamma)
    worst, fails = 0.0, 0
    for nbar in nbar_values:
        an = analytic_variances(omega, gamma, kappa, omega, G, nbar)
        ref_q, ref_p = rwa_variances(G, gamma, kappa, nbar)
        dev = max(abs(an.q_r_var / ref_q - 1), abs(an.p_r_var / ref_p - 1))
        r = math.sqrt(0.5)
        en = log_negativity(mirror_cm_from_variances(an.q_cm_var, an.p_cm_var, an.q_r_var, an.p_r_var, r, r))
        worst = max(worst, dev)
        fails += dev > rtol or en != 0.0
    return BatteryResult("RWA limit", fails == 0, len(nbar_values), fails, worst)


def stability_oracle_battery(n: int = 2000, seed: int = 3) -> BatteryResult:
    """Routh-Hurwitz (s1, s2) verdict against eigenvalues, knife-edge points excluded."""
    rng = np.random.default_rng(seed)
    fails = skipped = 0
    for _ in range(n):
        omega, gamma, kappa, delta, G, nbar = random_equal_mirror_point(rng)
        rep = stability(_cmrel_model(omega, gamma, kappa, delta, G, nbar))
        if rep.marginal:
            skipped += 1
            continue
        s1, s2 = routh_hurwitz_s(omega, gamma, kappa, delta, G)
        fails += (s1 > 0 and s2 > 0) != rep.stable_eig
    return BatteryResult("Routh-Hurwitz vs eigenvalues", fails == 0, n - skipped, fails, float(fails), f"({skipped} marginal)")


def run_all(scale: float = 1.0) -> list[BatteryResult]:
    k = lambda n: max(10, int(n * scale))
    return [
        cross_validate_battery(k(200)),
        criterion_equivalence_battery(k(2000)),
        rwa_check(),
        stability_oracle_battery(k(2000)),
    ]
