"""Point evaluation, 1-D/2-D sweeps, table output and the detuning optimizer."""
from __future__ import annotations

import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .config import RunConfig, detuning_from_raw, params_from_raw, set_dotted
from .dynamics import build_general, stability
from .entanglement import log_negativity_from_nu, nu_minus, optimal_detuning
from .errors import MirrorEntError
from .model import PhysicalParams, derive
from .semiclassical import solve_branches
from .steadystate import (
    analytic_variances,
    cmrel_variances,
    lyapunov_steady,
    mirror_cm_from_full,
    mirror_cm_from_variances,
)

CSV_HEADER = ("param1", "param2", "stable", "s1", "s2", "qr", "pr", "qcm", "pcm", "nu_minus", "EN", "branches")


@dataclass(frozen=True)
class SweepRow:
    """One (point, semiclassical branch). Unstable rows leave the state fields as None."""

    param1: float | None
    param2: float | None
    stable: bool | None
    s1: float | None = None
    s2: float | None = None
    q_r_var: float | None = None
    p_r_var: float | None = None
    q_cm_var: float | None = None
    p_cm_var: float | None = None
    nu_minus: float | None = None
    log_negativity: float | None = None
    branch_count: int | None = None
    delta: float | None = None
    error: str | None = None

    def csv_fields(self) -> list[str]:
        vals = (
            self.param1,
            self.param2,
            self.stable,
            self.s1,
            self.s2,
            self.q_r_var,
            self.p_r_var,
            self.q_cm_var,
            self.p_cm_var,
            self.nu_minus,
            self.log_negativity,
            self.branch_count,
        )
        return [_fmt(v) for v in vals]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def analyze_delta(params: PhysicalParams, delta: float, use_analytic: bool = False, branches: int = 1, p1=None, p2=None) -> SweepRow:
    """Full pipeline at one effective detuning."""
    derived = derive(params, delta)
    model = build_general(derived, delta)
    rep = stability(model)
    base = dict(param1=p1, param2=p2, s1=rep.s1, s2=rep.s2, branch_count=branches, delta=float(delta))
    if not rep.stable:
        return SweepRow(stable=False, **base)
    if use_analytic and params.equal_mirrors:
        m = params.mirror1
        an = analytic_variances(m.omega, m.gamma, params.kappa, delta, derived.G, derived.nbar1)
        var = (an.q_r_var, an.p_r_var, an.q_cm_var, an.p_cm_var)
        V = mirror_cm_from_variances(an.q_cm_var, an.p_cm_var, an.q_r_var, an.p_r_var, derived.r1, derived.r2)
    else:
        full = lyapunov_steady(model)
        sv = cmrel_variances(full, derived)
        var = (sv.q_r_var, sv.p_r_var, sv.q_cm_var, sv.p_cm_var)
        V = mirror_cm_from_full(full, derived)
    nu = nu_minus(V)
    return SweepRow(
        stable=True,
        q_r_var=var[0],
        p_r_var=var[1],
        q_cm_var=var[2],
        p_cm_var=var[3],
        nu_minus=nu,
        log_negativity=log_negativity_from_nu(nu),
        **base,
    )


def evaluate_point(raw: dict, use_analytic: bool = False, p1=None, p2=None) -> list[SweepRow]:
    """Rows for one configuration point: one per semiclassical branch.

    Failures are caught and returned as an error row so a sweep never aborts.
    """
    try:
        params = params_from_raw(raw)
        kind, value = detuning_from_raw(raw)
        if kind == "delta":
            return [analyze_delta(params, value, use_analytic, 1, p1, p2)]
        sol = solve_branches(params, value)
        return [analyze_delta(params, b.delta_eff, use_analytic, len(sol), p1, p2) for b in sol]
    except (MirrorEntError, ValueError, ArithmeticError) as exc:
        return [SweepRow(p1, p2, None, error=f"{type(exc).__name__}: {exc}")]


def sweep_points(cfg: RunConfig) -> list[tuple[dict, float, float | None]]:
    """(raw point, value1, value2) in output order: axis 1 outer, axis 2 inner."""
    if cfg.sweep is None:
        return [(cfg.raw, None, None)]
    a1 = [float(v) for v in cfg.sweep.values()]
    a2 = [None] if cfg.sweep2 is None else [float(v) for v in cfg.sweep2.values()]
    pts = []
    for v1, v2 in itertools.product(a1, a2):
        raw = set_dotted(cfg.raw, cfg.sweep.parameter, v1)
        if v2 is not None:
            raw = set_dotted(raw, cfg.sweep2.parameter, v2)
        pts.append((raw, v1, v2))
    return pts


def _eval_task(task):
    raw, v1, v2, use_analytic = task
    return evaluate_point(raw, use_analytic, v1, v2)


def run_sweep(cfg: RunConfig, jobs: int = 1) -> list[SweepRow]:
    """Rows in index order; serial and parallel runs give identical results."""
    tasks = [(raw, v1, v2, cfg.options.use_analytic) for raw, v1, v2 in sweep_points(cfg)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_eval_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        chunks = [_eval_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows) -> str:
    buf = io.StringIO(newline="")
    buf.write(",".join(CSV_HEADER) + "\n")
    for r in rows:
        buf.write(",".join(r.csv_fields()) + "\n")
    return buf.getvalue()


def rows_to_json(rows, meta: dict | None = None) -> str:
    doc = {"columns": list(CSV_HEADER), "rows": [asdict(r) for r in rows]}
    if meta:
        doc["meta"] = meta
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_rows(rows, path, fmt: str = "csv", meta: dict | None = None) -> None:
    text = rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows, meta)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


@dataclass(frozen=True)
class OptimizeResult:
    delta_over_omega: float | None
    log_negativity: float
    delta_opt_over_omega: float
    gap: float | None
    grid_points: int
    refined: bool


def _signed_log_negativity(params: PhysicalParams, x: float) -> float:
    """-ln(2 nu_minus) at Delta = x*Omega_1, unclipped; -inf where unstable or failing."""
    try:
        row = analyze_delta(params, x * params.mirror1.omega)
    except MirrorEntError:
        return -math.inf
    return -math.log(2 * row.nu_minus) if row.stable else -math.inf


def optimize_detuning(params: PhysicalParams, points: int = 400, refine: bool = True, xtol: float = 1e-6) -> OptimizeResult:
    """Maximize E_N over Delta in (0, 2 Omega]: grid scan, then golden-section refinement.

    The refinement shrinks the bracket around the best grid point until it is
    narrower than xtol*Omega. Without entanglement anywhere on the grid the
    optimum is reported as None with E_N = 0.
    """
    if points < 200:
        raise ValueError("use at least 200 grid points")
    m = params.mirror1
    x_opt = optimal_detuning(m.omega, m.gamma, params.kappa) / m.omega
    xs = 2.0 * np.arange(1, points + 1) / points
    fs = np.array([_signed_log_negativity(params, x) for x in xs])
    i = int(np.argmax(fs))
    if not fs[i] > 0:
        return OptimizeResult(None, 0.0, x_opt, None, points, False)
    x_best, f_best, refined = float(xs[i]), float(fs[i]), False
    if refine and 0 < i < points - 1 and fs[i - 1] < fs[i] and fs[i + 1] < fs[i]:
        res = minimize_scalar(
            lambda x: -_signed_log_negativity(params, x),
            bracket=(xs[i - 1], xs[i], xs[i + 1]),
            method="golden",
            # scipy stops once the bracket is below xtol*(|x1|+|x2|), and x <= 2
            options={"xtol": xtol / 4},
        )
        if -res.fun >= f_best:
            x_best, f_best, refined = float(res.x), float(-res.fun), True
    return OptimizeResult(x_best, max(0.0, f_best), x_opt, abs(x_best - x_opt), points, refined)
