"""Command-line front end: analyze, sweep, optimize, validate, simulate."""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict

import numpy as np

from .config import RunConfig, load_config
from .dynamics import build_general, stability
from .entanglement import assess, optimal_detuning
from .errors import ConfigError, MirrorEntError
from .model import derive
from .semiclassical import solve_branches
from .steadystate import cmrel_variances, lyapunov_steady, mirror_cm_from_full
from .sweep import optimize_detuning, run_sweep, write_rows
from .validation import run_all

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_VALIDATION = 0, 2, 3, 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _effective_detunings(cfg: RunConfig, params):
    kind, value = cfg.detuning()
    if kind == "delta":
        return [value]
    return [b.delta_eff for b in solve_branches(params, value)]


def cmd_analyze(cfg: RunConfig, out=None, stream=None) -> int:
    """Full pipeline at the configured point; one block per semiclassical branch."""
    stream = stream or sys.stdout
    params = cfg.params()
    omega = params.mirror1.omega
    blocks, any_stable = [], False
    for delta in _effective_detunings(cfg, params):
        derived = derive(params, delta)
        model = build_general(derived, delta)
        rep = stability(model)
        block = {
            "delta": delta,
            "delta_over_omega": delta / omega,
            "G": derived.G,
            "alpha_s": derived.alpha_s,
            "nbar": [derived.nbar1, derived.nbar2],
            "eta": derived.eta,
            "s1": rep.s1,
            "s2": rep.s2,
            "max_re_eigenvalue": rep.margin,
            "stable": rep.stable,
        }
        print(f"Delta/Omega = {delta / omega:.6f}  G = {derived.G:.6e} 1/s  eta = {derived.eta:.6f}", file=stream)
        s12 = "" if rep.s1 is None else f"  s1 = {rep.s1:.6e}  s2 = {rep.s2:.6e}"
        print(f"  stable = {rep.stable}  max Re(lambda) = {rep.margin:.6e}{s12}", file=stream)
        if rep.stable:
            any_stable = True
            full = lyapunov_steady(model)
            var = cmrel_variances(full, derived)
            V = mirror_cm_from_full(full, derived)
            report = assess(V, var, derived.eta, derived.nbar1, True)
            min_symp = float(V.symplectic_eigenvalues().min())
            block.update(
                q_r_var=var.q_r_var,
                p_r_var=var.p_r_var,
                q_cm_var=var.q_cm_var,
                p_cm_var=var.p_cm_var,
                nu_minus=report.nu_minus,
                log_negativity=report.log_negativity,
                simon_entangled=report.simon_entangled,
                squeezing_q=report.squeezing_q,
                squeezing_p=report.squeezing_p,
                min_symplectic=min_symp,
                physical=V.is_physical(),
            )
            print(
                f"  <q_r^2> = {var.q_r_var:.10g}  <p_r^2> = {var.p_r_var:.10g}  "
                f"<q_cm^2> = {var.q_cm_var:.10g}  <p_cm^2> = {var.p_cm_var:.10g}",
                file=stream,
            )
            print(
                f"  nu_minus = {report.nu_minus:.12g}  E_N = {report.log_negativity:.6e}  "
                f"Simon entangled = {report.simon_entangled}",
                file=stream,
            )
            # the white-noise bath is not completely positive at low T; say so when it shows
            print(f"  mirror CM physical = {V.is_physical()}  min symplectic eigenvalue = {min_symp:.12g}", file=stream)
        blocks.append(block)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(_jsonable({"branches": blocks}), fh, indent=1, sort_keys=True)
            fh.write("\n")
    return EXIT_OK if any_stable else EXIT_UNSTABLE


def cmd_sweep(cfg: RunConfig, out=None, fmt=None, jobs: int = 1, stream=None) -> int:
    stream = stream or sys.stdout
    if cfg.sweep is None:
        raise ConfigError("sweep needs a 'sweep' block")
    path = out or cfg.output.path
    if not path:
        raise ConfigError("no output path (config output.path or --out)")
    rows = run_sweep(cfg, jobs=jobs)
    fmt = fmt or cfg.output.format
    meta = {"sweep": asdict(cfg.sweep), "sweep2": asdict(cfg.sweep2) if cfg.sweep2 else None}
    write_rows(rows, path, fmt, meta)
    errors = sum(r.error is not None for r in rows)
    unstable = sum(r.stable is False for r in rows)
    print(f"wrote {len(rows)} rows to {path} ({unstable} unstable, {errors} failed)", file=stream)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, out=None, points: int = 400, refine: bool = True, stream=None) -> int:
    stream = stream or sys.stdout
    params = cfg.params()
    res = optimize_detuning(params, points=points, refine=refine)
    if res.delta_over_omega is None:
        print("no entangled detuning found on the grid: E_N* = 0", file=stream)
    else:
        print(
            f"Delta*/Omega = {res.delta_over_omega:.9f}  E_N* = {res.log_negativity:.6e}  "
            f"Delta_opt/Omega = {res.delta_opt_over_omega:.6f}  |gap|/Omega = {res.gap:.4f}",
            file=stream,
        )
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(asdict(res)), fh, indent=1, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_validate(scale: float = 1.0, stream=None) -> int:
    stream = stream or sys.stdout
    results = run_all(scale)
    for r in results:
        print(r.line(), file=stream)
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "VALIDATION FAILED", file=stream)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_simulate(cfg: RunConfig, args, stream=None) -> int:
    stream = stream or sys.stdout
    from .trajectory import ReadoutSpec, SamplerSpec, reconstruct_cm, sample_stationary, simulate_readout

    params = cfg.params()
    deltas = _effective_detunings(cfg, params)
    delta = deltas[0]
    model = build_general(derive(params, delta), delta)
    if not stability(model).stable:
        print("point is not stable; nothing to simulate", file=stream)
        return EXIT_UNSTABLE
    seed = cfg.options.seed if args.seed is None else args.seed
    exact = lyapunov_steady(model).C
    fmt = args.format or cfg.output.format
    if args.readout:
        g2, kappa2 = (float(x) for x in args.readout.split(","))
        tau = args.bin or 0.01 * 2 * math.pi / params.mirror1.omega
        h = args.dt or tau
        spec = SamplerSpec(model, h, args.burn_in, args.steps, seed, args.trajectories, "stationary")
        readout = ReadoutSpec.symmetric(g2, kappa2, tau)
        recs = simulate_readout(spec, readout)
        rec = reconstruct_cm(recs)
        doc = {
            "V_hat": rec.cm.V,
            "stderr": rec.stderr,
            "V_exact": exact[:4, :4],
            "nu_minus": rec.nu_minus,
            "nu_stderr": rec.nu_stderr,
            "log_negativity": rec.log_negativity,
            "records": len(recs),
            "bin_time": tau,
        }
        print(f"nu_minus = {rec.nu_minus:.8f} +- {rec.nu_stderr:.2e}  E_N = {rec.log_negativity:.4e}", file=stream)
        if args.out:
            with open(args.out, "w", newline="", encoding="utf-8") as fh:
                if fmt == "csv":
                    fh.write("X1,Y1,X2,Y2\n")
                    for row in recs.stacked().T:
                        fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
                else:
                    json.dump(_jsonable(doc), fh, indent=1, sort_keys=True)
                    fh.write("\n")
        return EXIT_OK
    h = args.dt or 0.05 / float(np.abs(model.A).sum(axis=1).max())
    spec = SamplerSpec(model, h, args.burn_in, args.steps, seed, args.trajectories, "zeros" if args.burn_in else "stationary")
    est = sample_stationary(spec)
    z = np.abs(est.C - exact) / np.where(est.stderr > 0, est.stderr, np.inf)
    print(f"samples = {est.n_samples}  max |z| vs Lyapunov = {z.max():.2f}", file=stream)
    if args.out:
        labels = model.basis.labels
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            if fmt == "csv":
                fh.write("row,col,estimate,stderr,lyapunov\n")
                for i in range(6):
                    for j in range(i, 6):
                        vals = (est.C[i, j], est.stderr[i, j], exact[i, j])
                        fh.write(f"{labels[i]},{labels[j]}," + ",".join(format(float(v), ".17g") for v in vals) + "\n")
            else:
                json.dump(_jsonable({"C": est.C, "stderr": est.stderr, "lyapunov": exact, "samples": est.n_samples}), fh, indent=1, sort_keys=True)
                fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mirrorent", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1)

    common(sub.add_parser("analyze", help="single point"))
    common(sub.add_parser("sweep", help="1-D or 2-D parameter sweep"))
    p = sub.add_parser("optimize", help="maximize E_N over the detuning")
    common(p)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--no-refine", action="store_true")
    p = sub.add_parser("validate", help="self-consistency batteries")
    common(p, config=False)
    p.add_argument("--scale", type=float, default=1.0, help="battery size multiplier")
    p = sub.add_parser("simulate", help="Monte-Carlo trajectories / readout")
    common(p)
    p.add_argument("--steps", type=int, default=100_000, help="recorded samples (or bins)")
    p.add_argument("--dt", type=float, help="step h in seconds")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--bin", type=float, help="readout bin time in seconds")
    p.add_argument("--readout", help="g2,kappa2 (same for both mirrors)")
    p.add_argument("--trajectories", type=int, default=1, help="parallel chains")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.scale)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = RunConfig(cfg.raw, cfg.sweep, cfg.sweep2, cfg.output, type(cfg.options)(cfg.options.use_analytic, args.seed))
        if args.command == "analyze":
            return cmd_analyze(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.format, args.jobs)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out, args.points, not args.no_refine)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return cmd_simulate(cfg, args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MirrorEntError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE if args.command == "analyze" else 1


if __name__ == "__main__":
    sys.exit(main())
