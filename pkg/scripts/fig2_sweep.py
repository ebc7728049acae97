"""Log-negativity against detuning at zero temperature, plus the refined optimum.

    python scripts/fig2_sweep.py [--out results/] [--points 400]
"""
import argparse
import json
from pathlib import Path

import numpy as np

from mirrorent.config import load_config
from mirrorent.sweep import analyze_delta, optimize_detuning, run_sweep, write_rows

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--points", type=int, default=400)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    raw = json.loads((HERE / "configs" / "fig2_sweep.json").read_text())
    raw["sweep"]["points"] = args.points
    cfg = load_config(raw)
    rows = run_sweep(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(rows, out / "fig2_sweep.csv")

    x = np.array([r.param1 for r in rows])
    en = np.array([r.log_negativity if r.stable else np.nan for r in rows])
    pos = np.flatnonzero(en > 0)
    best = optimize_detuning(cfg.params())
    print(f"E_N > 0 for Delta/Omega in [{x[pos[0]]:.4f}, {x[pos[-1]]:.4f}]")
    print(f"max E_N = {best.log_negativity:.4e} at Delta/Omega = {best.delta_over_omega:.6f}")
    at_opt = analyze_delta(cfg.params(), best.delta_opt_over_omega * cfg.params().mirror1.omega)
    print(f"closed-form optimum Delta_opt/Omega = {best.delta_opt_over_omega:.4f}, E_N there = {at_opt.log_negativity:.4e}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, en)
    ax.axvline(best.delta_opt_over_omega, ls="--", lw=0.8, color="gray")
    ax.set_xlabel(r"$\Delta/\Omega$")
    ax.set_ylabel(r"$E_N$")
    fig.tight_layout()
    fig.savefig(out / "fig2_sweep.png", dpi=150)


if __name__ == "__main__":
    main()
