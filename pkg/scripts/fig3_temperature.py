"""Log-negativity against bath temperature at Delta = 0.8125 Omega.

    python scripts/fig3_temperature.py [--out results/]
"""
import argparse
import json
from pathlib import Path

import numpy as np

from mirrorent.config import load_config
from mirrorent.sweep import run_sweep, write_rows

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--tmax", type=float, default=1e-2)
    ap.add_argument("--points", type=int, default=81)
    args = ap.parse_args()

    raw = json.loads((HERE / "configs" / "fig3_temperature.json").read_text())
    raw["sweep"].update(stop=args.tmax, points=args.points)
    rows = run_sweep(load_config(raw))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(rows, out / "fig3_temperature.csv")

    T = np.array([r.param1 for r in rows])
    en = np.array([r.log_negativity for r in rows])
    zero = np.flatnonzero(en == 0)
    print(f"E_N(T = {T[0]:.1e} K) = {en[0]:.4e}")
    if len(zero):
        print(f"E_N = 0 from T = {T[zero[0]]:.3e} K (last positive at {T[zero[0] - 1]:.3e} K)")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(T, en)
    ax.set_xlabel("T (K)")
    ax.set_ylabel(r"$E_N$")
    fig.tight_layout()
    fig.savefig(out / "fig3_temperature.png", dpi=150)


if __name__ == "__main__":
    main()
