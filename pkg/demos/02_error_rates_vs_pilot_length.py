"""Detection error rates versus pilot length at several loads.

Longer pilots reduce contamination between the non-orthogonal sequences, so
both error rates drop steeply with tau; higher loads need longer pilots.
Desk-scale version of the headline error-rate sweep.

Run:  python3 demos/02_error_rates_vs_pilot_length.py
"""

import csv
import os
import time

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

import irsa_lab as il
from irsa_lab.harness import aggregate, run_monte_carlo

# --- configuration (edit here; no CLI) ---
TAUS = [5, 10, 15, 20, 25]
LOADS = [1.0, 2.0]
ANTENNAS = 16
RUNS = 10
SEED = 7
OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
# ------------------------------------------

os.makedirs(OUT_DIR, exist_ok=True)

t0 = time.perf_counter()
rows = []
for L in LOADS:
    for tau in TAUS:
        cfg = il.SystemConfig(L=L, tau=tau, N=ANTENNAS, runs=RUNS, seed=SEED,
                              decode=False)
        agg = aggregate(run_monte_carlo(cfg))
        rows.append({"L": L, "tau": tau, "fpr": agg["fpr"], "fnr": agg["fnr"]})
        print(f"L={L} tau={tau:2d}: FNR={agg['fnr']:.4f} FPR={agg['fpr']:.4f}"
              f"  ({time.perf_counter() - t0:5.1f}s)")

csv_path = os.path.join(OUT_DIR, "02_error_rates.csv")
with open(csv_path, "w", newline="") as fh:
    writer = csv.DictWriter(fh, fieldnames=["L", "tau", "fpr", "fnr"])
    writer.writeheader()
    writer.writerows(rows)
print(f"saved {csv_path}")

fig, ax = plt.subplots(figsize=(6.5, 4.5))
floor = 1e-5  # plotting floor for exact zeros
for L in LOADS:
    pts = [r for r in rows if r["L"] == L]
    ax.semilogy(TAUS, [max(r["fnr"], floor) for r in pts], "o-",
                label=f"FNR, L={L}")
    ax.semilogy(TAUS, [max(r["fpr"], floor) for r in pts], "s--",
                label=f"FPR, L={L}")
ax.set_xlabel("pilot length")
ax.set_ylabel("error rate")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
ax.set_title(f"Activity detection errors vs pilot length (N={ANTENNAS})")
fig.tight_layout()
png_path = os.path.join(OUT_DIR, "02_error_rates.png")
fig.savefig(png_path, dpi=150)
print(f"saved {png_path}")
