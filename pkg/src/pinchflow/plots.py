"""Emits standalone matplotlib scripts for an analyzed run.

Nothing is rendered here; each script reads the run's CSV files through
paths relative to its own location and saves a PNG next to itself.
"""

from __future__ import annotations

from pathlib import Path

from pinchflow.errors import RunDataError

_PRELUDE = '''"""{title}"""
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
RUN = HERE.parent
'''

_FIT = '''
fit = np.genfromtxt(RUN / "series" / "fit_series.csv", delimiter=",", names=True)
tau = fit["tau"]
'''

_BODIES = {
    "profile_evolution": ('Unscaled profiles u(r, t) near the axis.', '''
manifest = json.loads((RUN / "manifest.json").read_text())
names = manifest["snapshots"]
fig, ax = plt.subplots()
for name in names[:: max(1, len(names) // 12)] + names[-1:]:
    data = np.loadtxt(RUN / name, delimiter=",", comments="#")
    keep = data[:, 0] <= 3.0
    ax.plot(data[keep, 0], data[keep, 1], lw=0.8)
ax.set_xlabel("r")
ax.set_ylabel("u")
fig.savefig(HERE / "profile_evolution.png", dpi=150)
'''),
    "a_tau": ('Scale parameter a(tau) and the correction (a - 1/2) tau.', _FIT + '''
fig, axes = plt.subplots(2, 1, sharex=True)
axes[0].plot(tau, fit["a"])
axes[0].axhline(0.5, color="k", lw=0.5)
axes[0].set_ylabel("a")
axes[1].plot(tau, (fit["a"] - 0.5) * tau)
axes[1].set_ylabel("(a - 1/2) tau")
axes[1].set_xlabel("tau")
fig.savefig(HERE / "a_tau.png", dpi=150)
'''),
    "tau_b": ('tau * b(tau) against the generic value 1.', _FIT + '''
fig, ax = plt.subplots()
ax.plot(tau, tau * fit["b"])
ax.axhline(1.0, color="k", lw=0.5)
ax.axhspan(0.75, 1.25, alpha=0.1)
ax.set_xlabel("tau")
ax.set_ylabel("tau b")
fig.savefig(HERE / "tau_b.png", dpi=150)
'''),
    "eta_norms": ('Weighted remainder norms scaled by tau**2.', _FIT + '''
fig, ax = plt.subplots()
for col in ("norm_w3", "norm_w2_grad", "norm_w1_hess"):
    ax.semilogy(tau, tau ** 2 * fit[col], label=col)
ax.set_xlabel("tau")
ax.set_ylabel("tau^2 x norm")
ax.legend()
fig.savefig(HERE / "eta_norms.png", dpi=150)
'''),
    "final_ratio": ('Final-profile ratio R(x) = u(x) sqrt(-log x) / x.', '''
manifest = json.loads((RUN / "manifest.json").read_text())
data = np.loadtxt(RUN / manifest["snapshots"][-1], delimiter=",", comments="#")
x = np.logspace(-6, -1, 200)
x = x[(x > data[1, 0]) & (x < data[-1, 0])]
u = np.interp(x, data[:, 0], data[:, 1])
fig, ax = plt.subplots()
ax.semilogx(x, u * np.sqrt(-np.log(x)) / x, label="R(x)")
ax.axhline(1.0, color="k", lw=0.5)
ax.axhline(2 ** -0.5, color="k", lw=0.5, ls="--")
ax.set_xlabel("|x|")
ax.set_ylabel("R")
ax.legend()
fig.savefig(HERE / "final_ratio.png", dpi=150)
'''),
}

PLOT_NAMES = tuple(_BODIES)


def emit_plot_scripts(run_dir) -> list:
    """Write the five plot scripts into ``run_dir/plots``; returns their paths."""
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").is_file():
        raise RunDataError(f"no run manifest in {run_dir}")
    if not (run_dir / "series" / "fit_series.csv").is_file():
        raise RunDataError(f"{run_dir} has no fit series; run analyze first")
    out = run_dir / "plots"
    out.mkdir(exist_ok=True)
    paths = []
    for name, (title, body) in _BODIES.items():
        path = out / f"{name}.py"
        path.write_text(_PRELUDE.format(title=title) + body, encoding="utf-8")
        paths.append(path)
    return paths
