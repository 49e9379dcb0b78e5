"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline (they
are also repeated in the pytest terminal summary), or directly with
``python3 tests/test_acceptance.py``.
"""

import functools
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from pinchflow.analysis import fit_profile
from pinchflow.asymptotics import (
    matching_tau,
    run_claims,
    secondary_frame_checks,
    verify_final_profile,
    verify_profile_trends,
    verify_ratio_stability,
)
from pinchflow.cli import analyze_run, cmd_simulate, main, simulate
from pinchflow.config import RunConfig, parse_config, serialize_config, shipped_config, shipped_names
from pinchflow.frames import FlowGeometry, Frame, GridProfile, from_rescaled, to_rescaled
from pinchflow.solver import SolverConfig, cylinder_profile, integrate, make_grid
from pinchflow.store import write_run
from pinchflow.synthetic import ansatz_record

G = FlowGeometry(3, 1)
RESULTS = {}


def report(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


@functools.lru_cache(maxsize=1)
def generic_run():
    start = time.perf_counter()
    rec = simulate(RunConfig())
    return rec, time.perf_counter() - start


@functools.lru_cache(maxsize=1)
def generic_fit_series():
    rec, _ = generic_run()
    fits, _ = analyze_run(rec, RunConfig())
    return {
        "tau": np.array([f.tau for f in fits]),
        "a": np.array([f.a for f in fits]),
        "b": np.array([f.b for f in fits]),
        "norm_w3": np.array([f.norms["norm_w3"] for f in fits]),
    }


def uniform_cfg(n, radius=4.0):
    return SolverConfig(grid_size=n, domain_radius=radius, refinement="none",
                        outer_bc="neumann_zero")


# -- criteria ----------------------------------------------------------------


def criterion_1():
    cfg = SolverConfig(grid_size=512, refinement="none", outer_bc="neumann_zero")
    r = make_grid(cfg)
    start = time.perf_counter()
    p = integrate(GridProfile(r, cylinder_profile(r, 2.0)), G, cfg, 1.0)
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(p.values / math.sqrt(4 - 2 * 1.0) - 1)))
    return report(1, err <= 1e-5 and elapsed < 5.0,
                  f"cylinder max rel err {err:.2e} (<= 1e-5), {elapsed:.2f} s (< 5 s)")


def criterion_2():
    cfg = uniform_cfg(257, radius=10.0)
    r = make_grid(cfg)
    v = GridProfile(r, np.full(r.size, math.sqrt(2)), Frame.RESCALED, 0.0)
    out = integrate(v, G, cfg, 5.0, dt=0.01)
    err = float(np.max(np.abs(out.values - math.sqrt(2))))
    return report(2, err <= 1e-6, f"fixed point sup err {err:.2e} over tau-span 5 (<= 1e-6)")


def criterion_3():
    def run(n):
        cfg = uniform_cfg(n)
        r = make_grid(cfg)
        return integrate(GridProfile(r, 2 + 0.3 * np.exp(-r ** 2)), G, cfg, 0.2, dt=1e-3).values

    u1, u2, u3 = run(65), run(129)[::2], run(257)[::4]
    ratio = float(np.max(np.abs(u1 - u2)) / np.max(np.abs(u2 - u3)))
    return report(3, 3.0 <= ratio <= 5.0, f"self-convergence ratio {ratio:.3f} (in [3, 5])")


def criterion_4():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        t_star = rng.uniform(-2, 2)
        t = t_star - 10 ** rng.uniform(-12, 1)
        n = 16
        radii = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 1.0, n - 1))])
        p = GridProfile(radii, rng.uniform(0.05, 5.0, n), Frame.UNSCALED, t)
        q = from_rescaled(to_rescaled(p, t_star), t_star)
        worst = max(worst,
                    float(np.max(np.abs(q.values - p.values) / p.values)),
                    float(np.max(np.abs(q.radii[1:] - p.radii[1:]) / p.radii[1:])),
                    abs(q.timestamp - t) / max(abs(t), abs(t_star)))
    r = np.linspace(0, 5, 51)
    cyl = 0.0
    for t in (-1.0, -1e-3, -1e-9, -1e-14):
        v = to_rescaled(GridProfile(r, np.full(r.size, math.sqrt(-2 * t)), Frame.UNSCALED, t), 0.0)
        cyl = max(cyl, float(np.max(np.abs(v.values - math.sqrt(2)))))
    return report(4, worst <= 1e-12 and cyl <= 1e-14,
                  f"round trips worst {worst:.1e} (<= 1e-12), cylinder {cyl:.1e} (<= 1e-14)")


def criterion_5():
    worst = 0.0
    for e in range(2, 33):
        x = 10.0 ** -e
        tau = matching_tau(x).tau1
        worst = max(worst, abs(math.exp(tau / 2) * x - tau ** 0.55) / tau ** 0.55)
    inv = 0.0
    for tau in np.linspace(5.0, 200.0, 196):
        x = math.exp(0.55 * math.log(tau) - tau / 2)
        inv = max(inv, abs(matching_tau(x).tau1 - tau))
    tau8 = matching_tau(1e-8).tau1
    ratios = [-math.log(10.0 ** -e) / (matching_tau(10.0 ** -e).tau1 / 2) for e in (2, 4, 8, 16, 32)]
    increasing = bool(np.all(np.diff(ratios) > 0) and ratios[-1] < 1)
    ok = worst <= 1e-9 and inv <= 1e-9 and abs(tau8 - 40.9) <= 0.1 and increasing
    return report(5, ok, f"residual/tau^0.55 {worst:.1e}, inversion {inv:.1e}, "
                         f"tau1(1e-8)={tau8:.3f}, ratios {', '.join(f'{q:.3f}' for q in ratios)}")


def criterion_6():
    rec, elapsed = generic_run()
    rep = verify_profile_trends(generic_fit_series())
    if not rep.checks:
        return report(6, False, f"tau window unresolved ({rep.flags})")
    a = rep.checks["a_correction"].samples[0]["measured"]
    tb = rep.checks["tau_b"].samples[0]["measured"]
    eta = rep.checks["eta_norm"].samples[0]["measured"]
    lo, hi = rec.tau_range
    ok = rep.verdict == "pass" and elapsed <= 600 and hi >= 25
    return report(6, ok, f"tau to {hi:.1f} in {elapsed:.1f} s; |a-1/2|tau max/min {a:.2f}, "
                         f"tau b {tb:.3f} at tau {rep.extra['tau'][-1]:.1f}, "
                         f"tau^2 |eta|_w3 max/min {eta:.2f}")


def criterion_7():
    rec, _ = generic_run()
    radii = [10.0 ** -e for e in (3.25, 3.5, 3.75, 4.0, 4.25, 4.5, 4.75)]
    rep = verify_final_profile(rec, radii)
    ratios = np.array([s["ratio"] for s in rep.samples])
    devs = np.abs(ratios - 1)
    in_band = bool(np.all((ratios >= 0.6) & (ratios <= 1.4)))
    decreasing = bool(np.all(np.diff(devs) < 0))
    ok = in_band and decreasing and rep.extra["decades"] >= 1.5 and rep.verdict in ("pass", "trend-pass")
    return report(7, ok, f"R over {rep.extra['decades']:.2f} decades: "
                         f"{', '.join(f'{q:.3f}' for q in ratios)} ({rep.verdict})")


def criterion_8():
    rec, _ = generic_run()
    stab = verify_ratio_stability(rec, [1e-3, 1e-4, 1e-5])
    sups = [s["deviation"] for s in stab.samples]
    sec = secondary_frame_checks(rec, [10.0, 15.0, 20.0])
    subs = {k: v.verdict for k, v in sec.checks.items()}
    ok = (stab.trend == "improving" and stab.verdict in ("pass", "trend-pass")
          and all(v in ("pass", "trend-pass") for v in subs.values()))
    return report(8, ok, f"sup ratio {', '.join(f'{q:.3f}' for q in sups)} ({stab.trend}); "
                         f"secondary {subs}")


def criterion_9():
    problems = []
    small = RunConfig().replace(**{"solver.grid_size": 256})
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for name in ("a", "b"):
            cmd_simulate(small, tmp / name)
        trees = [{p.relative_to(tmp / n).as_posix(): p.read_bytes()
                  for p in sorted((tmp / n).rglob("*")) if p.is_file()} for n in ("a", "b")]
        if trees[0] != trees[1]:
            problems.append("reruns differ")
        for name in shipped_names():
            text = shipped_config(name).read_text(encoding="utf-8")
            if serialize_config(parse_config(text)) != text:
                problems.append(f"{name}.conf does not round-trip")

        def conf(label, **kw):
            path = tmp / f"{label}.conf"
            path.write_text(serialize_config(small.replace(**kw)), encoding="utf-8")
            return str(path)

        def sim(label, **kw):
            return main(["simulate", "--config", conf(label, **kw), "--out", str(tmp / label)])

        (tmp / "bad.conf").write_text("foo = 1\n")
        (tmp / "empty").mkdir()
        write_run(ansatz_record(frozen=True), RunConfig(), tmp / "frozen")
        codes = {
            0: sim("ok"),
            2: main(["simulate", "--config", str(tmp / "bad.conf"), "--out", str(tmp / "bad")]),
            3: sim("boundary", **{"solver.domain_radius": 1.0}),
            4: sim("gradient", **{"solver.gradient_abort": 0.2}),
            5: sim("budget", **{"solver.max_steps": 50}),
            6: main(["verify", str(tmp / "frozen"), "--claims", "final_profile"]),
            7: main(["analyze", str(tmp / "empty")]),
            8: main(["sweep", "--config", conf("sweep"), "--out", str(tmp / "sweep"),
                     "--grid", "solver.domain_radius=20,1"]),
        }
    wrong = {want: got for want, got in codes.items() if want != got}
    if wrong:
        problems.append(f"exit codes expected/got {wrong}")
    return report(9, not problems, "; ".join(problems) or
                  f"byte-identical reruns, {len(shipped_names())} configs round-trip, "
                  f"exit codes {sorted(codes)} honored")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("check", CRITERIA, ids=lambda f: f.__name__)
def test_criterion(check, monkeypatch):
    monkeypatch.delenv("PINCHFLOW_OUT", raising=False)
    assert check()


if __name__ == "__main__":
    outcomes = [check() for check in CRITERIA]
    print(f"{sum(outcomes)}/{len(outcomes)} criteria pass")
    sys.exit(0 if all(outcomes) else 1)
