"""Matching construction and trend verifiers for the pinch asymptotics.

Every verifier returns a :class:`VerificationReport`.  The claims being tested
are ``o(1)`` statements without explicit constants, so most verdicts rest on
the trend of the measured deviation along a sequence approaching the
singularity; absolute tolerances are used only where a bound is explicit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from pinchflow.errors import NoRootError, ResolutionError
from pinchflow.frames import (
    MATCH_EXPONENT,
    SECONDARY_EXPONENT,
    GridProfile,
    MatchingPoint,
    to_secondary_frame,
)

#: below this spread a deviation series counts as flat
FLAT_SPAN = 1e-9
#: tau at which the matching function f(tau) = tau/2 + log x - 0.55 log tau is minimal
_TAU_TURN = 2 * MATCH_EXPONENT
#: largest radius for which the matching equation has a root
X1_MAX = math.exp(MATCH_EXPONENT * math.log(_TAU_TURN) - _TAU_TURN / 2)

VERDICT_ORDER = ("fail", "inconclusive", "trend-pass", "pass")


@dataclass
class VerificationReport:
    claim: str
    samples: list = field(default_factory=list)
    trend: str = "flat"
    slope: float = 0.0
    verdict: str = "inconclusive"
    tolerance: float | None = None
    flags: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def deviations(self) -> np.ndarray:
        return np.array([s["deviation"] for s in self.samples], dtype=float)

    @property
    def ok(self) -> bool:
        """Pass or trend-pass (inconclusive is not a failure either)."""
        return self.verdict != "fail"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checks"] = {k: v.to_dict() for k, v in self.checks.items()}
        return d


def _trend(devs: np.ndarray, order_key: np.ndarray) -> tuple:
    """Classify a deviation series ordered toward the asymptotic limit."""
    if devs.size < 2:
        return "flat", 0.0
    slope = float(np.polyfit(order_key, devs, 1)[0])
    if devs.max() - devs.min() <= FLAT_SPAN * max(1.0, devs.max()):
        return "flat", slope
    if np.all(np.diff(devs) <= FLAT_SPAN):
        return "improving", slope
    if slope > 0:
        return "worsening", slope
    return "flat", slope


def _verdict(devs: np.ndarray, tols, trend: str, require_trend: bool = False) -> str:
    """Combine per-sample tolerances and the trend into a verdict.

    ``tols`` may be None (trend-only claim), a scalar or one value per sample.
    An explicit bound passes whenever every sample satisfies it; with
    ``require_trend`` a worsening series fails even inside the bound.
    """
    if devs.size == 0 or np.any(~np.isfinite(devs)):
        return "inconclusive"
    if tols is None:
        if trend == "improving":
            return "trend-pass"
        if trend == "flat" and devs.max() <= FLAT_SPAN:
            return "pass"
        return "fail"
    tols = np.broadcast_to(np.asarray(tols, dtype=float), devs.shape)
    if np.all(devs <= tols) and not (require_trend and trend == "worsening"):
        return "pass"
    if trend == "improving":
        return "trend-pass"
    return "fail"


def _finish(report: VerificationReport, order_key, tols,
            require_trend: bool = False) -> VerificationReport:
    devs = report.deviations
    good = np.isfinite(devs)
    key = np.asarray(order_key, dtype=float)
    report.trend, report.slope = _trend(devs[good], key[good])
    report.verdict = _verdict(devs, tols, report.trend, require_trend)
    if report.verdict == "pass" and report.trend == "worsening":
        report.flags.append("worsening-within-bound")
    if report.verdict == "inconclusive" and good.sum() >= 2 and not good.all():
        report.flags.append("partially-resolved")
    return report


def combine_verdicts(verdicts) -> str:
    verdicts = list(verdicts)
    if not verdicts:
        return "inconclusive"
    return min(verdicts, key=VERDICT_ORDER.index)


# --------------------------------------------------------------------------
# matching time


def _matching_function(tau: float, log_x: float) -> float:
    return tau / 2 + log_x - MATCH_EXPONENT * math.log(tau)


def matching_tau(x1_norm: float) -> MatchingPoint:
    """Largest ``tau1`` with ``exp(tau1 / 2) |x1| = tau1**0.55``."""
    if not (0.0 < x1_norm < 1.0):
        raise NoRootError(f"|x1| must lie in (0, 1), got {x1_norm}")
    log_x = math.log(x1_norm)
    if _matching_function(_TAU_TURN, log_x) > 0:
        raise NoRootError(f"no matching time for |x1|={x1_norm} (needs |x1| <= {X1_MAX:.6f})")
    hi = max(4.0, -4.0 * log_x)
    while _matching_function(hi, log_x) <= 0:
        hi *= 2
    tau1 = brentq(_matching_function, _TAU_TURN, hi, args=(log_x,),
                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return MatchingPoint(x1_norm, tau1)


def verify_log_relation(points) -> VerificationReport:
    """Ratio ``-log|x1| / (tau1 / 2)`` along radii approaching 0."""
    xs = sorted((float(x) for x in points), reverse=True)
    if any(x >= 0.01 for x in xs):
        raise ValueError("log-relation points must satisfy |x1| < 0.01")
    rep = VerificationReport("log_relation")
    for x in xs:
        mp = matching_tau(x)
        ratio = -math.log(x) / (mp.tau1 / 2)
        rep.samples.append({"input": x, "measured": ratio, "target": 1.0,
                            "deviation": abs(ratio - 1.0), "tau1": mp.tau1})
    return _finish(rep, [-math.log(x) for x in xs], None)


# --------------------------------------------------------------------------
# run-based claims


def _check_radius(rec, x: float):
    radii = rec.snapshots[0].radii
    if not (radii[1] <= x <= radii[-1]):
        raise ResolutionError(f"radius {x} is outside the resolved grid "
                              f"[{radii[1]:.3g}, {radii[-1]:.3g}]")


def _in_range(rec, tau_lo: float, tau_hi: float) -> bool:
    lo, hi = rec.tau_range
    return lo - 1e-12 <= tau_lo and tau_hi <= hi + 1e-12


def verify_u_at_t1(rec, x1_norms) -> VerificationReport:
    """Compare ``u(x1, t1)`` with ``exp(-tau1 / 2) tau1**(1/20)``.

    Tolerance per sample is ``tau1**(-1/10)``: it covers replacing
    ``sqrt(2 + tau1**0.1)`` by ``tau1**0.05`` on the exact profile.
    """
    xs = sorted(np.atleast_1d(np.asarray(x1_norms, dtype=float)), reverse=True)
    rep = VerificationReport("u_at_t1")
    tols, keys = [], []
    for x in xs:
        _check_radius(rec, x)
        mp = matching_tau(x)
        target = math.exp(-mp.tau1 / 2) * mp.tau1 ** (SECONDARY_EXPONENT / 2)
        tol = mp.tau1 ** -SECONDARY_EXPONENT
        sample = {"input": x, "tau1": mp.tau1, "target": target, "tolerance": tol}
        if _in_range(rec, mp.tau1, mp.tau1):
            measured = float(rec.sample(x, mp.t1)[0])
            sample.update(measured=measured, ratio=measured / target,
                          deviation=abs(measured / target - 1.0))
        else:
            sample.update(measured=float("nan"), ratio=float("nan"), deviation=float("nan"))
        rep.samples.append(sample)
        tols.append(tol)
        keys.append(mp.tau1)
    rep.tolerance = max(tols) if tols else None
    return _finish(rep, keys, tols)


def verify_final_profile(rec, radii, band: float = 0.4,
                         extrapolate: bool = False) -> VerificationReport:
    """``R(x) = u_final(x) sqrt(-log x) / x`` on radii approaching 0.

    ``u_final`` is the last snapshot, or with ``extrapolate`` the linear
    extrapolation in ``sqrt(T* - t)`` through the last two snapshots.  Radii
    whose matching time lies beyond the run are reported as unresolved.
    ``extra["limit_ratio"]`` holds ``R / R_limit`` with ``R_limit = 1/sqrt(2)``,
    the constant obtained when ``tau1`` is replaced by ``-2 log|x|``.
    """
    xs = sorted((float(x) for x in radii), reverse=True)
    for x in xs:
        if not 0.0 < x < 1.0:
            raise ValueError(f"radius {x} must lie in (0, 1)")
        _check_radius(rec, x)
    x_arr = np.array(xs)
    last = rec.snapshots[-1]
    u = last(x_arr)
    if extrapolate:
        prev = rec.snapshots[-2]
        s1 = math.sqrt(rec.t_star - prev.timestamp)
        s2 = math.sqrt(rec.t_star - last.timestamp)
        u_prev = prev(x_arr)
        u = (u * s1 - u_prev * s2) / (s1 - s2)
    tau_last = rec.tau_range[1]
    rep = VerificationReport("final_profile", tolerance=band)
    for x, ux in zip(xs, u):
        tau1 = matching_tau(x).tau1 if x <= X1_MAX else float("nan")
        ratio = ux * math.sqrt(-math.log(x)) / x
        settled = math.isfinite(tau1) and tau1 <= tau_last
        rep.samples.append({
            "input": x, "measured": float(ux), "target": x / math.sqrt(-math.log(x)),
            "ratio": float(ratio), "tau1": tau1,
            "deviation": float(abs(ratio - 1.0)) if settled else float("nan"),
        })
    rep.extra["limit_ratio"] = [s["ratio"] * math.sqrt(2.0) for s in rep.samples]
    span = math.log10(xs[0] / xs[-1]) if len(xs) > 1 else 0.0
    rep.extra["decades"] = span
    _finish(rep, [-math.log(x) for x in xs], band, require_trend=True)
    if span < 1.5:
        rep.flags.append("span-below-1.5-decades")
        if rep.verdict in ("pass", "trend-pass"):
            rep.verdict = "inconclusive"
    if rec.degenerate:
        rep.flags.append("degenerate-run")
    return rep


def verify_ratio_stability(rec, x1_norms, eps: float = 0.2) -> VerificationReport:
    """``sup |u(x1, t) / u(x1, t_last) - 1|`` over resolved ``t in [t1, t_last]``."""
    xs = sorted(np.atleast_1d(np.asarray(x1_norms, dtype=float)), reverse=True)
    times = rec.shifted_times()
    rep = VerificationReport("ratio_stability", tolerance=eps)
    keys = []
    for x in xs:
        _check_radius(rec, x)
        mp = matching_tau(x)
        sample = {"input": x, "tau1": mp.tau1, "target": 1.0}
        if _in_range(rec, mp.tau1, mp.tau1):
            later = [s for s, t in zip(rec.snapshots, times) if t > mp.t1]
            vals = np.array([float(s(np.array([x]))[0]) for s in later]
                            + [float(rec.sample(x, mp.t1)[0])])
            u_last = float(rec.snapshots[-1](np.array([x]))[0])
            sup = float(np.max(np.abs(vals / u_last - 1.0)))
            sample.update(measured=sup, deviation=sup, below_eps=sup < eps)
        else:
            sample.update(measured=float("nan"), deviation=float("nan"), below_eps=False)
        rep.samples.append(sample)
        keys.append(mp.tau1)
    _finish(rep, keys, eps, require_trend=True)
    if rec.degenerate:
        rep.flags.append("degenerate-run")
    return rep


def _band(h: GridProfile, z1: float, half_width: float = 2.0):
    mask = np.abs(h.radii - z1) <= half_width
    return mask


def secondary_frame_checks(rec, points, s_samples: int = 19) -> VerificationReport:
    """Checks on the zoomed flow ``h(z, s)`` around each matching point.

    ``points`` holds :class:`MatchingPoint` objects or ``tau1`` values.  Four
    sub-reports are produced:

    * ``h_near_one``: ``|h(z, 0) - 1| <= 3 tau1**(-1/20)`` on ``||z| - |z1|| <= 2``;
    * ``h_bounds``: ``1/2 <= h <= 9`` on that band for ``s in [-1, 0]``;
    * ``h_derivatives``: first and second ``z``-derivatives ``<= tau1**(-1/10)``;
    * ``h_ratio``: ``sup_s |h(z1, s) / h(z1, 0) - 1|`` over
      ``s in [0, 0.9 tau1**(-1/10)]``, judged by its trend in ``tau1``.

    The same ratio over ``s in [-1, 0]`` is reported in ``extra`` only.
    """
    mps = sorted((p if isinstance(p, MatchingPoint) else MatchingPoint.from_tau1(float(p))
                  for p in points), key=lambda m: m.tau1)
    near = VerificationReport("h_near_one")
    bounds = VerificationReport("h_bounds", tolerance=0.0)
    derivs = VerificationReport("h_derivatives")
    ratio = VerificationReport("h_ratio")
    pre_ratio = []
    tol_near, tol_der, keys = [], [], []
    for mp in mps:
        q = mp.tau1 ** SECONDARY_EXPONENT
        scale2 = mp.length_scale ** 2
        s_neg = np.linspace(-1.0, 0.0, 11)
        s_pos = np.linspace(0.0, 0.9 / q, s_samples)
        tau_lo = mp.tau1 - math.log(1.0 + q)
        tau_hi = mp.tau1 - math.log(1.0 - 0.9)
        keys.append(mp.tau1)
        tol_near.append(3.0 * mp.tau1 ** (-SECONDARY_EXPONENT / 2))
        tol_der.append(mp.tau1 ** -SECONDARY_EXPONENT)
        base = {"input": mp.tau1, "z1": mp.z1_norm}
        if not _in_range(rec, tau_lo, tau_hi):
            nan = float("nan")
            for r in (near, bounds, derivs, ratio):
                r.samples.append(dict(base, measured=nan, deviation=nan, target=nan))
            pre_ratio.append(nan)
            continue

        def h_at(s):
            t = mp.t1 + s * scale2
            return to_secondary_frame(rec.profile_at(t), mp, allow_negative_s=True)

        h0 = h_at(0.0)
        band = _band(h0, mp.z1_norm)
        dev0 = float(np.max(np.abs(h0.values[band] - 1.0)))
        near.samples.append(dict(base, measured=float(h0(np.array([mp.z1_norm]))[0]),
                                 target=1.0, deviation=dev0))

        hmin, hmax, dmax = math.inf, -math.inf, 0.0
        pre = []
        h01 = float(h0(np.array([mp.z1_norm]))[0])
        for s in s_neg:
            hs = h0 if s == 0.0 else h_at(float(s))
            vals = hs.values[band]
            hmin, hmax = min(hmin, vals.min()), max(hmax, vals.max())
            dz = np.gradient(hs.values, hs.radii)
            dzz = np.gradient(dz, hs.radii)
            dmax = max(dmax, float(np.max(np.abs(dz[band]))), float(np.max(np.abs(dzz[band]))))
            pre.append(abs(float(hs(np.array([mp.z1_norm]))[0]) / h01 - 1.0))
        bounds.samples.append(dict(base, measured=[hmin, hmax], target=[0.5, 9.0],
                                   deviation=max(0.0, 0.5 - hmin, hmax - 9.0)))
        derivs.samples.append(dict(base, measured=dmax, target=0.0, deviation=dmax))
        pre_ratio.append(max(pre))

        x1 = np.array([mp.x1_norm])
        hs_vals = [float(rec.sample(x1, mp.t1 + s * scale2)[0]) for s in s_pos]
        sup = float(np.max(np.abs(np.array(hs_vals) / hs_vals[0] - 1.0)))
        ratio.samples.append(dict(base, measured=sup, target=0.0, deviation=sup))

    near.tolerance = max(tol_near) if tol_near else None
    derivs.tolerance = max(tol_der) if tol_der else None
    _finish(near, keys, tol_near)
    _finish(bounds, keys, 0.0)
    _finish(derivs, keys, tol_der)
    _finish(ratio, keys, None)
    rep = VerificationReport("secondary_frame")
    rep.checks = {r.claim: r for r in (near, bounds, derivs, ratio)}
    rep.samples = [{"input": mp.tau1, "deviation": d["deviation"], "measured": d["measured"],
                    "target": 0.0} for mp, d in zip(mps, ratio.samples)]
    rep.trend, rep.slope = ratio.trend, ratio.slope
    rep.verdict = combine_verdicts(r.verdict for r in rep.checks.values())
    rep.extra["pre_t1_ratio"] = pre_ratio
    if rec.degenerate:
        rep.flags.append("degenerate-run")
    return rep


def verify_profile_trends(series: dict, tau_window=(10.0, 25.0), band_factor: float = 10.0,
                          tau_b_band: float = 0.25) -> VerificationReport:
    """Bounds on the fitted ``a``, ``b`` and ``eta`` over a window of ``tau``.

    ``series`` maps fit-series column names to arrays.  Sub-reports:

    * ``a_correction``: max/min of ``|a - 1/2| tau`` is at most ``band_factor``;
    * ``tau_b``: ``|tau b - 1| <= tau_b_band`` at the last ``tau`` in the window;
    * ``eta_norm``: max/min of ``tau**2 norm_w3`` is at most ``band_factor``.
    """
    tau = np.asarray(series["tau"], dtype=float)
    sel = (tau >= tau_window[0]) & (tau <= tau_window[1])
    rep = VerificationReport("profile_trends")
    rep.extra["tau_window"] = list(tau_window)
    if np.count_nonzero(sel) < 3:
        rep.flags.append("window-unresolved")
        rep.verdict = "inconclusive"
        return rep
    t = tau[sel]
    a_corr = np.abs(np.asarray(series["a"])[sel] - 0.5) * t
    tb = np.asarray(series["b"])[sel] * t
    eta = np.asarray(series["norm_w3"])[sel] * t * t

    def spread(vals):
        lo = float(vals.min())
        return float(vals.max()) / lo if lo > 0 else math.inf

    subs = []
    for name, vals in (("a_correction", a_corr), ("eta_norm", eta)):
        r = VerificationReport(name, tolerance=band_factor)
        r.samples.append({"input": [float(t[0]), float(t[-1])], "measured": spread(vals),
                          "target": 1.0, "deviation": spread(vals)})
        r.extra["values"] = vals.tolist()
        subs.append(r)
    r = VerificationReport("tau_b", tolerance=tau_b_band)
    r.samples.append({"input": float(t[-1]), "measured": float(tb[-1]), "target": 1.0,
                      "deviation": abs(float(tb[-1]) - 1.0)})
    r.extra["values"] = tb.tolist()
    subs.append(r)
    for r in subs:
        r.verdict = "pass" if r.samples[0]["deviation"] <= r.tolerance else "fail"
    rep.checks = {r.claim: r for r in subs}
    rep.extra["tau"] = t.tolist()
    rep.verdict = combine_verdicts(r.verdict for r in subs)
    return rep


# --------------------------------------------------------------------------
# batches

CLAIMS = ("log_relation", "u_at_t1", "final_profile", "ratio_stability",
          "secondary_frame", "profile_trends")

DEFAULT_INPUTS = {
    "log_relation": [1e-4, 1e-8, 1e-16, 1e-32],
    "u_at_t1": [1e-3, 10 ** -3.5, 1e-4],
    "final_profile": [10 ** -e for e in (3.25, 3.5, 3.75, 4.0, 4.25, 4.5, 4.75)],
    "ratio_stability": [0.05, 1e-2, 1e-3, 1e-4],
    "secondary_frame": [10.0, 15.0, 20.0],
}


def run_claims(rec, claims=CLAIMS, fit_series: dict | None = None) -> list:
    """Evaluate the named claims with their default inputs.

    Claims whose data is missing or out of range come back inconclusive
    instead of raising.
    """
    reports = []
    for claim in claims:
        if claim not in CLAIMS:
            raise ValueError(f"unknown claim {claim!r}; known: {', '.join(CLAIMS)}")
        try:
            if claim == "log_relation":
                rep = verify_log_relation(DEFAULT_INPUTS[claim])
            elif claim == "u_at_t1":
                rep = verify_u_at_t1(rec, DEFAULT_INPUTS[claim])
            elif claim == "final_profile":
                rep = verify_final_profile(rec, DEFAULT_INPUTS[claim])
            elif claim == "ratio_stability":
                rep = verify_ratio_stability(rec, DEFAULT_INPUTS[claim])
            elif claim == "secondary_frame":
                rep = secondary_frame_checks(rec, DEFAULT_INPUTS[claim])
            else:
                if fit_series is None:
                    raise ResolutionError("no fit series; run analyze first")
                rep = verify_profile_trends(fit_series)
                if rec.degenerate:
                    # b is unidentifiable on a uniform profile
                    rep.flags.append("degenerate-run")
                    rep.verdict = "inconclusive"
        except (ResolutionError, NoRootError) as exc:
            rep = VerificationReport(claim, verdict="inconclusive", flags=[str(exc)])
        reports.append(rep)
    return reports


def summary_table(reports) -> str:
    """Fixed-width plain-text table of verdicts, one row per claim and sub-check."""
    rows = [("claim", "verdict", "trend", "samples", "flags")]
    for rep in reports:
        rows.append((rep.claim, rep.verdict, rep.trend, str(len(rep.samples)),
                     ";".join(rep.flags) or "-"))
        for name, sub in rep.checks.items():
            rows.append(("  " + name, sub.verdict, sub.trend, str(len(sub.samples)),
                         ";".join(sub.flags) or "-"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(4)) + "  " + r[4] for r in rows]
    return "\n".join(line.rstrip() for line in lines) + "\n"
