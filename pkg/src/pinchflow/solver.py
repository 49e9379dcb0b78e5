"""Semi-implicit finite differences for the rotationally symmetric flow.

The radius ``u(r, t)`` of the ``S^k`` fiber over the axis ``R^m`` evolves by

    u_t = u_rr / (1 + u_r**2) + (m - 1) u_r / r - k / u

and in rescaled variables ``v(rho, tau)`` by

    v_tau = v_rr / (1 + v_r**2) + ((m - 1) / rho - rho / 2) v_r + v / 2 - k / v.

A step is a Strang splitting: half a step of the exact reaction flow, one
backward-Euler step of the linear part with the diffusion coefficient frozen
at the current state (a single tridiagonal solve), another half reaction
step.  The reaction flow is solved in closed form (``u**2 -= 2 k dt`` in the
unscaled frame), so shrinking cylinders are integrated without time error.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

from pinchflow.errors import InsufficientSamplesError, ResolutionError, StepRejected
from pinchflow.frames import FlowGeometry, Frame, GridProfile, rescale_by

log = logging.getLogger(__name__)

STATUSES = ("pinched", "boundary_contaminated", "gradient_blowup", "max_steps")
_REFINEMENT = re.compile(r"^dyadic-near-axis\((\d+)\)$")


@dataclass(frozen=True)
class SolverConfig:
    grid_size: int = 2048
    domain_radius: float = 20.0
    outer_bc: str = "dirichlet"
    #: Dirichlet value; ``None`` holds the initial boundary value.
    outer_value: float | None = None
    cfl_safety: float = 0.005
    dt_min: float = 1e-24
    dt_max: float = 0.01
    u_min_stop: float = 1e-7
    gradient_abort: float = 1e3
    refinement: str = "dyadic-near-axis(30)"
    max_steps: int = 200_000
    snapshot_dtau: float = 0.25
    #: sup |u_t| below which a Dirichlet run counts as held open by the boundary
    stall_tol: float = 1e-10

    def __post_init__(self):
        if int(self.grid_size) != self.grid_size or self.grid_size < 16:
            raise ValueError("grid_size must be an integer >= 16")
        if not self.domain_radius > 0:
            raise ValueError("domain_radius must be positive")
        if self.outer_bc not in ("dirichlet", "neumann_zero"):
            raise ValueError("outer_bc must be 'dirichlet' or 'neumann_zero'")
        if self.outer_value is not None and not self.outer_value > 0:
            raise ValueError("outer_value must be positive")
        if not 0 < self.cfl_safety < 1:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if not self.u_min_stop > 0:
            raise ValueError("u_min_stop must be positive")
        if not self.gradient_abort > 0:
            raise ValueError("gradient_abort must be positive")
        if self.refinement != "none" and not _REFINEMENT.match(self.refinement):
            raise ValueError("refinement must be 'none' or 'dyadic-near-axis(L)'")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")
        if not self.snapshot_dtau > 0:
            raise ValueError("snapshot_dtau must be positive")

    @property
    def refinement_levels(self) -> int:
        if self.refinement == "none":
            return 0
        return int(_REFINEMENT.match(self.refinement).group(1))


def make_grid(cfg: SolverConfig) -> np.ndarray:
    """Radial grid on ``[0, domain_radius]``.

    With ``dyadic-near-axis(L)`` the spacing at the axis is ``2**-L`` times the
    spacing at the outer edge: ``r = R sinh(b xi) / sinh(b)`` with
    ``cosh(b) = 2**L``, uniform near the axis and geometric further out.
    """
    xi = np.linspace(0.0, 1.0, int(cfg.grid_size))
    levels = cfg.refinement_levels
    if levels == 0:
        return cfg.domain_radius * xi
    beta = math.acosh(2.0 ** levels)
    r = cfg.domain_radius * np.sinh(beta * xi) / math.sinh(beta)
    r[-1] = cfg.domain_radius
    return r


class _Stencil:
    """Three-point difference weights on a nonuniform grid."""

    def __init__(self, radii: np.ndarray):
        h = np.diff(radii)
        a, b = h[:-1], h[1:]  # left and right spacings of interior points
        self.h0 = h[0]
        self.h_last = h[-1]
        self.d1 = np.stack([-b / (a * (a + b)), (b - a) / (a * b), a / (b * (a + b))])
        self.d2 = np.stack([2 / (a * (a + b)), -2 / (a * b), 2 / (b * (a + b))])
        self.inv_r = 1.0 / radii[1:-1]
        self.rho = radii[1:-1]


@functools.lru_cache(maxsize=16)
def _stencil_cached(key: bytes) -> _Stencil:
    return _Stencil(np.frombuffer(key, dtype=float))


def _stencil(radii: np.ndarray) -> _Stencil:
    return _stencil_cached(np.ascontiguousarray(radii, dtype=float).tobytes())


def _first_derivative(u: np.ndarray, st: _Stencil) -> np.ndarray:
    # difference form: the weights sum to zero, so constants cancel exactly
    du = np.zeros_like(u)
    mid = u[1:-1]
    du[1:-1] = st.d1[0] * (u[:-2] - mid) + st.d1[2] * (u[2:] - mid)
    return du


def _derivatives(u: np.ndarray, st: _Stencil):
    """``u_r`` and ``u_rr`` with the axis reflection and a one-sided outer edge."""
    ur = _first_derivative(u, st)
    urr = np.empty_like(u)
    mid = u[1:-1]
    urr[1:-1] = st.d2[0] * (u[:-2] - mid) + st.d2[2] * (u[2:] - mid)
    urr[0] = 2.0 * (u[1] - u[0]) / st.h0 ** 2
    h = st.h_last
    ur[-1] = (u[-1] - u[-2]) / h
    urr[-1] = urr[-2]
    return ur, urr


def _check_positive(p: GridProfile):
    if np.any(p.values <= 0):
        raise StepRejected("positivity", "profile is not positive; pinch already passed")
    if p.radii.size < 3:
        raise ValueError("need at least 3 grid points")


def mcf_rhs(p: GridProfile, g: FlowGeometry) -> np.ndarray:
    """Right-hand side ``u_t`` of the unscaled equation on the grid of ``p``."""
    _check_positive(p)
    u = p.values
    ur, urr = _derivatives(u, _stencil(p.radii))
    out = np.empty_like(u)
    out[0] = g.m * urr[0] - g.k / u[0]
    r = p.radii[1:]
    out[1:] = urr[1:] / (1 + ur[1:] ** 2) + (g.m - 1) * ur[1:] / r - g.k / u[1:]
    return out


def rescaled_rhs(p: GridProfile, g: FlowGeometry) -> np.ndarray:
    """Right-hand side ``v_tau`` of the rescaled equation on the grid of ``p``."""
    _check_positive(p)
    v = p.values
    rho = p.radii
    vr, vrr = _derivatives(v, _stencil(rho))
    out = np.empty_like(v)
    out[0] = g.m * vrr[0] + v[0] / 2 - g.k / v[0]
    out[1:] = (vrr[1:] / (1 + vr[1:] ** 2) + (g.m - 1) * vr[1:] / rho[1:]
               - rho[1:] * vr[1:] / 2 + v[1:] / 2 - g.k / v[1:])
    return out


def _react(u: np.ndarray, dt: float, g: FlowGeometry, frame: Frame) -> np.ndarray:
    """Exact solution of the reaction flow over ``dt``."""
    if frame is Frame.RESCALED:
        w = 2 * g.k + (u * u - 2 * g.k) * math.exp(dt)
    else:
        w = u * u - 2 * g.k * dt
    if np.any(w <= 0):
        raise StepRejected("positivity", "reaction step would cross zero radius")
    return np.sqrt(w)


def _diffuse(u: np.ndarray, radii: np.ndarray, dt: float, g: FlowGeometry,
             frame: Frame, cfg: SolverConfig, boundary: float | None) -> np.ndarray:
    """One backward-Euler step of the linear part with frozen coefficients."""
    st = _stencil(radii)
    n = u.size
    ur = _first_derivative(u, st)
    diff = 1.0 / (1.0 + ur[1:-1] ** 2)
    drift = (g.m - 1) * st.inv_r
    if frame is Frame.RESCALED:
        drift = drift - st.rho / 2
    lower = diff * st.d2[0] + drift * st.d1[0]
    main = diff * st.d2[1] + drift * st.d1[1]
    upper = diff * st.d2[2] + drift * st.d1[2]

    ab = np.zeros((3, n))
    ab[1] = 1.0
    ab[0, 2:] = -dt * upper
    ab[1, 1:-1] -= dt * main
    ab[2, :-2] = -dt * lower
    # axis: m u_rr(0) from the even reflection u(-h) = u(h)
    c0 = 2.0 * g.m / st.h0 ** 2
    ab[1, 0] += dt * c0
    ab[0, 1] = -dt * c0
    rhs = u.copy()
    if boundary is not None:
        rhs[-1] = boundary
    else:
        # zero slope at the edge from the odd-free reflection u(R+h) = u(R-h)
        ce = 2.0 / st.h_last ** 2
        ab[1, -1] += dt * ce
        ab[2, -2] = -dt * ce
    return solve_banded((1, 1), ab, rhs, overwrite_ab=True, check_finite=False)


def _boundary_value(p: GridProfile, cfg: SolverConfig) -> float | None:
    if cfg.outer_bc != "dirichlet":
        return None
    return p.values[-1] if cfg.outer_value is None else cfg.outer_value


def step(p: GridProfile, dt: float, g: FlowGeometry, cfg: SolverConfig) -> GridProfile:
    """Advance ``p`` (unscaled or rescaled frame) by ``dt``.

    Raises :class:`StepRejected` when a value would become non-positive or
    the slope exceeds ``cfg.gradient_abort``.
    """
    if p.frame is Frame.SECONDARY:
        raise ValueError("the secondary frame is not integrated directly")
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check_positive(p)
    boundary = _boundary_value(p, cfg)
    u = _react(p.values, dt / 2, g, p.frame)
    if boundary is not None:
        u[-1] = boundary
    u = _diffuse(u, p.radii, dt, g, p.frame, cfg, boundary)
    if not np.all(u > 0):
        raise StepRejected("positivity", "implicit solve produced a non-positive radius")
    u = _react(u, dt / 2, g, p.frame)
    if boundary is not None:
        u[-1] = boundary
    slope = np.max(np.abs(_first_derivative(u, _stencil(p.radii))))
    if not slope <= cfg.gradient_abort:
        raise StepRejected("gradient", f"|u_r| reached {slope:.3g}")
    return p.with_values(u, p.timestamp + dt)


def _step_size(p: GridProfile, cfg: SolverConfig) -> float:
    # diffusion is implicit, so only the reaction time scale u_min**2 limits dt
    dt = cfg.cfl_safety * float(np.min(p.values)) ** 2
    return min(max(dt, cfg.dt_min), cfg.dt_max)


def _try_step(p, dt, g, cfg):
    """Step with dt halving on positivity failures; returns (profile, dt_used)."""
    while True:
        try:
            return step(p, dt, g, cfg), dt
        except StepRejected as exc:
            if exc.reason != "positivity" or dt / 2 < cfg.dt_min:
                raise
            dt /= 2


def integrate(p: GridProfile, g: FlowGeometry, cfg: SolverConfig, until: float,
              dt: float | None = None) -> GridProfile:
    """Integrate to exactly ``until`` (in the frame's time variable).

    ``dt`` fixes the step; otherwise it follows the reaction time scale.
    """
    if until < p.timestamp:
        raise ValueError("cannot integrate backwards")
    start = p.timestamp
    n_fixed = None
    if dt is not None:
        n_fixed = max(1, int(round((until - start) / dt)))
        for i in range(n_fixed):
            t_next = start + (until - start) * (i + 1) / n_fixed
            p = step(p, t_next - p.timestamp, g, cfg)
        return p.with_values(p.values, until)
    while p.timestamp < until:
        h = min(_step_size(p, cfg), until - p.timestamp)
        if until - (p.timestamp + h) < 1e-3 * h:
            h = until - p.timestamp
        p, _ = _try_step(p, h, g, cfg)
    return p.with_values(p.values, until)


# --------------------------------------------------------------------------
# initial data


def generic_pinch_profile(radii, c0: float = math.sqrt(2) * 0.9, c2: float = 0.08,
                          width: float = 5.0) -> np.ndarray:
    """``c0 + c2 r**2 / (1 + r**2 / width**2)``: bounded, quadratic minimum at 0."""
    r2 = np.asarray(radii, dtype=float) ** 2
    return c0 + c2 * r2 / (1.0 + r2 / width ** 2)


def cylinder_profile(radii, c0: float = 2.0) -> np.ndarray:
    return np.full(np.shape(radii), float(c0))


# --------------------------------------------------------------------------
# runs


@dataclass(eq=False)
class RunRecord:
    """History of one simulation.

    Times are measured from the last accepted step (``time_origin`` holds that
    step's absolute time), so ``T* - t`` keeps full relative precision all the
    way into the singularity.  ``min_radius_series`` has columns
    ``(t, min u, argmin r)``; ``argmin r`` is NaN for degenerate (uniform)
    runs, whose minimum has no location.
    """

    config_hash: str
    geometry: FlowGeometry
    snapshots: list
    min_radius_series: np.ndarray
    status: str
    t_star: float = float("nan")
    t_star_uncertainty: float = float("nan")
    time_origin: float = 0.0
    degenerate: bool = False
    steps: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        ts = [s.timestamp for s in self.snapshots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot timestamps must increase strictly")
        self.min_radius_series = np.asarray(self.min_radius_series, dtype=float).reshape(-1, 3)

    # -- blow-up time bookkeeping ---------------------------------------

    def _require_t_star(self):
        if not math.isfinite(self.t_star):
            raise ResolutionError("run has no blow-up time estimate")

    def time_to_blowup(self, t: float) -> float:
        self._require_t_star()
        return self.t_star - t

    def shifted_times(self) -> np.ndarray:
        """Snapshot times shifted so that the singularity sits at 0."""
        self._require_t_star()
        return np.array([s.timestamp - self.t_star for s in self.snapshots])

    def snapshot_taus(self) -> np.ndarray:
        return -np.log(-self.shifted_times())

    def shifted_snapshots(self) -> list:
        """Unscaled snapshots with the singular time moved to 0."""
        self._require_t_star()
        return [GridProfile(s.radii, s.values, Frame.UNSCALED, s.timestamp - self.t_star)
                for s in self.snapshots]

    def rescaled_snapshots(self) -> list:
        self._require_t_star()
        return [rescale_by(s, self.t_star - s.timestamp) for s in self.snapshots]

    @property
    def tau_range(self) -> tuple:
        taus = self.snapshot_taus()
        return float(taus[0]), float(taus[-1])

    # -- sampling -------------------------------------------------------

    def values_at(self, x) -> np.ndarray:
        """``u(x, t_j)`` for every snapshot ``j`` (rows) and radius in ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([s(x) for s in self.snapshots])

    def sample(self, x, t_shift: float) -> np.ndarray:
        """``u(x, t)`` at shifted time ``t`` (singularity at 0).

        Interpolates ``log u`` monotonically in ``tau`` between snapshots.
        """
        taus = self.snapshot_taus()
        if not (t_shift < 0):
            raise ResolutionError("time must precede the singularity")
        tau = -math.log(-t_shift)
        if tau < taus[0] - 1e-12 or tau > taus[-1] + 1e-12:
            raise ResolutionError(
                f"tau={tau:.4g} outside resolved range [{taus[0]:.4g}, {taus[-1]:.4g}]")
        vals = self.values_at(x)
        interp = PchipInterpolator(taus, np.log(vals), axis=0)
        return np.exp(interp(min(max(tau, taus[0]), taus[-1])))

    def profile_at(self, t_shift: float) -> GridProfile:
        """Whole unscaled profile at a shifted time, interpolated in ``tau``."""
        radii = self.snapshots[0].radii
        taus = self.snapshot_taus()
        tau = -math.log(-t_shift)
        if tau < taus[0] - 1e-12 or tau > taus[-1] + 1e-12:
            raise ResolutionError(f"tau={tau:.4g} outside the resolved range")
        logs = np.log(np.array([s.values for s in self.snapshots]))
        vals = np.exp(PchipInterpolator(taus, logs, axis=0)(min(max(tau, taus[0]), taus[-1])))
        return GridProfile(radii, vals, Frame.UNSCALED, t_shift)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _is_uniform(u: np.ndarray) -> bool:
    return float(u.max() - u.min()) <= 1e-9 * float(u.min())


def run_to_pinch(cfg: SolverConfig, g: FlowGeometry, initial: GridProfile,
                 config_text: str = "") -> RunRecord:
    """Integrate the unscaled flow until the neck pinches or the run aborts.

    Snapshots are stored whenever ``-log(min u**2 / 2k)`` (a proxy for
    ``tau``) crosses a multiple of ``cfg.snapshot_dtau``.
    """
    if initial.frame is not Frame.UNSCALED:
        raise ValueError("runs start from an unscaled profile")
    _check_positive(initial)
    n = initial.radii.size
    p = initial
    dts: list[float] = []
    series: list[tuple[float, float, int]] = []  # (step index, u_min, argmin index)
    snaps: list[tuple[int, np.ndarray]] = [(0, p.values)]
    next_tau = _proxy_tau(p, g) + cfg.snapshot_dtau
    status = "max_steps"
    # round-off on an unstable cylinder grows like 1 / (T - t), so uniformity
    # is decided from the data and boundary condition, not the final state;
    # a held Dirichlet value breaks uniformity as soon as the interior shrinks
    degenerate = _is_uniform(p.values) and cfg.outer_bc == "neumann_zero"

    def note(i, prof):
        j = int(np.argmin(prof.values))
        series.append((i, float(prof.values[j]), j))

    note(0, p)
    while True:
        u_min = float(np.min(p.values))
        if u_min <= cfg.u_min_stop:
            status = "pinched"
            break
        if len(dts) >= cfg.max_steps:
            status = "max_steps"
            break
        try:
            new, dt = _try_step(p, _step_size(p, cfg), g, cfg)
        except StepRejected as exc:
            if exc.reason == "gradient":
                status = "gradient_blowup"
                break
            raise
        rate = float(np.max(np.abs(new.values - p.values))) / dt
        p = new
        dts.append(dt)
        note(len(dts), p)
        if not degenerate and series[-1][2] >= n - 1 - 10:
            status = "boundary_contaminated"
            break
        if cfg.outer_bc == "dirichlet" and rate < cfg.stall_tol:
            # only the boundary can hold a neck open in a stationary state
            status = "boundary_contaminated"
            break
        tau_hat = _proxy_tau(p, g)
        if tau_hat >= next_tau:
            snaps.append((len(dts), p.values))
            next_tau = cfg.snapshot_dtau * (math.floor(tau_hat / cfg.snapshot_dtau) + 1)

    if snaps[-1][0] != len(dts):
        snaps.append((len(dts), p.values))

    # time of state i relative to the last state: minus the sum of later steps
    tail = np.concatenate([np.cumsum(np.asarray(dts[::-1]))[::-1], [0.0]])
    rel = -tail
    snapshots = [GridProfile(initial.radii, vals, Frame.UNSCALED, rel[i]) for i, vals in snaps]
    radii = initial.radii
    mrs = np.array([(rel[i], um, np.nan if degenerate else radii[j]) for i, um, j in series])
    time_origin = initial.timestamp + math.fsum(dts)
    rec = RunRecord(config_hash=config_hash(config_text), geometry=g, snapshots=snapshots,
                    min_radius_series=mrs, status=status, time_origin=time_origin,
                    degenerate=degenerate, steps=len(dts), solver=cfg)
    if status == "pinched":
        try:
            rec.t_star, rec.t_star_uncertainty = estimate_blowup_time(rec)
        except InsufficientSamplesError as exc:
            log.warning("no blow-up time estimate: %s", exc)
    log.info("run finished: status=%s steps=%d", status, len(dts))
    return rec


def _proxy_tau(p: GridProfile, g: FlowGeometry) -> float:
    return -math.log(float(np.min(p.values)) ** 2 / (2 * g.k))


def fit_blowup_time(t, u_min, k: int = 1) -> tuple:
    """Fit ``log u_min**2 = c + log(T* - t) + beta / log(T* - t)``.

    ``c`` (nominally ``log 2k``) and ``beta`` absorb the slow logarithmic
    drift of the neck radius, ``v(0) ~ sqrt(2k) (1 - m / 2 tau)``.  Solves for
    ``T* - t_last`` on a log scale so the answer keeps relative precision when
    it is tiny; ``c`` and ``beta`` are eliminated by linear least squares.
    Returns ``(T*, uncertainty)`` with the uncertainty the RMS residual
    times ``T* - t_last``.
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(u_min, dtype=float)
    t_last = t[-1]
    lag = t_last - t
    logu2 = np.log(u * u)

    def resid(log_gap):
        log_g = np.log(math.exp(log_gap) + lag)
        design = np.column_stack([np.ones_like(log_g), 1.0 / log_g])
        target = logu2 - log_g
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        return target - design @ coef

    def cost(log_gap):
        return float(np.sum(resid(log_gap) ** 2))

    g0 = u[-1] ** 2 / (2 * k)
    lo, hi = math.log(g0) - 14.0, math.log(g0) + 14.0
    # coarse scan then bounded refinement to avoid spurious minima at the ends
    grid = np.linspace(lo, hi, 113)
    costs = [cost(x) for x in grid]
    i = int(np.argmin(costs))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best = minimize_scalar(cost, bounds=(a, b), method="bounded",
                           options={"xatol": 1e-13, "maxiter": 500})
    gap = math.exp(best.x)
    rms = math.sqrt(cost(best.x) / t.size)
    return t_last + gap, rms * gap


def estimate_blowup_time(rec: RunRecord) -> tuple:
    """Blow-up time from the last decade of the minimum-radius series.

    Returns ``(T*, uncertainty)`` in the record's time coordinate.
    """
    if rec.status != "pinched":
        raise InsufficientSamplesError(f"run status is {rec.status!r}, not pinched")
    s = rec.min_radius_series
    u = s[:, 1]
    u_last = u[-1]
    sel = u <= 10.0 * u_last
    if np.count_nonzero(sel) < 10:
        raise InsufficientSamplesError(
            f"only {np.count_nonzero(sel)} samples in the last decade of u_min (need 10)")
    return fit_blowup_time(s[sel, 0], u[sel], rec.geometry.k)
