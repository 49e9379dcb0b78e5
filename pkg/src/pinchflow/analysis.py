"""Fitting rescaled profiles to the quadratic-neck ansatz.

The ansatz is ``v(rho) = sqrt((2 + b rho**2) / (2 a)) + eta(rho)`` on the
window ``rho <= Omega(tau)``.  Squaring makes it linear,
``v**2 = 1/a + (b / 2a) rho**2``, so the fit is an ordinary least-squares
problem with a closed-form solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from pinchflow.errors import FitError
from pinchflow.frames import (
    MATCH_EXPONENT,
    Frame,
    GridProfile,
    WindowSpec,
    japanese_bracket,
    omega_radius,
)

MIN_WINDOW_POINTS = 20
NORM_NAMES = ("norm_w3", "norm_w2_grad", "norm_w1_hess")


@dataclass
class ProfileFit:
    tau: float
    a: float
    b: float
    window: float
    residual_l2: float
    radii: np.ndarray
    eta: np.ndarray
    degenerate: bool = False
    norms: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.a > 0:
            raise FitError(f"fitted a={self.a} is not positive")
        if not self.window > 0:
            raise FitError("window must be positive")

    def model(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.sqrt((2.0 + self.b * rho * rho) / (2.0 * self.a))


def fit_profile(v: GridProfile, w: WindowSpec = WindowSpec()) -> ProfileFit:
    """Least-squares fit of ``(a, b)`` in squared variables on ``rho <= Omega``.

    If ``v**2`` carries no detectable ``rho**2`` term (near-constant data or an
    ill-conditioned window) ``b`` is reported as 0 and ``degenerate`` is set.
    """
    if v.frame is not Frame.RESCALED:
        raise FitError("fit_profile needs a rescaled profile")
    tau = v.timestamp
    window = omega_radius(tau, w)
    mask = v.radii <= window
    rho = v.radii[mask]
    if rho.size < MIN_WINDOW_POINTS:
        raise FitError(f"window rho <= {window:.4g} holds {rho.size} points, "
                       f"need {MIN_WINDOW_POINTS}")
    vals = v.values[mask]
    target = vals * vals
    scale = rho[-1] ** 2
    design = np.column_stack([np.ones_like(rho), (rho * rho) / scale])
    coef, _, rank, sing = np.linalg.lstsq(design, target, rcond=None)
    cond = sing[0] / sing[-1] if rank == 2 else math.inf
    intercept, slope = coef[0], coef[1] / scale
    degenerate = (not math.isfinite(cond) or cond > 1e12
                  or abs(coef[1]) <= 1e-10 * abs(intercept))
    if degenerate:
        intercept, slope = float(np.mean(target)), 0.0
    if not intercept > 0:
        raise FitError("fitted intercept of v**2 is not positive")
    a = 1.0 / intercept
    b = 2.0 * a * slope
    resid = target - (intercept + slope * rho * rho)
    fit = ProfileFit(tau=tau, a=a, b=b, window=window,
                     residual_l2=float(np.sqrt(np.sum(resid * resid))),
                     radii=rho, eta=np.zeros_like(rho), degenerate=bool(degenerate))
    fit.eta = vals - fit.model(rho)
    fit.norms = remainder_norms(fit)
    return fit


def _second_derivative(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.gradient(np.gradient(f, x, edge_order=2), x, edge_order=2)
    if x.size >= 3:
        a = x[1:-1] - x[:-2]
        b = x[2:] - x[1:-1]
        out[1:-1] = 2 * (b * f[:-2] - (a + b) * f[1:-1] + a * f[2:]) / (a * b * (a + b))
    return out


def remainder_norms(fit: ProfileFit) -> dict:
    """Weighted sup-norms of the remainder on the fit window.

    ``norm_w3 = sup |eta| / <rho>**3``, ``norm_w2_grad = sup |eta_rho| / <rho>**2``
    and ``norm_w1_hess = sup |eta_rho_rho| / <rho>``.  The angular derivatives
    of a rotationally symmetric remainder vanish and are reported as 0.
    ``norm_w1_hess_full`` also includes the tangential Hessian eigenvalue
    ``eta_rho / rho``.
    """
    rho, eta = fit.radii, fit.eta
    if rho.size < 3:
        raise FitError("need at least 3 window points for derivatives")
    bracket = japanese_bracket(rho)
    grad = np.gradient(eta, rho, edge_order=2)
    hess = _second_derivative(eta, rho)
    tangential = np.zeros_like(grad)
    tangential[1:] = grad[1:] / rho[1:]
    tangential[0] = hess[0]
    full = np.maximum(np.abs(hess), np.abs(tangential))
    return {
        "norm_w3": float(np.max(np.abs(eta) / bracket ** 3)),
        "norm_w2_grad": float(np.max(np.abs(grad) / bracket ** 2)),
        "norm_w1_hess": float(np.max(np.abs(hess) / bracket)),
        "norm_w1_hess_full": float(np.max(full / bracket)),
        "norm_w3_dtheta": 0.0,
        "norm_w3_dtheta2": 0.0,
        "norm_w2_grad_dtheta": 0.0,
    }


@dataclass(frozen=True)
class MainProfileCheck:
    tau: float
    sup_deviation: float
    mean_deviation: float
    window: float
    achieved_fraction: float


def check_main_profile(v: GridProfile) -> MainProfileCheck:
    """Deviation of ``v`` from ``sqrt(2 + rho**2 / tau)`` on ``rho <= 2 tau**0.55``."""
    if v.frame is not Frame.RESCALED:
        raise FitError("check_main_profile needs a rescaled profile")
    tau = v.timestamp
    if not tau > 0:
        raise FitError("tau must be positive")
    window = 2.0 * tau ** MATCH_EXPONENT
    fraction = 1.0
    if window > v.radii[-1]:
        fraction = float(v.radii[-1] / window)
        warnings.warn(f"main-profile window {window:.4g} exceeds the grid; "
                      f"only {fraction:.1%} covered", RuntimeWarning, stacklevel=2)
    mask = v.radii <= window
    rho = v.radii[mask]
    dev = np.abs(v.values[mask] / np.sqrt(2.0 + rho * rho / tau) - 1.0)
    return MainProfileCheck(tau, float(dev.max()), float(dev.mean()), window, fraction)


def remainder_bound_implication(tau: float, radius_factor: float = 3.0,
                                n: int = 2001) -> tuple:
    """Worst-case check that ``|eta| <= <y>**3 / tau**2`` gives a small deviation.

    Takes the extremal remainder ``eta = <y>**3 / tau**2`` on
    ``|y| <= radius_factor * tau**0.55`` and returns
    ``(sup |eta|, tau**-0.1, sup |eta| <= tau**-0.1)``.
    """
    y = np.linspace(0.0, radius_factor * tau ** MATCH_EXPONENT, n)
    eta = japanese_bracket(y) ** 3 / tau ** 2
    sup = float(eta.max())
    bound = tau ** -0.1
    return sup, bound, sup <= bound
