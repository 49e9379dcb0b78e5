"""Closed-form run records for testing the analysis and verification layers.

All records place the singularity at ``t = 0`` and store snapshots at
``t = -exp(-tau)`` on a grid of ``tau`` values.
"""

from __future__ import annotations

import math

import numpy as np

from pinchflow.asymptotics import X1_MAX, matching_tau
from pinchflow.frames import FlowGeometry, Frame, GridProfile
from pinchflow.solver import RunRecord, SolverConfig, make_grid


def _radii(extra_radii=()) -> np.ndarray:
    r = make_grid(SolverConfig())
    if len(extra_radii):
        r = np.unique(np.concatenate([r, np.asarray(extra_radii, dtype=float)]))
    return r


def ansatz_u(x, tau):
    """Unscaled radius of the exact neck ansatz ``v = sqrt(2 + rho**2 / tau)``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(2.0 * math.exp(-tau) + x * x / tau)


def _freeze_tau(x: np.ndarray, floor: float) -> np.ndarray:
    out = np.full(x.shape, floor)
    for i, xi in enumerate(x):
        if 0 < xi <= X1_MAX:
            out[i] = max(matching_tau(float(xi)).tau1, floor)
    return out


def _record(radii, taus, values_fn, degenerate=False) -> RunRecord:
    taus = np.asarray(taus, dtype=float)
    snaps = [GridProfile(radii, values_fn(tau), Frame.UNSCALED, -math.exp(-tau)) for tau in taus]
    series = np.array([(s.timestamp, s.values.min(), radii[int(np.argmin(s.values))])
                       for s in snaps])
    return RunRecord(config_hash="synthetic", geometry=FlowGeometry(), snapshots=snaps,
                     min_radius_series=series, status="pinched", t_star=0.0,
                     t_star_uncertainty=0.0, time_origin=0.0, degenerate=degenerate,
                     steps=len(snaps))


def ansatz_record(tau_max: float = 40.0, dtau: float = 0.25, tau_min: float = 1.0,
                  frozen: bool = False, extra_radii=()) -> RunRecord:
    """Snapshots of the exact ansatz for ``tau`` in ``[tau_min, tau_max]``.

    With ``frozen`` each radius stops evolving at its matching time, which
    gives a nonzero final profile ``u_0(x)``.
    """
    radii = _radii(extra_radii)
    taus = np.arange(tau_min, tau_max + dtau / 2, dtau)
    if not frozen:
        return _record(radii, taus, lambda tau: ansatz_u(radii, max(tau, 1e-3)))
    tf = _freeze_tau(radii, max(tau_min, 1e-3))

    def values(tau):
        te = np.maximum(np.minimum(tau, tf), 1e-3)
        return np.sqrt(2.0 * np.exp(-te) + radii * radii / te)

    return _record(radii, taus, values)


def final_profile_record(radii_exact, tau_max: float = 40.0) -> RunRecord:
    """Two snapshots whose last one is exactly ``u_0(x) = x / sqrt(-log x)``.

    ``radii_exact`` are inserted as grid nodes so interpolation is exact there.
    """
    radii = _radii(radii_exact)
    inner = (radii > 0) & (radii < 0.5)
    base = np.empty_like(radii)
    base[inner] = radii[inner] / np.sqrt(-np.log(radii[inner]))
    base[radii >= 0.5] = 0.5 / math.sqrt(math.log(2.0))
    base[0] = base[1] / 2

    def values(tau):
        return np.maximum(base, math.exp(-tau / 2) * math.sqrt(2.0)) if tau < tau_max else base

    return _record(radii, [tau_max - 1.0, tau_max], values)


def cylinder_record(tau_max: float = 30.0, dtau: float = 0.25) -> RunRecord:
    """Exact shrinking cylinder ``u = sqrt(-2t)``."""
    radii = _radii()
    taus = np.arange(0.0, tau_max + dtau / 2, dtau)
    return _record(radii, taus, lambda tau: np.full(radii.shape, math.sqrt(2.0 * math.exp(-tau))),
                   degenerate=True)
