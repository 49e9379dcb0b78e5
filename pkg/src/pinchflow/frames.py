"""Profile containers and the three coordinate frames of the pinch.

A profile is the radius function of the fiber sphere sampled on a radial grid
along the axis.  Three frames are used:

* ``unscaled``: ``u(r, t)`` in physical variables;
* ``rescaled``: ``v(rho, tau)`` with ``rho = r / sqrt(T - t)``,
  ``v = u / sqrt(T - t)`` and ``tau = -log(T - t)``;
* ``secondary``: ``h(z, s)`` obtained by zooming on the matching time ``t1``
  with length scale ``sqrt(tau1**0.1 * (-t1))``.

Every transform takes the blow-up time explicitly; in the secondary frame the
blow-up time is 0 (shift a run's times by its ``T*`` first).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from pinchflow.errors import FrameError, InvalidWindowError

#: exponent of the matching window ``|y1| = tau1 ** MATCH_EXPONENT``
MATCH_EXPONENT = 0.55
#: exponent of the secondary time dilation ``tau1 ** SECONDARY_EXPONENT``
SECONDARY_EXPONENT = 0.1


class Frame(str, enum.Enum):
    UNSCALED = "unscaled"
    RESCALED = "rescaled"
    SECONDARY = "secondary"


@dataclass(frozen=True)
class FlowGeometry:
    """Axis dimension ``m`` and fiber sphere dimension ``k``.

    The hypersurface is ``R^m x S^k`` near the singularity; the shrinking
    cylinder has radius ``sqrt(2k (T - t))``.
    """

    m: int = 3
    k: int = 1

    def __post_init__(self):
        for name in ("m", "k"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)) or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")

    @property
    def cylinder_radius(self) -> float:
        return math.sqrt(2.0 * self.k)


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GridProfile:
    """One time slice of the flow as a radial graph.

    ``radii`` start at 0 and increase strictly; ``values`` are positive.
    ``timestamp`` is ``t``, ``tau`` or ``s`` depending on ``frame``.  Secondary
    profiles also carry the matching time ``tau1`` they were built for.
    """

    radii: np.ndarray
    values: np.ndarray
    frame: Frame = Frame.UNSCALED
    timestamp: float = 0.0
    tau1: float | None = None

    def __post_init__(self):
        radii = _readonly(self.radii)
        values = _readonly(self.values)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frame", Frame(self.frame))
        object.__setattr__(self, "timestamp", float(self.timestamp))
        if radii.ndim != 1 or radii.shape != values.shape:
            raise ValueError("radii and values must be 1-d arrays of equal length")
        if radii.size < 2:
            raise ValueError("a profile needs at least two grid points")
        if not (np.all(np.isfinite(radii)) and np.all(np.isfinite(values))
                and math.isfinite(self.timestamp)):
            raise ValueError("profile contains non-finite entries")
        if radii[0] != 0.0:
            raise ValueError("radii must start at 0 (the axis)")
        if np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if np.any(values <= 0):
            raise ValueError("profile values must be positive")
        if self.frame is Frame.SECONDARY and self.tau1 is None:
            raise ValueError("secondary-frame profiles need tau1")

    def __len__(self):
        return self.radii.size

    def with_values(self, values, timestamp: float | None = None) -> "GridProfile":
        ts = self.timestamp if timestamp is None else timestamp
        return GridProfile(self.radii, values, self.frame, ts, self.tau1)

    def axis_slope(self) -> float:
        """One-sided difference quotient at the axis (zero for smooth data)."""
        return float((self.values[1] - self.values[0]) / self.radii[1])

    def interpolator(self) -> PchipInterpolator:
        return PchipInterpolator(self.radii, self.values, extrapolate=False)

    def __call__(self, r):
        """Monotone cubic interpolation of the profile at radii ``r``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.radii[-1]):
            raise FrameError("evaluation radius outside the grid")
        return self.interpolator()(r)

    def resample(self, radii) -> "GridProfile":
        radii = np.asarray(radii, dtype=float)
        return GridProfile(radii, self(radii), self.frame, self.timestamp, self.tau1)


@dataclass(frozen=True)
class WindowSpec:
    """Parameters of the growing window ``Omega(tau)``."""

    xi0: float = 0.0
    multiplier: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.xi0) and self.xi0 >= 0):
            raise ValueError("xi0 must be a finite non-negative number")
        if not (math.isfinite(self.multiplier) and self.multiplier > 0):
            raise ValueError("multiplier must be positive")


def omega_radius(tau: float, w: WindowSpec = WindowSpec()) -> float:
    """``multiplier * sqrt(100 log(tau) + 9 (tau - xi0)**1.1)``."""
    if not math.isfinite(tau) or tau <= 1.0 or tau < w.xi0:
        raise InvalidWindowError(
            f"window needs tau > 1 and tau >= xi0 (tau={tau}, xi0={w.xi0})")
    return w.multiplier * math.sqrt(100.0 * math.log(tau) + 9.0 * (tau - w.xi0) ** 1.1)


def japanese_bracket(y):
    y = np.asarray(y, dtype=float)
    return np.sqrt(1.0 + y * y)


@dataclass(frozen=True)
class MatchingPoint:
    """Radius ``|x1|`` and the times ``tau1``, ``t1 = -exp(-tau1)`` matched to it."""

    x1_norm: float
    tau1: float
    t1: float = field(default=float("nan"))

    def __post_init__(self):
        if not (0.0 < self.x1_norm < 1.0):
            raise ValueError("x1_norm must lie in (0, 1)")
        if not self.tau1 > 0:
            raise ValueError("tau1 must be positive")
        t1 = -math.exp(-self.tau1)
        if math.isnan(self.t1):
            object.__setattr__(self, "t1", t1)
        elif self.t1 != t1:
            raise ValueError("t1 must equal -exp(-tau1)")
        target = self.tau1 ** MATCH_EXPONENT
        if abs(math.exp(self.tau1 / 2) * self.x1_norm - target) > 1e-9 * target:
            raise ValueError("x1_norm and tau1 do not satisfy the matching relation")

    @classmethod
    def from_tau1(cls, tau1: float) -> "MatchingPoint":
        x1 = math.exp(MATCH_EXPONENT * math.log(tau1) - tau1 / 2)
        return cls(x1, tau1)

    @property
    def length_scale(self) -> float:
        """``sqrt(tau1**0.1 * (-t1))``, the secondary-frame unit of length."""
        return math.sqrt(self.tau1 ** SECONDARY_EXPONENT * -self.t1)

    @property
    def s_blowup(self) -> float:
        """Secondary time at which the zoomed flow becomes singular."""
        return self.tau1 ** -SECONDARY_EXPONENT

    @property
    def z1_norm(self) -> float:
        return self.x1_norm / self.length_scale


def _require_unscaled(p: GridProfile):
    if p.frame is not Frame.UNSCALED:
        raise FrameError(f"expected an unscaled profile, got {p.frame.value}")


def rescale_by(p: GridProfile, time_to_blowup: float) -> GridProfile:
    """Rescale ``p`` given ``T* - t`` directly.

    Keeps full relative precision when ``T* - t`` is far below the spacing of
    floats near ``t``.
    """
    _require_unscaled(p)
    if not (math.isfinite(time_to_blowup) and time_to_blowup > 0):
        raise FrameError("rescaling needs t < T*")
    root = math.sqrt(time_to_blowup)
    return GridProfile(p.radii / root, p.values / root, Frame.RESCALED,
                       -math.log(time_to_blowup))


def to_rescaled(p: GridProfile, pinch_time: float = 0.0) -> GridProfile:
    """Map ``u(r, t)`` to ``v(rho, tau)`` about the blow-up time ``pinch_time``."""
    if not math.isfinite(pinch_time):
        raise FrameError("pinch time must be finite")
    if p.timestamp >= pinch_time:
        raise FrameError(f"profile time {p.timestamp} is not before T*={pinch_time}")
    return rescale_by(p, pinch_time - p.timestamp)


def from_rescaled(p: GridProfile, pinch_time: float = 0.0) -> GridProfile:
    """Inverse of :func:`to_rescaled`."""
    if p.frame is not Frame.RESCALED:
        raise FrameError(f"expected a rescaled profile, got {p.frame.value}")
    if not math.isfinite(pinch_time):
        raise FrameError("pinch time must be finite")
    ttb = math.exp(-p.timestamp)
    root = math.sqrt(ttb)
    return GridProfile(p.radii * root, p.values * root, Frame.UNSCALED, pinch_time - ttb)


def to_secondary_frame(p: GridProfile, mp: MatchingPoint, *,
                       allow_negative_s: bool = False) -> GridProfile:
    """Zoom an unscaled profile (blow-up time 0) into the ``(z, h, s)`` frame.

    Times before ``t1`` (``s < 0``) are rejected unless ``allow_negative_s``.
    """
    _require_unscaled(p)
    if p.timestamp < mp.t1 and not allow_negative_s:
        raise FrameError("secondary frame starts at t1; profile is earlier")
    scale = mp.length_scale
    s = (p.timestamp - mp.t1) / (scale * scale)
    return GridProfile(p.radii / scale, p.values / scale, Frame.SECONDARY, s, mp.tau1)


def from_secondary_frame(p: GridProfile, mp: MatchingPoint) -> GridProfile:
    if p.frame is not Frame.SECONDARY:
        raise FrameError(f"expected a secondary profile, got {p.frame.value}")
    if p.tau1 != mp.tau1:
        raise FrameError("profile was built for a different matching point")
    scale = mp.length_scale
    return GridProfile(p.radii * scale, p.values * scale, Frame.UNSCALED,
                       mp.t1 + p.timestamp * scale * scale)


def secondary_h_identity(z, s: float, mp: MatchingPoint,
                         v_eval: Callable[[np.ndarray, float], np.ndarray]):
    """Evaluate ``h(z, s)`` from a rescaled-frame evaluator ``v_eval(y, tau)``.

    Uses ``h = sqrt(1 - q s) / tau1**0.05 * v(tau1**0.05 z / sqrt(1 - q s),
    tau1 - log(1 - q s))`` with ``q = tau1**0.1``.  Negative ``s`` (times
    before ``t1``) is allowed.
    """
    q = mp.tau1 ** SECONDARY_EXPONENT
    if s >= 1.0 / q:
        raise FrameError(f"s={s} is at or past the frame blow-up time {1.0 / q}")
    shrink = math.sqrt(1.0 - q * s)
    root_q = math.sqrt(q)
    y = root_q * np.asarray(z, dtype=float) / shrink
    tau = mp.tau1 - math.log(1.0 - q * s)
    return shrink / root_q * np.asarray(v_eval(y, tau), dtype=float)
