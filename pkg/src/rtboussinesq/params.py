"""Physical parameters and steady background temperature profiles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq


class ValidationError(ValueError):
    """Raised when user-supplied inputs violate a documented precondition."""


@dataclass(frozen=True)
class PhysicalParams:
    mu: float
    g: float
    k0: float = 0.0
    k1: float = 0.0

    def __post_init__(self):
        for name in ("mu", "g", "k0", "k1"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.mu <= 0:
            raise ValidationError("mu must be positive")
        if self.g <= 0:
            raise ValidationError("g must be positive")
        if self.k0 > 0 or self.k1 > 0:
            raise ValidationError("slip coefficients must be non-positive")

    @property
    def free_slip(self) -> bool:
        return self.k0 == 0.0 and self.k1 == 0.0


Fn = Callable[[np.ndarray], np.ndarray]

N_SAMPLES = 1025


@dataclass(frozen=True)
class SteadyProfile:
    """Background temperature on [0,1] with exact evaluation hooks.

    ``theta``, ``dtheta`` and ``d2theta`` accept arrays of x2 values. The
    sampled arrays on ``x_samples`` are kept for plotting and export.
    """

    kind: str
    spec: Mapping
    theta: Fn
    dtheta: Fn
    d2theta: Fn
    d3theta: Fn
    smoothness: int = 8
    x_samples: np.ndarray = field(default=None, repr=False)
    theta_samples: np.ndarray = field(default=None, repr=False)
    dtheta_samples: np.ndarray = field(default=None, repr=False)
    d2theta_samples: np.ndarray = field(default=None, repr=False)

    @property
    def tag(self) -> str:
        items = ",".join(f"{k}={v}" for k, v in self.spec.items() if k != "kind" and k != "samples")
        return f"{self.kind}({items})"

    def max_abs_dtheta(self) -> float:
        """sup |Dθ̄| estimated on a dense sample plus the stored samples."""
        x = np.linspace(0.0, 1.0, 4097)
        return float(np.max(np.abs(self.dtheta(x))))

    @property
    def is_constant_gradient(self) -> bool:
        return self.kind == "linear"


def _finish(kind, spec, th, dth, d2th, d3th, smoothness=8) -> SteadyProfile:
    x = np.linspace(0.0, 1.0, N_SAMPLES)
    return SteadyProfile(
        kind=kind, spec=dict(spec), theta=th, dtheta=dth, d2theta=d2th, d3theta=d3th,
        smoothness=smoothness, x_samples=x, theta_samples=th(x),
        dtheta_samples=dth(x), d2theta_samples=d2th(x),
    )


def linear_profile(beta: float, offset: float = 0.0) -> SteadyProfile:
    """θ̄ = offset + beta * x2."""
    beta = float(beta)
    offset = float(offset)
    if not np.isfinite(beta) or not np.isfinite(offset):
        raise ValidationError("linear profile coefficients must be finite")
    return _finish(
        "linear", {"kind": "linear", "beta": beta, "offset": offset},
        lambda x: offset + beta * np.asarray(x, dtype=float),
        lambda x: np.full_like(np.asarray(x, dtype=float), beta),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def tanh_profile(center: float, width: float, jump: float) -> SteadyProfile:
    """θ̄ = (jump/2) tanh((x2 - center)/width)."""
    center, width, jump = float(center), float(width), float(jump)
    if not all(np.isfinite([center, width, jump])):
        raise ValidationError("tanh profile parameters must be finite")
    if width <= 0:
        raise ValidationError("tanh profile width must be positive")
    if not 0.0 < center < 1.0:
        raise ValidationError("tanh profile center must lie in (0,1)")
    a = 0.5 * jump

    def th(x):
        return a * np.tanh((np.asarray(x, dtype=float) - center) / width)

    def dth(x):
        z = (np.asarray(x, dtype=float) - center) / width
        return a / width / np.cosh(z) ** 2

    def d2th(x):
        z = (np.asarray(x, dtype=float) - center) / width
        return -2.0 * a / width**2 * np.tanh(z) / np.cosh(z) ** 2

    def d3th(x):
        z = (np.asarray(x, dtype=float) - center) / width
        sech2 = 1.0 / np.cosh(z) ** 2
        return 2.0 * a / width**3 * sech2 * (2.0 * np.tanh(z) ** 2 - sech2)

    return _finish("tanh", {"kind": "tanh", "center": center, "width": width, "jump": jump},
                   th, dth, d2th, d3th)


def table_profile(x, values, degree: int = 5) -> SteadyProfile:
    """Spline interpolant (default quintic, order 6) through tabulated samples."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != values.shape:
        raise ValidationError("table profile needs matching 1-D x and value arrays")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(values))):
        raise ValidationError("table profile samples must be finite")
    if np.any(np.diff(x) <= 0):
        raise ValidationError("table profile x samples must be strictly increasing")
    if x[0] > 0.0 or x[-1] < 1.0:
        raise ValidationError("table profile samples must cover [0,1]")
    if degree < 3:
        raise ValidationError("table profile interpolation order must be at least 4")
    if x.size <= degree:
        raise ValidationError(f"table profile needs more than {degree} samples")
    spl = make_interp_spline(x, values, k=degree)
    d1 = spl.derivative(1)
    d2 = spl.derivative(2)
    d3 = spl.derivative(3)
    spec = {"kind": "table", "samples": len(x), "degree": degree}
    return _finish("table", spec,
                   lambda z: spl(np.asarray(z, dtype=float)),
                   lambda z: d1(np.asarray(z, dtype=float)),
                   lambda z: d2(np.asarray(z, dtype=float)),
                   lambda z: d3(np.asarray(z, dtype=float)),
                   smoothness=degree - 1)


def make_profile(spec: Mapping) -> SteadyProfile:
    """Build a profile from a config mapping with a ``kind`` key."""
    kind = spec.get("kind")
    try:
        if kind == "linear":
            return linear_profile(spec["beta"], spec.get("offset", 0.0))
        if kind in ("tanh", "tanh_layer"):
            return tanh_profile(spec["center"], spec["width"], spec["jump"])
        if kind == "table":
            return table_profile(spec["x"], spec["theta"], spec.get("degree", 5))
    except KeyError as exc:
        raise ValidationError(f"profile.{exc.args[0]} is required for kind '{kind}'") from None
    raise ValidationError(f"profile.kind must be one of linear, tanh, table (got {kind!r})")


def rt_unstable_region(profile: SteadyProfile, tol: float = 0.0, samples: int = 4096):
    """Maximal sub-intervals of (0,1) on which Dθ̄ < -tol."""
    if tol < 0:
        raise ValidationError("tol must be non-negative")
    x = np.linspace(0.0, 1.0, samples + 1)
    f = profile.dtheta(x) + tol
    neg = f < 0
    intervals = []
    i = 0
    while i < len(x):
        if not neg[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(x) and neg[j + 1]:
            j += 1
        a = 0.0 if i == 0 else _edge(profile, tol, x[i - 1], x[i])
        b = 1.0 if j == len(x) - 1 else _edge(profile, tol, x[j], x[j + 1])
        intervals.append((float(a), float(b)))
        i = j + 1
    return intervals


def _edge(profile, tol, a, b):
    fa = profile.dtheta(np.array(a)) + tol
    fb = profile.dtheta(np.array(b)) + tol
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    return brentq(lambda s: float(profile.dtheta(np.array(s)) + tol), a, b, xtol=1e-14)


def steady_pressure(profile: SteadyProfile, params: PhysicalParams, grid=None) -> np.ndarray:
    """Hydrostatic pressure p̄ = g ∫_0^x θ̄ at the grid nodes, p̄(0)=0."""
    from .spectral1d import build_grid, integration_matrix

    if grid is None:
        grid = build_grid(96)
    return params.g * integration_matrix(grid) @ profile.theta(grid.nodes)
