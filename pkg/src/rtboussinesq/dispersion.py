"""Growth rate λ0(ξ) from the fixed point -λ0² = Φ(λ0, ξ) and the dispersion curve."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import bisect, brentq, minimize_scalar

from .forms import assemble_forms
from .params import PhysicalParams, SteadyProfile
from .spectral1d import Basis01
from .variational import el_residual, lambda_c, phi


class StableProfileError(ValueError):
    """Raised when a growth rate is requested but none exists."""


class SupportError(ValueError):
    """Raised when a synthesis support contains stable frequencies."""


@dataclass(frozen=True)
class GrowthPoint:
    xi: float
    lambda0: Optional[float]
    lambda_c: Optional[float]
    phi_at_lambda0: Optional[float]
    el_interior_residual: Optional[float]
    bc_residuals: tuple
    minimizer: Optional[np.ndarray] = field(default=None, repr=False)
    dphi_ds: Optional[float] = None
    basis: Optional[Basis01] = field(default=None, repr=False)

    @property
    def unstable(self) -> bool:
        return self.lambda0 is not None


@dataclass(frozen=True)
class GrowthCurve:
    points: list
    capital_lambda: float
    argmax_xi: Optional[float]
    all_stable: bool
    params: PhysicalParams = None
    profile_tag: str = ""

    @property
    def xi(self) -> np.ndarray:
        return np.array([p.xi for p in self.points])

    @property
    def lambda0(self) -> np.ndarray:
        return np.array([np.nan if p.lambda0 is None else p.lambda0 for p in self.points])

    @property
    def lambda_c(self) -> np.ndarray:
        return np.array([np.nan if p.lambda_c is None else p.lambda_c for p in self.points])


def growth_rate(basis: Basis01, profile: SteadyProfile, params: PhysicalParams,
                xi: float, tol: float = 1e-10, residuals: bool = True) -> GrowthPoint:
    if tol <= 0:
        raise ValueError("tol must be positive")
    fm = assemble_forms(basis, profile, params, xi)
    lc = lambda_c(fm)
    if not lc.present:
        return GrowthPoint(xi=fm.xi, lambda0=None, lambda_c=None, phi_at_lambda0=None,
                           el_interior_residual=None, bc_residuals=(None, None), basis=basis)
    lam_c = lc.value

    def f(s):
        val = phi(fm, s).value
        if not np.isfinite(val):
            raise FloatingPointError(f"non-finite Φ at s={s}")
        return val + s * s

    s_lo = min(tol, lam_c * 1e-6)
    f_lo, f_hi = f(s_lo), f(lam_c)
    if not (f_lo < 0.0 < f_hi):
        raise RuntimeError(
            f"bracket sign pattern violated at xi={xi}: f({s_lo:g})={f_lo:g}, f(λc)={f_hi:g}")
    root = bisect(f, s_lo, lam_c, xtol=tol * lam_c, rtol=4 * np.finfo(float).eps, maxiter=200)
    pr = phi(fm, root)
    w = pr.minimizer
    dphi = float(w @ (fm.e0 + fm.e1) @ w)  # J(w)=1; derivative of Φ in s
    if residuals:
        r = el_residual(fm, pr)
        el, bcs = r.interior, (r.bc_top, r.bc_bottom)
    else:
        el, bcs = None, (None, None)
    return GrowthPoint(xi=fm.xi, lambda0=float(root), lambda_c=lam_c,
                       phi_at_lambda0=pr.value, el_interior_residual=el, bc_residuals=bcs,
                       minimizer=w, dphi_ds=dphi, basis=basis)


def root_certificate(gp: GrowthPoint, tol: float = 1e-10) -> bool:
    """|Φ(λ0)+λ0²| within the bisection tolerance scaled by the slope."""
    if not gp.unstable:
        return True
    bound = 10.0 * tol * gp.lambda_c * max(1.0, abs(gp.dphi_ds) + 2 * gp.lambda0)
    return abs(gp.phi_at_lambda0 + gp.lambda0**2) <= bound


def _refine_argmax(basis, profile, params, xi_grid, lam, k, tol):
    if k == 0 or k == len(xi_grid) - 1:
        return xi_grid[k], lam[k]

    def neg(x):
        gp = growth_rate(basis, profile, params, x, tol, residuals=False)
        return -(gp.lambda0 or 0.0)

    res = minimize_scalar(neg, bracket=(xi_grid[k - 1], xi_grid[k], xi_grid[k + 1]),
                          method="golden", options={"xtol": 1e-6})
    if -res.fun > lam[k]:
        return float(res.x), float(-res.fun)
    return xi_grid[k], lam[k]


def dispersion_curve(basis: Basis01, profile: SteadyProfile, params: PhysicalParams,
                     xi_grid: Sequence[float], tol: float = 1e-10, refine: bool = True,
                     workers: int = 1) -> GrowthCurve:
    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.ndim != 1 or xi_grid.size < 3:
        raise ValueError("xi grid needs at least 3 points")
    if np.any(xi_grid <= 0) or np.any(np.diff(xi_grid) <= 0):
        raise ValueError("xi grid must be positive and strictly increasing")

    def one(x):
        return growth_rate(basis, profile, params, x, tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(one, xi_grid))
    else:
        points = [one(x) for x in xi_grid]
    lam = np.array([p.lambda0 if p.unstable else -np.inf for p in points])
    if not np.any(np.isfinite(lam)):
        return GrowthCurve(points=points, capital_lambda=0.0, argmax_xi=None, all_stable=True,
                           params=params, profile_tag=profile.tag)
    k = int(np.argmax(lam))
    if refine:
        xi_star, cap = _refine_argmax(basis, profile, params, xi_grid, lam, k, tol)
    else:
        xi_star, cap = xi_grid[k], lam[k]
    return GrowthCurve(points=points, capital_lambda=float(cap), argmax_xi=float(xi_star),
                       all_stable=False, params=params, profile_tag=profile.tag)


def lambda_f(curve: GrowthCurve, support) -> float:
    """Infimum of λ0 over a support interval (a, b), interpolating at the ends."""
    a, b = float(support[0]), float(support[1])
    xi = curve.xi
    lam = curve.lambda0
    if a > b:
        raise ValueError("support interval must satisfy a <= b")
    if a < xi[0] or b > xi[-1]:
        raise SupportError("support not admissible: outside the curve's frequency range")
    lo = np.searchsorted(xi, a, side="right") - 1
    hi = np.searchsorted(xi, b, side="left")
    if np.any(np.isnan(lam[lo:hi + 1])):
        raise SupportError("support not admissible: contains a stable frequency")
    inside = (xi >= a) & (xi <= b)
    vals = list(lam[inside])
    vals.append(float(np.interp(a, xi, lam)))
    vals.append(float(np.interp(b, xi, lam)))
    return float(min(vals))


def half_growth_support(curve: GrowthCurve, basis, profile, params, fraction: float = 0.5,
                        tol: float = 1e-10):
    """Connected interval around the argmax on which λ0 ≥ fraction·Λ.

    Endpoints are located by root finding on λ0(ξ) - fraction·Λ, using the
    grid only to bracket. Returns (a, b); an end stays at the grid boundary
    if λ0 never drops below the threshold there.
    """
    if curve.all_stable:
        raise StableProfileError("profile is RT-stable; no growth rate exists")
    level = fraction * curve.capital_lambda
    xi = curve.xi
    lam = np.nan_to_num(curve.lambda0, nan=-np.inf)
    k = int(np.argmin(np.abs(xi - curve.argmax_xi)))

    def g(x):
        gp = growth_rate(basis, profile, params, x, tol, residuals=False)
        return (gp.lambda0 if gp.unstable else 0.0) - level

    i = k
    while i > 0 and lam[i - 1] >= level:
        i -= 1
    a = xi[0] if i == 0 else brentq(g, xi[i - 1], xi[i], xtol=1e-12)
    j = k
    while j < len(xi) - 1 and lam[j + 1] >= level:
        j += 1
    b = xi[-1] if j == len(xi) - 1 else brentq(g, xi[j], xi[j + 1], xtol=1e-12)
    return float(a), float(b)


def default_xi_grid(n: int = 64, lo: float = 0.1, hi: float = 50.0) -> np.ndarray:
    return np.geomspace(lo, hi, n)
