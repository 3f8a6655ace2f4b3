"""Reconstruction of full normal modes (U1, U2, ϖ, h) from the minimizer.

With the ansatz v = (-i U1, U2) e^{i ξ x1 + λ t}, pressure ϖ e^{i ξ x1 + λ t}
and temperature h e^{i ξ x1 + λ t}, the linear system reads

    λU1 - ξϖ = μ(D² - ξ²)U1
    λU2 + Dϖ = μ(D² - ξ²)U2 + g h
    λh + U2 Dθ̄ = 0
    ξU1 + DU2 = 0

with U2(0) = U2(1) = 0 and the Navier conditions on DU1 at the walls.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import legendre as leg

from .dispersion import GrowthPoint, StableProfileError
from .params import PhysicalParams, SteadyProfile
from .spectral1d import DiffOps, legendre_derivative_matrix


def _ref(x):
    return 2.0 * np.asarray(x, dtype=float) - 1.0


def u2_derivatives(series_list, x, kmax: int):
    """Derivatives 0..kmax of several Legendre series at x, each (len(x), nseries)."""
    ncoef = max(len(c) for c in series_list)
    coefs = np.zeros((ncoef, len(series_list)))
    for q, c in enumerate(series_list):
        coefs[: len(c), q] = c
    vander = leg.legvander(_ref(x), ncoef - 1)
    dmat = 2.0 * legendre_derivative_matrix(ncoef)
    out = []
    for _ in range(kmax + 1):
        out.append(vander @ coefs)
        coefs = dmat @ coefs
    return out


def profile_matrix(modes, name: str, x, order: int = 0) -> np.ndarray:
    """Values (len(x), len(modes)) of profile `name` (u1, u2, varpi, h) or its
    x2-derivative of the given order (≤ 2) for a list of modes."""
    x = np.asarray(x, dtype=float)
    if name not in ("u1", "u2", "varpi", "h") or not 0 <= order <= 2:
        raise ValueError(f"unsupported field {name!r} or derivative order {order}")
    xi = np.array([m.xi for m in modes])
    lam = np.array([m.lambda0 for m in modes])
    mu = modes[0].params.mu
    need = {"u2": order, "u1": order + 1, "varpi": order + 3, "h": order + 1}[name]
    d = u2_derivatives([m.u2_series for m in modes], x, need)
    if name == "u2":
        return d[order]
    if name == "u1":
        return -d[order + 1] / xi
    if name == "varpi":
        # ϖ = (λU1 - μ(D²U1 - ξ²U1))/ξ with U1 = -DU2/ξ
        u1 = [-dk / xi for dk in d[1:]]
        return (lam * u1[order] - mu * (u1[order + 2] - xi**2 * u1[order])) / xi
    alt = np.array([m.h_variant == "du2" for m in modes])
    prof = modes[0].profile
    th = [prof.dtheta(x)[:, None], prof.d2theta(x)[:, None], prof.d3theta(x)[:, None]]
    if order == 0:
        h = -d[0] * th[0] / lam
    elif order == 1:
        h = -(d[1] * th[0] + d[0] * th[1]) / lam
    else:
        h = -(d[2] * th[0] + 2 * d[1] * th[1] + d[0] * th[2]) / lam
    if np.any(alt):
        h[:, alt] = (-d[order + 1] / lam)[:, alt]  # h = -DU2/λ
    return h


@dataclass
class Mode:
    xi: float
    lambda0: float
    x2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    varpi: np.ndarray
    h: np.ndarray
    profile: SteadyProfile = field(repr=False)
    params: PhysicalParams = field(repr=False)
    u2_series: np.ndarray = field(repr=False)
    h_variant: str = "consistent"

    def u2_derivs(self, x, kmax: int):
        """[U2, DU2, ..., D^kmax U2] at points x."""
        d = u2_derivatives([self.u2_series], x, kmax)
        return [dk[:, 0] for dk in d]

    def evaluate(self, name: str, x, order: int = 0) -> np.ndarray:
        """Profile `name` in {u1, u2, varpi, h} or its x2-derivative (order ≤ 2)."""
        return profile_matrix([self], name, x, order)[:, 0]

    def with_sign(self, sign: int) -> "Mode":
        """Mode at -ξ: U2, ϖ, h unchanged, U1 negated."""
        if sign > 0:
            return self
        return Mode(xi=-self.xi, lambda0=self.lambda0, x2=self.x2, u1=-self.u1, u2=self.u2,
                    varpi=self.varpi, h=self.h, profile=self.profile, params=self.params,
                    u2_series=self.u2_series, h_variant=self.h_variant)


def build_mode(gp: GrowthPoint, profile: SteadyProfile, params: PhysicalParams,
               ops: Optional[DiffOps] = None, xi: Optional[float] = None,
               h_variant: str = "consistent") -> Mode:
    """Full mode from a growth point; xi may be passed as ±gp.xi."""
    if not gp.unstable:
        raise StableProfileError("profile is RT-stable; no growth rate exists")
    if h_variant not in ("consistent", "du2"):
        raise ValueError("h_variant must be 'consistent' or 'du2'")
    basis = gp.basis
    series = basis.shen.series(gp.minimizer)
    x2 = basis.grid.nodes
    signed = gp.xi if xi is None else float(xi)
    if abs(abs(signed) - gp.xi) > 1e-12 * gp.xi:
        raise ValueError("xi must equal ± the growth point's frequency")
    base = Mode(xi=gp.xi, lambda0=gp.lambda0, x2=x2, u1=None, u2=None, varpi=None, h=None,
                profile=profile, params=params, u2_series=series, h_variant=h_variant)
    base.u2 = base.evaluate("u2", x2)
    base.u2[0] = base.u2[-1] = 0.0
    base.u1 = base.evaluate("u1", x2)
    base.varpi = base.evaluate("varpi", x2)
    base.h = base.evaluate("h", x2)
    return base.with_sign(1 if signed > 0 else -1)


def mode_residual(m: Mode, profile: SteadyProfile = None, params: PhysicalParams = None,
                  ops: Optional[DiffOps] = None) -> dict:
    """Normalized max-norm residuals of the four ODEs and the boundary conditions.

    Each equation's residual is divided by the largest magnitude among its
    individual terms; boundary residuals by max |DU1| and max |U2|.
    """
    profile = profile or m.profile
    params = params or m.params
    x = m.x2
    lam, mu, g = m.lambda0, params.mu, params.g
    xi = m.xi
    u2, du2, d2u2 = (m.evaluate("u2", x, k) for k in range(3))
    u1, du1, d2u1 = (m.evaluate("u1", x, k) for k in range(3))
    vp = m.evaluate("varpi", x)
    dvp = m.evaluate("varpi", x, 1)
    h = m.evaluate("h", x)
    dth = profile.dtheta(x)

    def norm(*terms):
        terms = np.array(terms)
        scale = np.max(np.abs(terms))
        return float(np.max(np.abs(terms.sum(axis=0))) / scale) if scale > 0 else 0.0

    r = {
        "momentum1": norm(lam * u1, -xi * vp, -mu * d2u1, mu * xi**2 * u1),
        "momentum2": norm(lam * u2, dvp, -mu * d2u2, mu * xi**2 * u2, -g * h),
        "temperature": norm(lam * h, u2 * dth),
        "divergence": norm(xi * u1, du2),
    }
    du1_scale = max(np.max(np.abs(du1)), np.max(np.abs(u1)) * max(abs(params.k0), abs(params.k1)) / mu)
    u2_scale = np.max(np.abs(u2))
    r["bc_u2"] = float(max(abs(u2[0]), abs(u2[-1])) / u2_scale)
    r["bc_top"] = float(abs(du1[-1] - params.k1 / mu * u1[-1]) / du1_scale)
    r["bc_bottom"] = float(abs(du1[0] + params.k0 / mu * u1[0]) / du1_scale)
    r["max"] = max(r.values())
    return r
