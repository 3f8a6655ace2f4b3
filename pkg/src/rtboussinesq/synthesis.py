"""Real growing solutions on the strip by superposing normal modes over ξ.

For a weight f supported in [c - w, c + w] ⊂ (0, ∞), parity of the modes
in ξ gives the real form

    v1 = (1/π) ∫ f sin(ξ x1) U1 e^{λ0 t} dξ
    v2 = (1/π) ∫ f cos(ξ x1) U2 e^{λ0 t} dξ
    π  = (1/π) ∫ f cos(ξ x1) ϖ  e^{λ0 t} dξ
    Θ  = (1/π) ∫ f cos(ξ x1) h  e^{λ0 t} dξ

The ξ-integral uses Gauss-Legendre nodes on the support; x1 uses the
trapezoid rule on [-L, L] and x2 the Gauss-Lobatto rule of the modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_legendre

from .dispersion import GrowthCurve, SupportError, growth_rate
from .modes import build_mode, profile_matrix
from .params import PhysicalParams, SteadyProfile
from .spectral1d import Basis01

FIELDS = ("v1", "v2", "pi", "theta")
_PROFILE = {"v1": "u1", "v2": "u2", "pi": "varpi", "theta": "h"}
_TRIG = {"v1": "sin", "v2": "cos", "pi": "cos", "theta": "cos"}


@dataclass(frozen=True)
class BumpWeight:
    """f(r) = amplitude * exp(-1/(1 - ((r - c)/w)^2)) on |r - c| < w."""

    center: float
    width: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")
        if self.center - self.width <= 0:
            raise SupportError("support not admissible: must lie in ξ > 0")

    @property
    def support(self):
        return (self.center - self.width, self.center + self.width)

    def __call__(self, r):
        u = (np.asarray(r, dtype=float) - self.center) / self.width
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return out

    def as_dict(self):
        return {"center": self.center, "width": self.width, "amplitude": self.amplitude}


def _trig(kind: str, order: int, xi, x):
    """d^order/dx of trig(ξx), as (values, sign) on the grid x × ξ."""
    arg = np.outer(x, xi)
    # derivative cycle: cos -> -sin -> -cos -> sin ; sin -> cos -> -sin -> -cos
    cyc_cos = [(np.cos, 1.0), (np.sin, -1.0), (np.cos, -1.0), (np.sin, 1.0)]
    cyc_sin = [(np.sin, 1.0), (np.cos, 1.0), (np.sin, -1.0), (np.cos, -1.0)]
    fn, sign = (cyc_cos if kind == "cos" else cyc_sin)[order % 4]
    return sign * fn(arg) * xi[None, :] ** order


@dataclass
class SynthesizedFields:
    times: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    f_profile: BumpWeight
    xi_nodes: np.ndarray
    xi_weights: np.ndarray
    lambdas: np.ndarray
    modes: list = field(repr=False)
    hk_norms: np.ndarray = None
    n_xi_history: list = field(default_factory=list)

    def _coef(self, t):
        return self.xi_weights * self.f_profile(self.xi_nodes) * np.exp(self.lambdas * t) / np.pi

    def _profiles(self, name, x2, order):
        return profile_matrix(self.modes, _PROFILE[name], x2, order).T

    def field(self, name: str, t: float, d1: int = 0, d2: int = 0, x1=None, x2=None):
        """Field (or derivative ∂1^d1 ∂2^d2) on the tensor grid x1 × x2."""
        x1 = self.x1 if x1 is None else np.asarray(x1, dtype=float)
        x2 = self.x2 if x2 is None else np.asarray(x2, dtype=float)
        trig = _trig(_TRIG[name], d1, self.xi_nodes, x1)
        prof = self._profiles(name, x2, d2)
        return (trig * self._coef(t)[None, :]) @ prof

    def evaluate(self, name: str, x1, x2, t: float, d1: int = 0, d2: int = 0):
        """Field at scattered points (x1[i], x2[i])."""
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        trig = _trig(_TRIG[name], d1, self.xi_nodes, x1)
        prof = self._profiles(name, x2, d2)  # (Q, P)
        return np.einsum("pq,q,qp->p", trig, self._coef(t), prof)

    def snapshot(self, t_index: int) -> dict:
        t = self.times[t_index]
        return {name: self.field(name, t) for name in FIELDS}


def _hk_terms(fields: SynthesizedFields, k: int):
    """Gram matrices whose weighted sums give the squared H^k norm."""
    terms = []
    for name in FIELDS:
        for total in range(k + 1):
            for d1 in range(total + 1):
                d2 = total - d1
                t1 = _trig(_TRIG[name], d1, fields.xi_nodes, fields.x1)
                g1 = (t1 * fields.w1[:, None]).T @ t1
                p = fields._profiles(name, fields.x2, d2)
                g2 = (p * fields.w2[None, :]) @ p.T
                terms.append(g1 * g2)
    return sum(terms)


def _norms(fields: SynthesizedFields, kmax: int = 2) -> np.ndarray:
    out = np.zeros((len(fields.times), kmax + 1))
    for k in range(kmax + 1):
        gram = _hk_terms(fields, k)
        for i, t in enumerate(fields.times):
            c = fields._coef(t)
            out[i, k] = np.sqrt(max(c @ gram @ c, 0.0))
    return out


def hk_norm(fields: SynthesizedFields, k: int, t_index: int) -> float:
    """Discrete H^k norm of (v, π, Θ) over the truncated strip."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if fields.hk_norms is None:
        fields.hk_norms = _norms(fields)
    return float(fields.hk_norms[t_index, k])


def default_x1_grid(f: BumpWeight, length_factor: float = 8.0, points_per_wave: float = 4.0):
    """Uniform grid on [-L, L], L = length_factor * 2π / w, and trapezoid weights."""
    L = length_factor * 2.0 * np.pi / f.width
    xi_max = f.center + f.width
    h = 2.0 * np.pi / (points_per_wave * xi_max)
    n = int(np.ceil(2 * L / h)) + 1
    x = np.linspace(-L, L, n)
    w = np.full(n, x[1] - x[0])
    w[0] = w[-1] = 0.5 * w[0]
    return x, w


def build_synthesis_modes(basis: Basis01, profile: SteadyProfile, params: PhysicalParams,
                          f: BumpWeight, nq: int, tol: float = 1e-10):
    a, b = f.support
    y, w = roots_legendre(nq)
    nodes = a + 0.5 * (b - a) * (y + 1.0)
    weights = 0.5 * (b - a) * w
    modes = []
    for xi in nodes:
        gp = growth_rate(basis, profile, params, xi, tol, residuals=False)
        if not gp.unstable:
            raise SupportError(f"support not admissible: ξ={xi:.6g} is stable")
        modes.append(build_mode(gp, profile, params))
    return nodes, weights, modes


def synthesize(curve: Optional[GrowthCurve], f: BumpWeight, times: Sequence[float],
               basis: Basis01, profile: SteadyProfile, params: PhysicalParams,
               x1_grid=None, nq: int = 33, norm_tol: float = 1e-8, max_nq: int = 528,
               length_factor: float = 8.0, tol: float = 1e-10) -> SynthesizedFields:
    """Superpose modes over supp(f), doubling the ξ-quadrature until the
    H^k norms (k ≤ 2, all times) change by less than ``norm_tol`` relative."""
    if nq < 33:
        raise ValueError("at least 33 ξ-quadrature nodes are required")
    a, b = f.support
    if curve is not None:
        xs = curve.xi
        if a < xs[0] or b > xs[-1]:
            raise SupportError("support not admissible: outside the curve's frequency range")
        inside = (xs >= a) & (xs <= b)
        if np.any(np.isnan(curve.lambda0[inside])):
            raise SupportError("support not admissible: contains a stable frequency")
    if x1_grid is None:
        x1, w1 = default_x1_grid(f, length_factor)
    else:
        x1 = np.asarray(x1_grid, dtype=float)
        w1 = np.gradient(x1)
        w1[0] *= 0.5
        w1[-1] *= 0.5
    x2 = basis.grid.nodes
    w2 = basis.grid.weights
    times = np.asarray(times, dtype=float)
    history = []
    prev = None
    while True:
        nodes, weights, modes = build_synthesis_modes(basis, profile, params, f, nq, tol)
        fields = SynthesizedFields(
            times=times, x1=x1, x2=x2, w1=w1, w2=w2, f_profile=f, xi_nodes=nodes,
            xi_weights=weights, lambdas=np.array([m.lambda0 for m in modes]), modes=modes)
        fields.hk_norms = _norms(fields)
        history.append(nq)
        if prev is not None:
            change = np.max(np.abs(fields.hk_norms - prev) / np.maximum(np.abs(prev), 1e-300))
            if change < norm_tol or 2 * nq > max_nq:
                break
        prev = fields.hk_norms
        nq *= 2
    fields.n_xi_history = history
    return fields
