"""Semi-Galerkin time stepping on Ω_R = [-R, R] x [0, 1].

Velocity is expanded in the Stokes eigenbasis, u = Σ f_i e^i, and the modal
ODE

    f_i' = -λ_i f_i - Σ f_j f_k T_ijk + g ∫ θ e^i_2

is advanced with a Lawson (integrating-factor) RK4 step, so the Stokes
decay is integrated exactly and the step size is not limited by λ_m.
Temperature is carried by the method of characteristics: every grid node
stores its departure point A(t, x), updated each step by an RK4 backtrack
through the frozen velocity and composition with the previous map, and
θ(t, x) = θ_0(A(t, x)) is evaluated from the initial datum. The perturbed
system is handled through the total temperature θ̄ + Θ, which is
transported, so Θ(t, x) = θ̄(A_2) - θ̄(x_2) + Θ_0(A).

Each step is a Lie splitting: velocity with θ frozen, then transport with
the new velocity frozen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .params import PhysicalParams, SteadyProfile
from .stokes2d import StokesBasis

VelocityFn = Callable[[np.ndarray, np.ndarray], tuple]

SYSTEMS = ("full", "perturbed")
MODES = ("linearized", "nonlinear")
INTEGRATORS = ("ifrk4", "rk4")


class SimulationError(RuntimeError):
    """Non-finite state or another failure during time stepping."""


class CFLError(SimulationError):
    """The time step violates the configured CFL limit."""


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

@dataclass
class FlowMap:
    """Departure points A = x + d of the tensor grid x1 x x2."""

    x1: np.ndarray
    x2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    clamped: int = 0

    @classmethod
    def identity(cls, x1, x2) -> "FlowMap":
        z = np.zeros((len(x1), len(x2)))
        return cls(np.asarray(x1), np.asarray(x2), z, z.copy())

    @property
    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def departure(self):
        X1, X2 = self.mesh
        return X1 + self.d1, X2 + self.d2


@dataclass
class ThetaField:
    """Temperature (or perturbation Θ) at the nodes of the simulation grid.

    With ``initial`` and ``flow`` set, values are θ_0 evaluated at the
    departure points; otherwise the nodal array is advected by bicubic
    interpolation.
    """

    values: np.ndarray
    order: str = "bicubic"
    flow: Optional[FlowMap] = None
    initial: Optional[Callable] = field(default=None, repr=False)


def _bounds_clip(y1, y2, bounds):
    (a1, b1), (a2, b2) = bounds
    c1 = np.clip(y1, a1, b1)
    c2 = np.clip(y2, a2, b2)
    return c1, c2


def backtrack(u_fn: VelocityFn, x1, x2, dt: float, bounds, u_start=None):
    """RK4 integration of dX/ds = u(X) from x over -dt, clamped to the box.

    ``u_start`` optionally supplies u at the start points. Returns the
    departure points and the number of clamped points.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = x1.shape
    p1, p2 = x1.ravel(), x2.ravel()

    def vel(q1, q2):
        q1, q2 = _bounds_clip(q1, q2, bounds)
        u1, u2 = u_fn(q1, q2)
        return np.asarray(u1).ravel(), np.asarray(u2).ravel()

    k1 = vel(p1, p2) if u_start is None else tuple(np.asarray(c).ravel() for c in u_start)
    k2 = vel(p1 - 0.5 * dt * k1[0], p2 - 0.5 * dt * k1[1])
    k3 = vel(p1 - 0.5 * dt * k2[0], p2 - 0.5 * dt * k2[1])
    k4 = vel(p1 - dt * k3[0], p2 - dt * k3[1])
    y1 = p1 - dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    y2 = p2 - dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    c1, c2 = _bounds_clip(y1, y2, bounds)
    (a1, b1), (a2, b2) = bounds
    slack = 1e-13 * max(b1 - a1, b2 - a2)
    outside = (np.abs(c1 - y1) > slack) | (np.abs(c2 - y2) > slack)
    return c1.reshape(shape), c2.reshape(shape), int(np.count_nonzero(outside))


def flow_map_jacobian(u_fn: VelocityFn, x1, x2, dt: float, h: float = 1e-6, bounds=None):
    """det of the one-step backtrack map at the points, by centered differences."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if bounds is None:
        bounds = ((-np.inf, np.inf), (-np.inf, np.inf))
    p = [backtrack(u_fn, x1 + s * h, x2, dt, bounds)[:2] for s in (1, -1)]
    q = [backtrack(u_fn, x1, x2 + s * h, dt, bounds)[:2] for s in (1, -1)]
    j11 = (p[0][0] - p[1][0]) / (2 * h)
    j21 = (p[0][1] - p[1][1]) / (2 * h)
    j12 = (q[0][0] - q[1][0]) / (2 * h)
    j22 = (q[0][1] - q[1][1]) / (2 * h)
    return j11 * j22 - j12 * j21


def _interp_increment(x1, x2, values, y1, y2):
    """values(Y) as values(X) + S(Y) - S(X) with S the bicubic interpolant.

    Node values are reproduced exactly and only the increment carries
    interpolation error.
    """
    spl = RectBivariateSpline(x1, x2, values, kx=3, ky=3)
    return values + spl.ev(y1, y2) - spl(x1, x2)


def advance_theta(u_fn: VelocityFn, theta: ThetaField, dt: float, bounds,
                  x1: np.ndarray, x2: np.ndarray, u_grid=None) -> ThetaField:
    """One transport step of θ through the frozen velocity u over dt.

    ``u_grid`` optionally supplies u at the grid nodes. A zero field leaves
    θ unchanged bit for bit.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    if u_grid is None:
        u_grid = u_fn(X1.ravel(), X2.ravel())
    if not (np.any(u_grid[0]) or np.any(u_grid[1])):
        return theta
    y1, y2, nclamp = backtrack(u_fn, X1, X2, dt, bounds, u_start=u_grid)
    if theta.flow is not None and theta.initial is not None:
        fm = theta.flow
        d1 = (y1 - X1) + _interp_increment(x1, x2, fm.d1, y1, y2)
        d2 = (y2 - X2) + _interp_increment(x1, x2, fm.d2, y1, y2)
        a1, a2 = X1 + d1, X2 + d2
        c1, c2 = _bounds_clip(a1, a2, bounds)
        (lo1, hi1), (lo2, hi2) = bounds
        slack = 1e-13 * max(hi1 - lo1, hi2 - lo2)
        nclamp += int(np.count_nonzero((np.abs(c1 - a1) > slack) | (np.abs(c2 - a2) > slack)))
        new_flow = FlowMap(x1, x2, c1 - X1, c2 - X2, fm.clamped + nclamp)
        return ThetaField(theta.initial(c1, c2), theta.order, new_flow, theta.initial)
    values = _interp_increment(x1, x2, theta.values, y1, y2)
    flow = theta.flow
    if flow is not None:
        flow = FlowMap(flow.x1, flow.x2, flow.d1, flow.d2, flow.clamped + nclamp)
    return ThetaField(values, theta.order, flow, None)


# ---------------------------------------------------------------------------
# Galerkin right-hand side
# ---------------------------------------------------------------------------

def advection_projection(basis: StokesBasis, coeffs: np.ndarray) -> np.ndarray:
    """∫ (u·∇)u · e^i for u = Σ f_j e^j, pseudo-spectrally on the grid."""
    c = basis.combine(coeffs)
    u1, u2 = basis.velocity(c)
    (a11, a12), (a21, a22) = basis.velocity_gradient(c)
    n1 = u1 * a11 + u2 * a12
    n2 = u1 * a21 + u2 * a22
    return basis.project(n1, n2)


def nonlinear_tensor(basis: StokesBasis) -> np.ndarray:
    """T[i, j, k] = ∫ (e^j·∇) e^k · e^i by grid quadrature."""
    u1, u2 = basis.mode_fields()
    grads = [basis.velocity_gradient(c) for c in basis.coefs]
    g11 = np.array([g[0][0] for g in grads])
    g12 = np.array([g[0][1] for g in grads])
    g21 = np.array([g[1][0] for g in grads])
    g22 = np.array([g[1][1] for g in grads])
    w = basis.wgrid
    # ((e^j·∇)e^k)_1 = e^j_1 ∂1 e^k_1 + e^j_2 ∂2 e^k_1
    t = np.einsum("ixy,jxy,kxy,xy->ijk", u1, u1, g11, w)
    t += np.einsum("ixy,jxy,kxy,xy->ijk", u1, u2, g12, w)
    t += np.einsum("ixy,jxy,kxy,xy->ijk", u2, u1, g21, w)
    t += np.einsum("ixy,jxy,kxy,xy->ijk", u2, u2, g22, w)
    return t


def buoyancy_projection(basis: StokesBasis, theta_values: np.ndarray, g: float) -> np.ndarray:
    """∫ g θ e^i_2 on the grid."""
    _, u2 = basis.mode_fields()
    return g * np.einsum("mxy,xy->m", u2, theta_values * basis.wgrid)


def galerkin_rhs(coeffs: np.ndarray, buoyancy: np.ndarray, lambdas: np.ndarray,
                 basis: Optional[StokesBasis] = None, tensor: Optional[np.ndarray] = None,
                 linearized: bool = False) -> np.ndarray:
    """df/dt = -Σ f_j f_k T_ijk - λ f + ∫ θ g e^i_2.

    The advection term uses ``tensor`` when given, otherwise the
    pseudo-spectral projection on the basis grid; ``linearized`` drops it.
    """
    out = -np.asarray(lambdas) * coeffs + buoyancy
    if not linearized:
        if tensor is not None:
            out -= np.einsum("ijk,j,k->i", tensor, coeffs, coeffs)
        elif basis is not None:
            out -= advection_projection(basis, coeffs)
        else:
            raise ValueError("nonlinear right-hand side needs a basis or a tensor")
    return out


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------

@dataclass
class GalerkinState:
    coeffs: np.ndarray
    t: float = 0.0


@dataclass
class SimulationResult:
    records: list
    state: GalerkinState
    theta: ThetaField
    times: np.ndarray
    coeffs: np.ndarray
    snapshots: dict = field(default_factory=dict)


class Simulator:
    """Coupled Galerkin velocity and characteristic transport on a Stokes basis."""

    def __init__(self, basis: StokesBasis, params: PhysicalParams, system: str = "full",
                 mode: str = "nonlinear", profile: Optional[SteadyProfile] = None,
                 integrator: str = "ifrk4", cfl: float = 0.5, use_tensor: bool = False):
        if system not in SYSTEMS:
            raise ValueError(f"system must be one of {SYSTEMS}")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if system == "perturbed" and profile is None:
            raise ValueError("the perturbed system needs a steady profile")
        if cfl <= 0:
            raise ValueError("cfl must be positive")
        self.basis = basis
        self.params = params
        self.system = system
        self.mode = mode
        self.profile = profile
        self.integrator = integrator
        self.cfl = cfl
        self.tensor = nonlinear_tensor(basis) if use_tensor and mode == "nonlinear" else None
        self.x1, self.x2 = basis.x1, basis.x2
        self.X1, self.X2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        r = basis.domain.r
        self.bounds = ((-r, r), (0.0, 1.0))
        self.h1 = float(np.min(np.diff(self.x1)))
        self.h2 = float(np.min(np.diff(self.x2)))
        self._ref = None
        if profile is not None:
            self.theta_bar = profile.theta(self.X2)
            self.dtheta_bar = profile.dtheta(self.X2)

    @property
    def linearized(self) -> bool:
        return self.mode == "linearized"

    # -- initial data -------------------------------------------------------
    def project_velocity(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        """Modal coefficients of grid velocity samples (L² projection)."""
        return self.basis.project(v1, v2)

    def initial_theta(self, theta0: Callable) -> ThetaField:
        """θ_0 (full system) or Θ_0 (perturbed system), a callable of (x1, x2)."""
        if self.system == "full" or self.linearized:
            if self.linearized:
                return ThetaField(np.asarray(theta0(self.X1, self.X2), dtype=float), "nodal")
            init = theta0
        else:
            tb = self.theta_bar
            prof = self.profile

            def init(a1, a2):
                return prof.theta(a2) - tb + theta0(a1, a2)
        flow = FlowMap.identity(self.x1, self.x2)
        return ThetaField(np.asarray(init(self.X1, self.X2), dtype=float), "flow-map", flow, init)

    def total_theta(self, theta: ThetaField) -> np.ndarray:
        if self.system == "perturbed":
            return self.theta_bar + theta.values
        return theta.values

    # -- velocity -----------------------------------------------------------
    def velocity_fn(self, coeffs: np.ndarray) -> VelocityFn:
        c = self.basis.combine(coeffs)
        return lambda p1, p2: self.basis.velocity_at(c, p1, p2)

    def rhs(self, coeffs: np.ndarray, buoy: np.ndarray) -> np.ndarray:
        return galerkin_rhs(coeffs, buoy, self.basis.lambdas, self.basis, self.tensor,
                            self.linearized)

    def velocity_step(self, coeffs: np.ndarray, buoy: np.ndarray, dt: float) -> np.ndarray:
        lam = self.basis.lambdas
        if self.integrator == "rk4":
            k1 = self.rhs(coeffs, buoy)
            k2 = self.rhs(coeffs + 0.5 * dt * k1, buoy)
            k3 = self.rhs(coeffs + 0.5 * dt * k2, buoy)
            k4 = self.rhs(coeffs + dt * k3, buoy)
            return coeffs + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

        # Lawson RK4 on the integrating-factor variable e^{λt} f
        def n(f):
            out = buoy.copy()
            if not self.linearized:
                if self.tensor is not None:
                    out -= np.einsum("ijk,j,k->i", self.tensor, f, f)
                else:
                    out -= advection_projection(self.basis, f)
            return out

        e = np.exp(-0.5 * dt * lam)
        k1 = n(coeffs)
        k2 = n(e * (coeffs + 0.5 * dt * k1))
        k3 = n(e * coeffs + 0.5 * dt * k2)
        k4 = n(e * e * coeffs + dt * e * k3)
        return e * e * coeffs + dt / 6.0 * (e * e * k1 + 2 * e * (k2 + k3) + k4)

    def cfl_number(self, coeffs: np.ndarray, dt: float) -> float:
        return self._cfl(self.basis.velocity(self.basis.combine(coeffs)), dt)

    def _cfl(self, u_grid, dt):
        u1, u2 = u_grid
        return float(dt * max(np.max(np.abs(u1)) / self.h1, np.max(np.abs(u2)) / self.h2))

    def check_cfl(self, coeffs: np.ndarray, dt: float) -> float:
        """Raise CFLError when dt max|u_i| / min Δx_i exceeds the limit."""
        return self._check_cfl_grid(self.basis.velocity(self.basis.combine(coeffs)), dt)

    def _check_cfl_grid(self, u_grid, dt):
        c = self._cfl(u_grid, dt)
        if c > self.cfl:
            raise CFLError(f"dt={dt:g} violates the CFL limit ({c:.3g} > {self.cfl:g})")
        return c

    # -- stepping -----------------------------------------------------------
    def step(self, state: GalerkinState, theta: ThetaField, dt: float):
        """One Lie-split step: modal ODE with θ frozen, then transport."""
        buoy = buoyancy_projection(self.basis, theta.values, self.params.g)
        coeffs = self.velocity_step(state.coeffs, buoy, dt)
        if not np.all(np.isfinite(coeffs)):
            raise SimulationError(f"non-finite velocity coefficients at t={state.t + dt:g}")
        if self.linearized:
            if self.system == "perturbed":
                _, v2 = self.basis.velocity(self.basis.combine(coeffs))
                theta = ThetaField(theta.values - dt * v2 * self.dtheta_bar, theta.order)
        else:
            u_grid = self.basis.velocity(self.basis.combine(coeffs))
            self._check_cfl_grid(u_grid, dt)
            theta = advance_theta(self.velocity_fn(coeffs), theta, dt, self.bounds,
                                  self.x1, self.x2, u_grid=u_grid)
        if not np.all(np.isfinite(theta.values)):
            raise SimulationError(f"non-finite temperature at t={state.t + dt:g}")
        return GalerkinState(coeffs, state.t + dt), theta

    # -- diagnostics --------------------------------------------------------
    def _norms(self, theta_total: np.ndarray):
        b = self.basis
        return (math.sqrt(b.integrate(theta_total**2)),
                b.integrate(theta_total**4) ** 0.25,
                float(np.max(np.abs(theta_total))))

    def diagnostics(self, state: GalerkinState, theta: ThetaField, dt: Optional[float] = None) -> dict:
        """Energies, temperature norms and the a priori bound flags."""
        b = self.basis
        c = b.combine(state.coeffs)
        u1, u2 = b.velocity(c)
        (a11, a12), (a21, a22) = b.velocity_gradient(c)
        u_sq = b.integrate(u1**2 + u2**2)
        grad_sq = b.integrate(a11**2 + a12**2 + a21**2 + a22**2)
        yb = b.op.basis_y.eval(np.array([0.0, 1.0]), 1)
        u1_walls = b.ax[0] @ c @ yb.T
        slip = float(-self.params.k1 * (b.w1 @ u1_walls[:, 1] ** 2)
                     - self.params.k0 * (b.w1 @ u1_walls[:, 0] ** 2))
        th = self.total_theta(theta)
        l2, l4, linf = self._norms(th)
        rec = {
            "t": state.t,
            "kinetic_energy": 0.5 * u_sq,
            "u_l2_sq": u_sq,
            "grad_u_sq": grad_sq,
            "slip": slip,
            "theta_l2": l2,
            "theta_l4": l4,
            "theta_linf": linf,
            "v2_l2": math.sqrt(b.integrate(u2**2)),
            "cfl": float(dt * max(np.max(np.abs(u1)) / self.h1, np.max(np.abs(u2)) / self.h2))
            if dt else 0.0,
            "clamped": theta.flow.clamped if theta.flow is not None else 0,
        }
        if self._ref is None:
            self._ref = (u_sq, l2, l4)
        u0_sq, l2_0, l4_0 = self._ref
        transported = not self.linearized
        if transported:
            bound = (l2_0**2 + u0_sq) * math.exp(abs(self.params.g) * state.t)
            rec["energy_bound"] = bound
            rec["energy_bound_ok"] = bool(u_sq <= bound * (1 + 1e-6))
            drift = max(abs(l2 - l2_0) / l2_0 if l2_0 > 0 else 0.0,
                        abs(l4 - l4_0) / l4_0 if l4_0 > 0 else 0.0)
            rec["theta_drift"] = drift
            rec["theta_conserved_ok"] = bool(drift <= 1e-4 * max(1.0, state.t))
        else:
            rec["energy_bound"] = float("nan")
            rec["energy_bound_ok"] = True
            rec["theta_drift"] = float("nan")
            rec["theta_conserved_ok"] = True
        return rec

    def reset_reference(self):
        self._ref = None

    # -- driver -------------------------------------------------------------
    def run(self, state: GalerkinState, theta: ThetaField, dt: float, t_end: float,
            record_every: int = 1, snapshot_times: Sequence[float] = (),
            stop: Optional[Callable[[dict], bool]] = None) -> SimulationResult:
        """Advance to t_end; records diagnostics every ``record_every`` steps.

        ``stop`` receives each record and ends the run early when it returns
        True. Snapshots store (u1, u2, θ) grid arrays at the nearest steps.
        """
        if dt <= 0 or t_end < 0:
            raise ValueError("dt must be positive and t_end non-negative")
        self.reset_reference()
        if not self.linearized:
            self.check_cfl(state.coeffs, dt)
        nsteps = int(round(t_end / dt))
        if abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
            raise ValueError("t_end must be an integer multiple of dt")
        snap_steps = {int(round(s / dt)): s for s in snapshot_times}
        records = [self.diagnostics(state, theta, dt)]
        times = [state.t]
        coeffs = [state.coeffs.copy()]
        snaps = {}

        def snap(k, st, th):
            if k in snap_steps:
                u1, u2 = self.basis.velocity(self.basis.combine(st.coeffs))
                snaps[snap_steps[k]] = (u1, u2, th.values.copy())

        snap(0, state, theta)
        for k in range(1, nsteps + 1):
            state, theta = self.step(state, theta, dt)
            snap(k, state, theta)
            if k % record_every == 0 or k == nsteps:
                rec = self.diagnostics(state, theta, dt)
                records.append(rec)
                times.append(state.t)
                coeffs.append(state.coeffs.copy())
                if stop is not None and stop(rec):
                    break
        return SimulationResult(records, state, theta, np.array(times), np.array(coeffs), snaps)


# ---------------------------------------------------------------------------
# instability experiment
# ---------------------------------------------------------------------------

@dataclass
class RTExperimentConfig:
    """Inputs of the escape-time experiment.

    ``f`` defaults to a bump centred at the most unstable frequency whose
    nearer support edge sits on the ``band_fraction``·Λ level, so that
    λ_f = band_fraction·Λ.
    """

    params: PhysicalParams
    profile: SteadyProfile
    epsilons: Sequence[float] = (1e-3, 1e-4, 1e-5)
    K: float = 1.0
    delta0: float = 1.0
    T: Optional[float] = None
    dt: float = 5e-3
    R: float = 6.0
    nx: int = 96
    ny: int = 24
    m: int = 96
    n_nodes: int = 64
    n_basis: int = 40
    xi_grid: Optional[np.ndarray] = None
    f: Optional[object] = None
    band_fraction: float = 0.9
    tol: float = 1e-10
    cfl: float = 0.5


@dataclass
class RTRun:
    epsilon: float
    times: np.ndarray
    v2_norm: np.ndarray
    deviation: np.ndarray
    fitted_exponent: float
    crossing_time: Optional[float]
    crossed_before_tk: bool
    max_deviation: float
    trivial: bool
    records: list = field(repr=False, default_factory=list)


@dataclass
class RTReport:
    capital_lambda: float
    argmax_xi: float
    lambda_f: float
    f: object
    delta0: float
    tau0: float
    t_k: float
    T: float
    linear_times: np.ndarray
    linear_v2: np.ndarray
    linear_exponent: float
    linear_check: dict
    runs: list
    scaling: list
    flags: dict

    def summary(self) -> dict:
        return {
            "Lambda": self.capital_lambda, "argmax_xi": self.argmax_xi,
            "lambda_f": self.lambda_f, "f": self.f.as_dict(), "delta0": self.delta0,
            "tau0": self.tau0, "t_K": self.t_k, "T": self.T,
            "linear_exponent": self.linear_exponent, "linear_check": self.linear_check,
            "runs": [{"epsilon": r.epsilon, "fitted_exponent": r.fitted_exponent,
                      "crossing_time": r.crossing_time, "crossed_before_tK": r.crossed_before_tk,
                      "max_deviation": r.max_deviation, "trivial": r.trivial} for r in self.runs],
            "scaling": self.scaling, "flags": self.flags,
        }


def _fit_exponent(times, values, t_max):
    sel = (times <= t_max + 1e-12) & (values > 0)
    if np.count_nonzero(sel) < 3:
        return float("nan")
    return float(np.polyfit(times[sel], np.log(values[sel]), 1)[0])


def _sobolev_sq(fields, names, order, x1, x2, weights):
    total = 0.0
    for name in names:
        for k in range(order + 1):
            for d1 in range(k + 1):
                vals = fields.field(name, 0.0, d1, k - d1, x1, x2)
                total += float(np.sum(weights * vals**2))
    return total


def rt_experiment(cfg: RTExperimentConfig) -> RTReport:
    """Linearized reference run plus nonlinear runs from ε(v, Θ)(0).

    The initial datum is a synthesized packet restricted to Ω_R and
    rescaled so that δ_0 = sqrt(‖v_0‖²_{H²} + ‖Θ_0‖²_{H¹}) equals
    ``cfg.delta0`` on Ω_R.
    """
    from .dispersion import (StableProfileError, default_xi_grid, dispersion_curve,
                             half_growth_support)
    from .params import rt_unstable_region
    from .spectral1d import build_basis, build_grid
    from .stokes2d import assemble_stokes, eigenpairs, RectDomain
    from .synthesis import BumpWeight, synthesize

    params, profile = cfg.params, cfg.profile
    if not rt_unstable_region(profile):
        raise StableProfileError("profile is RT-stable; no growth rate exists")
    if cfg.K <= 0 or cfg.delta0 <= 0:
        raise ValueError("K and delta0 must be positive")
    if any(not 0.0 <= e < 1.0 for e in cfg.epsilons):
        raise ValueError("epsilon values must lie in [0, 1)")
    basis1d = build_basis(build_grid(cfg.n_nodes), cfg.n_basis)
    xi_grid = default_xi_grid() if cfg.xi_grid is None else np.asarray(cfg.xi_grid)
    curve = dispersion_curve(basis1d, profile, params, xi_grid, cfg.tol)
    if curve.all_stable:
        raise StableProfileError("profile is RT-stable; no growth rate exists")
    lam_max, xi_star = curve.capital_lambda, curve.argmax_xi
    f = cfg.f
    if f is None:
        a, b = half_growth_support(curve, basis1d, profile, params, cfg.band_fraction, cfg.tol)
        f = BumpWeight(xi_star, min(xi_star - a, b - xi_star))
    fields = synthesize(curve, f, [0.0], basis1d, profile, params, tol=cfg.tol)
    lam_f = float(np.min(fields.lambdas))
    lo, hi = f.support
    # the infimum over the closed support sits at an edge (λ0 is continuous)
    from .dispersion import growth_rate
    lam_f = min(lam_f, *(growth_rate(basis1d, profile, params, z, cfg.tol, residuals=False).lambda0
                         for z in (lo, hi)))

    sb = eigenpairs(assemble_stokes(RectDomain(cfg.R, cfg.nx, cfg.ny), params), cfg.m)
    lin = Simulator(sb, params, "perturbed", "linearized", profile, cfl=cfg.cfl)
    x1, x2 = sb.x1, sb.x2
    raw_sq = (_sobolev_sq(fields, ("v1", "v2"), 2, x1, x2, sb.wgrid)
              + _sobolev_sq(fields, ("theta",), 1, x1, x2, sb.wgrid))
    scale = cfg.delta0 / math.sqrt(raw_sq)
    v1 = scale * fields.field("v1", 0.0, x1=x1, x2=x2)
    v2 = scale * fields.field("v2", 0.0, x1=x1, x2=x2)

    def theta0(a, b):
        a = np.asarray(a, dtype=float)
        return scale * fields.evaluate("theta", a, np.asarray(b, dtype=float), 0.0).reshape(a.shape)

    delta0 = cfg.delta0
    tau0 = math.sqrt(sb.integrate(v2**2)) / delta0
    t_k = 2.0 / lam_max * math.log(2.0 * cfg.K / tau0)
    T = cfg.T if cfg.T is not None else math.ceil(t_k / cfg.dt - 1e-9) * cfg.dt
    if t_k > T + 1e-12:
        raise ValueError(f"t_K = {t_k:.4g} exceeds the simulated horizon T = {T:.4g}")
    f0 = lin.project_velocity(v1, v2)
    res_lin = lin.run(GalerkinState(f0.copy()), lin.initial_theta(theta0), cfg.dt, T)
    lin_v2 = np.array([r["v2_l2"] for r in res_lin.records])
    lin_exp = _fit_exponent(res_lin.times, lin_v2, 0.5 / lam_max)
    v2_tk = float(np.interp(t_k, res_lin.times, lin_v2))
    lower = math.exp(0.5 * t_k * lam_max) * tau0 * delta0
    linear_check = {"v2_at_tK": v2_tk, "lower_bound": lower, "two_K_delta0": 2 * cfg.K * delta0,
                    "satisfied": bool(v2_tk >= lower * (1 - 1e-9))}

    nl = Simulator(sb, params, "perturbed", "nonlinear", profile, cfl=cfg.cfl)
    runs = []
    bound_ok = True
    conserved_ok = True
    for eps in cfg.epsilons:
        if eps == 0.0:
            z = np.zeros_like(res_lin.times)
            runs.append(RTRun(0.0, res_lin.times, z, z, float("nan"), None, False, 0.0, True))
            continue

        def scaled_theta(a, b, eps=eps):
            return eps * theta0(a, b)

        res = nl.run(GalerkinState(eps * f0), nl.initial_theta(scaled_theta), cfg.dt, T)
        v2n = np.array([r["v2_l2"] for r in res.records])
        dev = np.linalg.norm(res.coeffs / eps - res_lin.coeffs[: len(res.coeffs)], axis=1)
        above = np.flatnonzero(v2n > cfg.K * delta0 * eps)
        cross = float(res.times[above[0]]) if above.size else None
        bound_ok &= all(r["energy_bound_ok"] for r in res.records)
        conserved_ok &= all(r["theta_conserved_ok"] for r in res.records)
        in_window = res.times <= t_k + 1e-12
        runs.append(RTRun(eps, res.times, v2n, dev, _fit_exponent(res.times, v2n, 0.5 / lam_max),
                          cross, cross is not None and cross <= t_k, float(np.max(dev[in_window])),
                          False, res.records))
    scaling = []
    active = [r for r in runs if not r.trivial]
    for r1, r2 in zip(active, active[1:]):
        ratio = r1.max_deviation / r2.max_deviation if r2.max_deviation > 0 else float("inf")
        expected = r1.epsilon / r2.epsilon
        scaling.append({"eps_pair": [r1.epsilon, r2.epsilon], "deviation_ratio": ratio,
                        "expected": expected,
                        "within_factor_3": bool(expected / 3 <= ratio <= 3 * expected)})
    flags = {
        "energy_bound": bool(bound_ok),
        "theta_conservation": bool(conserved_ok),
        "linear_check": linear_check["satisfied"],
        "eps_scaling": all(s["within_factor_3"] for s in scaling),
        "trivial_runs": [r.epsilon for r in runs if r.trivial],
    }
    return RTReport(lam_max, xi_star, lam_f, f, delta0, tau0, t_k, T, res_lin.times, lin_v2,
                    lin_exp, linear_check, runs, scaling, flags)


# ---------------------------------------------------------------------------
# domain-size sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpData:
    """θ_0 = amplitude exp(1 - 1/(1 - (r/ρ)²)) for r < ρ around (c1, c2); u_0 = 0."""

    center: tuple = (0.0, 0.5)
    radius: float = 0.3
    amplitude: float = 1.0

    def __call__(self, x1, x2):
        r2 = ((np.asarray(x1) - self.center[0]) ** 2 + (np.asarray(x2) - self.center[1]) ** 2) / self.radius**2
        out = np.zeros(np.broadcast(x1, x2).shape)
        inside = r2 < 1.0
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    def fits(self, r: float) -> bool:
        c1, c2 = self.center
        return (-r < c1 - self.radius and c1 + self.radius < r
                and 0.0 < c2 - self.radius and c2 + self.radius < 1.0)


@dataclass
class RSweepConfig:
    params: PhysicalParams
    data: BumpData = field(default_factory=BumpData)
    T: float = 1.0
    dt: float = 2e-3
    nx_per_unit: int = 24
    ny: int = 24
    m_per_unit: int = 24
    record_every: int = 5
    cfl: float = 0.5


def r_sweep(cfg: RSweepConfig, r_list: Sequence[float]) -> dict:
    """Run the full nonlinear system from the same compact data on each Ω_R.

    Resolution grows with R (nx and m proportional to R). Spreads are
    relative to the largest-R run.
    """
    from .stokes2d import assemble_stokes, eigenpairs, RectDomain

    r_list = sorted(float(r) for r in r_list)
    if not r_list:
        raise ValueError("R list must be nonempty")
    if not cfg.data.fits(r_list[0]):
        raise ValueError(f"initial data support is not inside Ω_R for R={r_list[0]:g}")
    per_r = []
    for r in r_list:
        nx = max(16, int(round(cfg.nx_per_unit * r)))
        m = int(round(cfg.m_per_unit * r))
        sb = eigenpairs(assemble_stokes(RectDomain(r, nx, cfg.ny), cfg.params), m)
        sim = Simulator(sb, cfg.params, "full", "nonlinear", cfl=cfg.cfl)
        res = sim.run(GalerkinState(np.zeros(m)), sim.initial_theta(cfg.data), cfg.dt, cfg.T,
                      record_every=cfg.record_every)
        recs = res.records
        per_r.append({
            "R": r, "nx": nx, "ny": cfg.ny, "m": m,
            "sup_u_l2_sq": max(q["u_l2_sq"] for q in recs),
            "sup_grad_u_sq": max(q["grad_u_sq"] for q in recs),
            "theta_drift": max(q["theta_drift"] for q in recs),
            "energy_bound_ok": all(q["energy_bound_ok"] for q in recs),
            "theta_conserved_ok": all(q["theta_conserved_ok"] for q in recs),
            "records": recs,
        })
    ref = per_r[-1]
    for entry in per_r:
        for key in ("sup_u_l2_sq", "sup_grad_u_sq"):
            base = ref[key]
            entry[key + "_spread"] = abs(entry[key] - base) / base if base > 0 else 0.0
    spread = max(e["sup_u_l2_sq_spread"] for e in per_r)
    return {"runs": per_r, "spread": spread,
            "bounds_ok": all(e["energy_bound_ok"] and e["theta_conserved_ok"] for e in per_r)}
