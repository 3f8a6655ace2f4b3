"""Stokes eigenpairs on the rectangle [-R, R] x [0, 1].

Velocities are written through a stream function, u = (∂2ψ, -∂1ψ), with

    ψ(x1, x2) = Σ a_pq A_p(x1) B_q(x2),

A_p clamped Legendre combinations on [-R, R] (ψ = ∂1ψ = 0 at the side
walls: no-slip) and B_q Dirichlet combinations on [0, 1] (ψ = 0 at top and
bottom: impermeability). Every trial field is exactly divergence-free and
satisfies all essential conditions; the Navier conditions on ∂2u1 are
natural for the energy form

    ((u, v)) = μ ∫ ∇u : ∇v - k1 ∫ u1 v1 |_{x2=1} - k0 ∫ u1 v1 |_{x2=0},

so the discrete eigenproblem is K a = λ M a with K, M assembled from exact
one-dimensional Gram matrices. The problem splits by x1-parity of A_p.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre as leg
from scipy.linalg import eigh, sqrtm

from .params import PhysicalParams
from .spectral1d import build_grid, clamped_basis, dirichlet_basis


@dataclass(frozen=True)
class RectDomain:
    r: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("half-width R must be positive")
        if self.nx < 16 or self.ny < 16:
            raise ValueError("nx and ny must be at least 16")

    @property
    def n_a(self) -> int:
        return self.nx - 4

    @property
    def n_b(self) -> int:
        return self.ny - 2


@dataclass
class StokesOperator:
    domain: RectDomain
    params: PhysicalParams
    basis_x: object
    basis_y: object
    stiffness: np.ndarray
    mass: np.ndarray
    parity_index: tuple

    @property
    def dimension(self) -> int:
        return self.mass.shape[0]


def _one_d(domain: RectDomain):
    a = clamped_basis(domain.n_a, -domain.r, domain.r)
    b = dirichlet_basis(domain.n_b, 0.0, 1.0)
    amat = [a.gram(k, k) for k in range(3)]
    bmat = [b.gram(k, k) for k in range(3)]
    ends = b.eval(np.array([0.0, 1.0]), 1)
    return a, b, amat, bmat, ends[0], ends[1]


def assemble_stokes(dom: RectDomain, params: PhysicalParams) -> StokesOperator:
    """Stiffness (energy form) and mass (L²) on the stream-function space.

    Unknowns are ordered a_pq with index p * n_b + q.
    """
    a, b, amat, bmat, b0, b1 = _one_d(dom)
    mu = params.mu
    k = (mu * (np.kron(amat[2], bmat[0]) + 2.0 * np.kron(amat[1], bmat[1])
               + np.kron(amat[0], bmat[2]))
         - params.k1 * np.kron(amat[0], np.outer(b1, b1))
         - params.k0 * np.kron(amat[0], np.outer(b0, b0)))
    m = np.kron(amat[1], bmat[0]) + np.kron(amat[0], bmat[1])
    k = 0.5 * (k + k.T)
    m = 0.5 * (m + m.T)
    p_idx = np.repeat(np.arange(dom.n_a), dom.n_b)
    even = np.flatnonzero(p_idx % 2 == 0)
    odd = np.flatnonzero(p_idx % 2 == 1)
    return StokesOperator(domain=dom, params=params, basis_x=a, basis_y=b,
                          stiffness=k, mass=m, parity_index=(even, odd))


@dataclass
class StokesEigenpair:
    lambda_n: float
    coef: np.ndarray = field(repr=False)
    basis: "StokesBasis" = field(repr=False, default=None)

    @property
    def velocity(self):
        return self.basis.velocity(self.coef)

    @property
    def pressure(self):
        return self.basis.pressure(self)


class StokesBasis:
    """First m eigenpairs plus tabulations on a tensor quadrature grid.

    The grid is Gauss-Lobatto with ceil(1.5 nx) x ceil(1.5 ny) nodes, exact
    for products of three fields from the discrete space.
    """

    def __init__(self, op: StokesOperator, lambdas, coefs, grid_factor: float = 1.5):
        self.op = op
        self.domain = op.domain
        self.params = op.params
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.coefs = np.asarray(coefs)  # (m, n_a, n_b)
        self.m = len(self.lambdas)
        dom = self.domain
        gx = build_grid(int(np.ceil(grid_factor * dom.nx)), -dom.r, dom.r)
        gy = build_grid(int(np.ceil(grid_factor * dom.ny)), 0.0, 1.0)
        self.x1, self.w1 = gx.nodes, gx.weights
        self.x2, self.w2 = gy.nodes, gy.weights
        self.ax = [op.basis_x.eval(self.x1, k) for k in range(4)]
        self.by = [op.basis_y.eval(self.x2, k) for k in range(4)]
        self.wgrid = np.outer(self.w1, self.w2)
        self._fields = None

    # fields on the grid -------------------------------------------------
    def psi_derivative(self, c: np.ndarray, d1: int, d2: int) -> np.ndarray:
        return self.ax[d1] @ c @ self.by[d2].T

    def velocity(self, c: np.ndarray):
        """(u1, u2) on the grid for a stream-function coefficient matrix."""
        return self.psi_derivative(c, 0, 1), -self.psi_derivative(c, 1, 0)

    def velocity_gradient(self, c: np.ndarray):
        """((∂1u1, ∂2u1), (∂1u2, ∂2u2)) on the grid."""
        return ((self.psi_derivative(c, 1, 1), self.psi_derivative(c, 0, 2)),
                (-self.psi_derivative(c, 2, 0), -self.psi_derivative(c, 1, 1)))

    def combine(self, f: np.ndarray) -> np.ndarray:
        """Stream-function coefficients of Σ f_i e^i."""
        return np.tensordot(np.asarray(f), self.coefs, axes=(0, 0))

    def mode_fields(self):
        """Cached (m, nx1, nx2) arrays of u1, u2 for every mode."""
        if self._fields is None:
            u1 = np.einsum("xp,mpq,yq->mxy", self.ax[0], self.coefs, self.by[1])
            u2 = -np.einsum("xp,mpq,yq->mxy", self.ax[1], self.coefs, self.by[0])
            self._fields = (u1, u2)
        return self._fields

    def project(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        """L² projection coefficients (v, e^i) by grid quadrature."""
        u1, u2 = self.mode_fields()
        w = self.wgrid
        return np.einsum("mxy,xy->m", u1, v1 * w) + np.einsum("mxy,xy->m", u2, v2 * w)

    def at_points(self, c: np.ndarray, x1, x2, d1: int = 0, d2: int = 0):
        """ψ-derivative ∂1^d1 ∂2^d2 of a coefficient matrix at scattered points."""
        va = self.op.basis_x.eval(x1, d1)
        vb = self.op.basis_y.eval(x2, d2)
        return np.sum((va @ c) * vb, axis=1)

    def velocity_at(self, c: np.ndarray, x1, x2):
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        ya = np.clip(self.op.basis_x.to_ref(x1), -1.0, 1.0)
        yb = np.clip(self.op.basis_y.to_ref(x2), -1.0, 1.0)
        va = leg.legvander(ya, self.op.basis_x.ncoef - 1)
        vb = leg.legvander(yb, self.op.basis_y.ncoef - 1)
        ax = self.op.basis_x
        by = self.op.basis_y
        c0 = ax.deriv_coef(0).T @ c @ by.deriv_coef(1)  # Legendre coefs of ψ_2
        c1 = ax.deriv_coef(1).T @ c @ by.deriv_coef(0)  # of ψ_1
        u1 = np.sum((va @ c0) * vb, axis=1)
        u2 = -np.sum((va @ c1) * vb, axis=1)
        return u1, u2

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.wgrid * f))

    # diagnostics ----------------------------------------------------------
    def l2_gram(self) -> np.ndarray:
        u1, u2 = self.mode_fields()
        w = self.wgrid
        return np.einsum("mxy,nxy,xy->mn", u1, u1, w) + np.einsum("mxy,nxy,xy->mn", u2, u2, w)

    def energy_gram(self) -> np.ndarray:
        mu = self.params.mu
        grads = [self.velocity_gradient(c) for c in self.coefs]
        flat = np.array([[g[0][0], g[0][1], g[1][0], g[1][1]] for g in grads])
        m = self.m
        gram = np.zeros((m, m))
        for s in range(4):
            fs = flat[:, s] * np.sqrt(self.wgrid)[None]
            gram += mu * np.einsum("mxy,nxy->mn", fs, fs)
        # wall terms: u1 = ψ_2 at x2 = 0 and 1
        bvals = self.op.basis_y.eval(np.array([0.0, 1.0]), 1)
        u1_bottom = np.einsum("xp,mpq,q->mx", self.ax[0], self.coefs, bvals[0])
        u1_top = np.einsum("xp,mpq,q->mx", self.ax[0], self.coefs, bvals[1])
        gram -= self.params.k1 * np.einsum("mx,nx,x->mn", u1_top, u1_top, self.w1)
        gram -= self.params.k0 * np.einsum("mx,nx,x->mn", u1_bottom, u1_bottom, self.w1)
        return gram

    def divergence(self, c: np.ndarray) -> float:
        """max |div u| / ‖∇u‖_L² on the grid."""
        (a11, a12), (a21, a22) = self.velocity_gradient(c)
        grad = np.sqrt(self.integrate(a11**2 + a12**2 + a21**2 + a22**2))
        return float(np.max(np.abs(a11 + a22)) / grad)

    def bc_residuals(self, c: np.ndarray) -> dict:
        """Boundary residuals normalized by the field's maximum values."""
        mu, k0, k1 = self.params.mu, self.params.k0, self.params.k1
        ax, ay = self.op.basis_x, self.op.basis_y
        xs = np.linspace(-self.domain.r, self.domain.r, 201)
        ys = np.linspace(0.0, 1.0, 101)
        u1, u2 = self.velocity(c)
        umax = max(np.max(np.abs(u1)), np.max(np.abs(u2)))
        ends_y = np.array([0.0, 1.0])
        ends_x = np.array([-self.domain.r, self.domain.r])
        u2_walls = -(ax.eval(xs, 1) @ c @ ay.eval(ends_y, 0).T)
        side_u1 = ax.eval(ends_x, 0) @ c @ ay.eval(ys, 1).T
        side_u2 = -(ax.eval(ends_x, 1) @ c @ ay.eval(ys, 0).T)
        u1w = ax.eval(xs, 0) @ c @ ay.eval(ends_y, 1).T
        du1w = ax.eval(xs, 0) @ c @ ay.eval(ends_y, 2).T
        dscale = max(np.max(np.abs(self.psi_derivative(c, 0, 2))), 1e-300)
        return {
            "impermeability": float(np.max(np.abs(u2_walls)) / umax),
            "no_slip": float(max(np.max(np.abs(side_u1)), np.max(np.abs(side_u2))) / umax),
            "navier_top": float(np.max(np.abs(du1w[:, 1] - k1 / mu * u1w[:, 1])) / dscale),
            "navier_bottom": float(np.max(np.abs(du1w[:, 0] + k0 / mu * u1w[:, 0])) / dscale),
        }

    def pressure_gradient_target(self, pair: StokesEigenpair):
        """λu + μΔu on the grid, which ∇p must match."""
        c = pair.coef
        mu = self.params.mu
        u1, u2 = self.velocity(c)
        lap1 = self.psi_derivative(c, 2, 1) + self.psi_derivative(c, 0, 3)
        lap2 = -(self.psi_derivative(c, 3, 0) + self.psi_derivative(c, 1, 2))
        return pair.lambda_n * u1 + mu * lap1, pair.lambda_n * u2 + mu * lap2

    def pressure(self, pair: StokesEigenpair, return_gradient: bool = False):
        """Zero-mean pressure on the grid from a least-squares fit of ∇p.

        p is a tensor Legendre expansion; the weighted normal equations
        separate into A1 C B0 + A0 C B1 = F, solved by diagonalizing the
        one-dimensional pencils. The constant mode is the free gauge.
        """
        g1, g2 = self.pressure_gradient_target(pair)
        dx, dy = self.domain.nx - 1, self.domain.ny - 1
        va = leg.legvander(self.x1 / self.domain.r, dx)
        vb = leg.legvander(2.0 * self.x2 - 1.0, dy)
        da = va @ (legder_matrix(dx + 1) / self.domain.r)
        db = vb @ (2.0 * legder_matrix(dy + 1))
        w1, w2 = self.w1[:, None], self.w2[:, None]
        a0, a1 = va.T @ (w1 * va), da.T @ (w1 * da)
        b0, b1 = vb.T @ (w2 * vb), db.T @ (w2 * db)
        rhs = da.T @ (self.wgrid * g1) @ vb + va.T @ (self.wgrid * g2) @ db
        alpha, pa = eigh(a1, a0)
        beta, pb = eigh(b1, b0)
        core = pa.T @ rhs @ pb
        denom = alpha[:, None] + beta[None, :]
        small = denom <= 1e-12 * max(alpha.max(), beta.max())
        core = np.where(small, 0.0, core / np.where(small, 1.0, denom))
        coef = pa @ core @ pb.T
        p = va @ coef @ vb.T
        p -= self.integrate(p) / self.integrate(np.ones_like(p))
        if return_gradient:
            return p, (da @ coef @ vb.T, va @ coef @ db.T)
        return p

    def interpolation_constants(self) -> dict:
        """max over modes of ‖u‖²_L4/(‖u‖‖∇u‖) and ‖u‖²_L∞/(‖u‖‖u‖_H2)."""
        l4 = []
        linf = []
        for c in self.coefs:
            u1, u2 = self.velocity(c)
            (a11, a12), (a21, a22) = self.velocity_gradient(c)
            mag2 = u1**2 + u2**2
            l2 = np.sqrt(self.integrate(mag2))
            grad = np.sqrt(self.integrate(a11**2 + a12**2 + a21**2 + a22**2))
            l4sq = np.sqrt(self.integrate(mag2**2))
            l4.append(l4sq / (l2 * grad))
            # |D²u|² with mixed derivatives counted twice
            second = sum(wt * self.psi_derivative(c, i, j) ** 2
                         for (i, j), wt in (((0, 3), 1), ((1, 2), 3), ((2, 1), 3), ((3, 0), 1)))
            h2 = np.sqrt(l2**2 + grad**2 + self.integrate(second))
            linf.append(np.max(mag2) / (l2 * h2))
        return {"l4": float(np.max(l4)), "linf": float(np.max(linf))}

    def pairs(self):
        return [StokesEigenpair(lambda_n=float(lam), coef=c, basis=self)
                for lam, c in zip(self.lambdas, self.coefs)]


def legder_matrix(ncoef: int) -> np.ndarray:
    from .spectral1d import legendre_derivative_matrix

    return np.asarray(legendre_derivative_matrix(ncoef))


def _sign_fix(c: np.ndarray) -> np.ndarray:
    flat = c.ravel()
    k = int(np.argmax(np.abs(flat)))
    return -c if flat[k] < 0 else c


def _cluster_orthonormalize(vecs, vals, mass, rel_gap=1e-8):
    """Jointly M-orthonormalize eigenvectors of nearly equal eigenvalues."""
    out = vecs.copy()
    i = 0
    n = len(vals)
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) <= rel_gap * abs(vals[i]):
            j += 1
        block = out[:, i:j]
        g = block.T @ mass @ block
        out[:, i:j] = block @ np.real(np.linalg.inv(sqrtm(g)))
        i = j
    return out


def eigenpairs(op: StokesOperator, m: int, grid_factor: float = 1.5) -> StokesBasis:
    """The m smallest eigenpairs, ascending, as a StokesBasis."""
    if m < 1 or m > op.dimension // 4:
        raise ValueError(f"m must be in [1, dimension/4] = [1, {op.dimension // 4}]")
    vals_all = []
    vecs_all = []
    for idx in op.parity_index:
        kk = op.stiffness[np.ix_(idx, idx)]
        mm = op.mass[np.ix_(idx, idx)]
        take = min(m, len(idx))
        vals, vecs = eigh(kk, mm, subset_by_index=[0, take - 1])
        full = np.zeros((op.dimension, take))
        full[idx] = vecs
        vals_all.append(vals)
        vecs_all.append(full)
    vals = np.concatenate(vals_all)
    vecs = np.hstack(vecs_all)
    order = np.argsort(vals, kind="stable")[:m]
    vals, vecs = vals[order], vecs[:, order]
    if np.any(~np.isfinite(vals)):
        raise RuntimeError("Stokes eigensolver produced non-finite eigenvalues")
    vecs = _cluster_orthonormalize(vecs, vals, op.mass)
    dom = op.domain
    coefs = np.array([_sign_fix(v.reshape(dom.n_a, dom.n_b)) for v in vecs.T])
    return StokesBasis(op, vals, coefs, grid_factor)


def basis_checks(basis: StokesBasis) -> dict:
    """Orthogonality defects, divergence, boundary residuals, interpolation constants."""
    lam = basis.lambdas
    l2 = basis.l2_gram()
    en = basis.energy_gram()
    div = [basis.divergence(c) for c in basis.coefs]
    bcs = [basis.bc_residuals(c) for c in basis.coefs]
    keys = bcs[0].keys()
    bc_max = {k: float(max(b[k] for b in bcs)) for k in keys}
    outliers = []
    for k in keys:
        vals = np.array([b[k] for b in bcs])
        med = np.median(vals)
        if med > 0:
            outliers += [(k, int(i)) for i in np.flatnonzero(vals > 10 * med)]
    scale = np.sqrt(np.outer(lam, lam))
    return {
        "l2_defect": float(np.max(np.abs(l2 - np.eye(len(lam))))),
        "energy_defect": float(np.max(np.abs(en - np.diag(lam)) / scale)),
        "divergence": float(max(div)),
        "bc": bc_max,
        "bc_outliers": outliers,
        "interpolation": basis.interpolation_constants(),
        "lambdas": lam.tolist(),
    }


def export_basis(basis: StokesBasis, directory) -> Path:
    """Write coefficient arrays (npz) and a JSON index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savez(directory / "stokes_modes.npz", lambdas=basis.lambdas, coefs=basis.coefs)
    index = {"R": basis.domain.r, "nx": basis.domain.nx, "ny": basis.domain.ny,
             "m": basis.m, "lambdas": basis.lambdas.tolist(),
             "mu": basis.params.mu, "k0": basis.params.k0, "k1": basis.params.k1,
             "coefficients": "stokes_modes.npz"}
    path = directory / "stokes_index.json"
    path.write_text(json.dumps(index, indent=2))
    return path


def load_basis(directory, params: PhysicalParams) -> StokesBasis:
    directory = Path(directory)
    index = json.loads((directory / "stokes_index.json").read_text())
    data = np.load(directory / index["coefficients"])
    dom = RectDomain(index["R"], index["nx"], index["ny"])
    op = assemble_stokes(dom, params)
    return StokesBasis(op, data["lambdas"], data["coefs"])
